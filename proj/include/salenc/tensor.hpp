#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "salenc/common.hpp"

namespace salenc {

class Tape;

namespace detail {
struct TensorImpl {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty = no gradient slot
    Tape* tape = nullptr;
};
}  // namespace detail

// Dense row-major tensor of 64-bit floats. Copies share storage; operations
// never mutate their inputs, so sharing is only observable through the
// explicit mutators (used for parameter updates and finite-difference probes).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor from_data(std::vector<int> shape, std::vector<double> values);
    static Tensor scalar(double v) { return from_data({1}, {v}); }

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const { return impl_->shape; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    int dim(int axis) const { return impl_->shape[static_cast<std::size_t>(axis)]; }
    int size() const { return static_cast<int>(impl_->data.size()); }

    const std::vector<double>& data() const { return impl_->data; }
    double* mutable_data() { return impl_->data.data(); }

    // scalar convenience; ContractError unless size() == 1
    double value() const;
    double at(std::initializer_list<int> idx) const;

    bool has_grad() const { return impl_ && !impl_->grad.empty(); }
    const std::vector<double>& grad() const { return impl_->grad; }

    Tape* tape() const { return impl_ ? impl_->tape : nullptr; }

    // deep copy: detached from any tape, no gradient slot
    Tensor clone() const;

    std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

// Reverse-mode tape. Operations whose inputs are attached to a tape append
// one node each, in execution order, so the node list is always
// topologically sorted; backward() replays it once in reverse.
class Tape {
public:
    Tape() = default;
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Registers a leaf: allocates (or zeroes) its gradient slot and attaches
    // it to this tape. Leaves watched but never reached by backward keep
    // their zero gradient.
    void watch(Tensor& t);

    int node_count() const { return static_cast<int>(nodes_.size()); }
    std::size_t backward_visits() const { return visits_; }

    // op-recording interface; `out` is the op output to attach
    void record(std::shared_ptr<detail::TensorImpl> out, std::function<void()> backward_fn);

private:
    friend std::size_t backward(Tape&, const Tensor&);

    std::vector<std::function<void()>> nodes_;
    std::vector<std::weak_ptr<detail::TensorImpl>> attached_;
    std::size_t visits_ = 0;
};

// Populates gradient slots of every recorded tensor and watched leaf with
// d(loss)/d(tensor). Returns the number of nodes visited (always exactly
// node_count(); exposed for the replay-linearity accounting tests).
// ContractError if loss is not scalar or not recorded on `tape`.
std::size_t backward(Tape& tape, const Tensor& loss);

// multiply-accumulate accounting (thread-local), incremented by the ops
std::uint64_t mac_count();
void reset_mac_count();

namespace detail {
void add_macs(std::uint64_t n);
// resolves the common tape of the inputs (nullptr if all constants);
// ContractError when two inputs live on different tapes
Tape* common_tape(std::initializer_list<const Tensor*> inputs);
}  // namespace detail

}  // namespace salenc
