#include "salenc/tensor.hpp"

#include <numeric>
#include <sstream>

namespace salenc {

std::string format_shape(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

namespace {

std::size_t checked_numel(const std::vector<int>& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + format_shape(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

thread_local std::uint64_t g_mac_count = 0;

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape) {
    const std::size_t n = checked_numel(shape);
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data.assign(n, 0.0);
    return Tensor(std::move(impl));
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.impl()->data.begin(), t.impl()->data.end(), value);
    return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> values) {
    const std::size_t n = checked_numel(shape);
    if (n != values.size()) {
        throw ShapeError("data length " + std::to_string(values.size()) +
                         " does not match shape " + format_shape(shape));
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    return Tensor(std::move(impl));
}

double Tensor::value() const {
    if (!impl_ || impl_->data.size() != 1) {
        throw ContractError("value() requires a single-element tensor, got shape " +
                            (impl_ ? format_shape(impl_->shape) : std::string("<empty>")));
    }
    return impl_->data[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
    if (static_cast<int>(idx.size()) != rank()) {
        throw ContractError("at() index rank mismatch for shape " + format_shape(impl_->shape));
    }
    std::size_t flat = 0;
    auto it = idx.begin();
    for (int axis = 0; axis < rank(); ++axis, ++it) {
        const int d = impl_->shape[static_cast<std::size_t>(axis)];
        if (*it < 0 || *it >= d) {
            throw ContractError("at() index out of bounds for shape " + format_shape(impl_->shape));
        }
        flat = flat * static_cast<std::size_t>(d) + static_cast<std::size_t>(*it);
    }
    return impl_->data[flat];
}

Tensor Tensor::clone() const {
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    return Tensor(std::move(impl));
}

Tape::~Tape() {
    for (auto& weak : attached_) {
        if (auto impl = weak.lock()) {
            if (impl->tape == this) impl->tape = nullptr;
        }
    }
}

void Tape::watch(Tensor& t) {
    auto impl = t.impl();
    if (!impl) throw ContractError("watch() on an empty tensor");
    if (impl->tape == this) {
        std::fill(impl->grad.begin(), impl->grad.end(), 0.0);
        return;
    }
    if (impl->tape != nullptr) throw ContractError("tensor is already attached to another tape");
    impl->grad.assign(impl->data.size(), 0.0);
    impl->tape = this;
    attached_.push_back(impl);
}

void Tape::record(std::shared_ptr<detail::TensorImpl> out, std::function<void()> backward_fn) {
    out->grad.assign(out->data.size(), 0.0);
    out->tape = this;
    attached_.push_back(out);
    nodes_.push_back(std::move(backward_fn));
}

std::size_t backward(Tape& tape, const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw ContractError("backward() requires a scalar loss, got shape " +
                            (loss.defined() ? format_shape(loss.shape()) : std::string("<empty>")));
    }
    if (loss.tape() != &tape) {
        throw ContractError("loss is not recorded on this tape");
    }
    loss.impl()->grad[0] += 1.0;
    std::size_t visited = 0;
    for (auto it = tape.nodes_.rbegin(); it != tape.nodes_.rend(); ++it) {
        (*it)();
        ++visited;
    }
    tape.visits_ += visited;
    return visited;
}

std::uint64_t mac_count() { return g_mac_count; }
void reset_mac_count() { g_mac_count = 0; }

namespace detail {

void add_macs(std::uint64_t n) { g_mac_count += n; }

Tape* common_tape(std::initializer_list<const Tensor*> inputs) {
    Tape* tape = nullptr;
    for (const Tensor* t : inputs) {
        if (!t->defined()) continue;
        Tape* tt = t->tape();
        if (!tt) continue;
        if (tape && tape != tt) throw ContractError("operation mixes tensors from different tapes");
        tape = tt;
    }
    return tape;
}

}  // namespace detail

}  // namespace salenc
