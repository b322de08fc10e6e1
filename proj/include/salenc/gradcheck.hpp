#pragma once

#include <functional>
#include <span>
#include <vector>

#include "salenc/common.hpp"
#include "salenc/tensor.hpp"

namespace salenc {

// rebuilds the computation on the given tape and returns a scalar loss;
// must be deterministic in the current param values
using ForwardFn = std::function<Tensor(Tape&)>;

// one forward+backward on a fresh tape with every param watched;
// returns one gradient vector per param, in param order
std::vector<std::vector<double>> tape_gradients(const ForwardFn& f, std::span<Tensor> params);

struct FdCheckReport {
    double max_rel_err = 0.0;
    std::size_t probes = 0;
    std::size_t worst_param = 0;
    std::size_t worst_elem = 0;
};

// compares supplied analytic gradients against central finite differences at
// randomly probed coordinates;
// rel err = |analytic - fd| / max(1e-5, |fd|); the floor makes the comparison
// absolute for near-zero gradients so roundoff dust does not read as error
FdCheckReport finite_difference_error_vs(const std::vector<std::vector<double>>& analytic,
                                         const ForwardFn& f, std::span<Tensor> params,
                                         std::size_t probes_per_param, Rng& rng,
                                         double step = 1e-5);

// tape_gradients followed by finite_difference_error_vs
FdCheckReport finite_difference_check(const ForwardFn& f, std::span<Tensor> params,
                                      std::size_t probes_per_param, Rng& rng,
                                      double step = 1e-5);

}  // namespace salenc
