#include "salenc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace salenc {

namespace {

double eval_loss(const ForwardFn& f, std::span<Tensor> params) {
    Tape tape;
    for (Tensor& p : params) tape.watch(p);
    Tensor loss = f(tape);
    if (!loss.defined() || loss.size() != 1)
        throw ContractError("gradient check: forward function must return a scalar");
    return loss.value();
}

}  // namespace

std::vector<std::vector<double>> tape_gradients(const ForwardFn& f, std::span<Tensor> params) {
    Tape tape;
    for (Tensor& p : params) tape.watch(p);
    Tensor loss = f(tape);
    if (!loss.defined() || loss.size() != 1)
        throw ContractError("gradient check: forward function must return a scalar");
    backward(tape, loss);
    std::vector<std::vector<double>> grads;
    grads.reserve(params.size());
    for (const Tensor& p : params) grads.push_back(p.grad());
    return grads;
}

FdCheckReport finite_difference_error_vs(const std::vector<std::vector<double>>& analytic,
                                         const ForwardFn& f, std::span<Tensor> params,
                                         std::size_t probes_per_param, Rng& rng, double step) {
    if (analytic.size() != params.size())
        throw ContractError("gradient check: analytic gradient count does not match params");
    FdCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = params[pi];
        if (analytic[pi].size() != static_cast<std::size_t>(p.size()))
            throw ContractError("gradient check: analytic gradient size mismatch for param " +
                                std::to_string(pi));
        std::vector<std::size_t> coords(p.size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (coords.size() > probes_per_param) {
            // partial Fisher-Yates: first probes_per_param entries become the sample
            for (std::size_t i = 0; i < probes_per_param; ++i) {
                const std::size_t j =
                    i + static_cast<std::size_t>(rng.uniform_int(
                            0, static_cast<int>(coords.size() - i) - 1));
                std::swap(coords[i], coords[j]);
            }
            coords.resize(probes_per_param);
        }
        for (std::size_t e : coords) {
            double& slot = p.mutable_data()[e];
            const double saved = slot;
            slot = saved + step;
            const double lp = eval_loss(f, params);
            slot = saved - step;
            const double lm = eval_loss(f, params);
            slot = saved;
            const double fd = (lp - lm) / (2.0 * step);
            // the 1e-5 floor keeps exactly-zero gradients (e.g. attention's
            // inert key bias) from dividing summation dust by nothing
            const double err = std::abs(analytic[pi][e] - fd) / std::max(1e-5, std::abs(fd));
            ++report.probes;
            if (err > report.max_rel_err) {
                report.max_rel_err = err;
                report.worst_param = pi;
                report.worst_elem = e;
            }
        }
    }
    return report;
}

FdCheckReport finite_difference_check(const ForwardFn& f, std::span<Tensor> params,
                                      std::size_t probes_per_param, Rng& rng, double step) {
    const auto analytic = tape_gradients(f, params);
    return finite_difference_error_vs(analytic, f, params, probes_per_param, rng, step);
}

}  // namespace salenc
