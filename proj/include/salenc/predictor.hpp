#pragma once

#include <vector>

#include "salenc/pyramid.hpp"
#include "salenc/tensor.hpp"

namespace salenc {

// shared per-position scorer plus per-level modulation coefficients
struct PredictorParams {
    Tensor w1;      // {C, hidden}
    Tensor b1;      // {1, hidden}
    Tensor w2;      // {hidden, 1}
    Tensor b2;      // {1, 1}
    Tensor alphas;  // {1, L-1}; undefined when L == 1

    static PredictorParams init(int channels, int hidden, int levels, Rng& rng);
    std::vector<Tensor*> tensors();
    void validate(int channels, int levels) const;
};

// scores the coarsest level first, then walks down the pyramid multiplying
// each finer feature map by (1 + upsample(alpha * coarser_scores)) before
// scoring it; outputs one {1,H_l,W_l} map per level, values in (0,1)
std::vector<Tensor> predict_salience(const FeaturePyramid& pyramid,
                                     const PredictorParams& params);

}  // namespace salenc
