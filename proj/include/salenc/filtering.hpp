#pragma once

#include <vector>

#include "salenc/pyramid.hpp"
#include "salenc/tensor.hpp"

namespace salenc {

// v binds to feature levels, w to encoder layers
struct FilterRatios {
    std::vector<double> level_ratios;  // v, one per level
    std::vector<double> layer_ratios;  // w, one per layer

    void validate(int levels, int layers) const;
};

// per-layer query selection; level lists hold level-local flat indices
// (row-major i*W+j) in ascending order, omega holds the matching global
// indices into the cross-level concatenation
struct FilterPlan {
    std::vector<LevelShape> shapes;
    std::vector<int> strides;
    FilterRatios ratios;
    std::vector<std::vector<std::vector<int>>> per_level;  // [layer][level]
    std::vector<std::vector<int>> omega;                   // [layer]

    int layer_count() const { return static_cast<int>(omega.size()); }
};

// top-k positions per (layer, level) by salience with k = ceil(v*w*H*W),
// ties broken by lower flat index; nested across layers by construction
FilterPlan select_queries(const std::vector<Tensor>& salience_maps,
                          const std::vector<int>& strides, const FilterRatios& ratios);

struct EncoderLayerParams {
    int heads = 1;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;      // {C,C} / {1,C}
    Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;      // {C,F} {1,F} {F,C} {1,C}

    static EncoderLayerParams init(int channels, int ffn_width, int heads, Rng& rng);
    std::vector<Tensor*> tensors();
    void validate(int channels) const;
};

// rows listed in omega are replaced by multi-head attention (queries are the
// selected rows plus their position encodings, keys are all rows plus
// position encodings, values are all rows) plus residual, then a relu MLP
// block with residual; rows not in omega come back bitwise unchanged
Tensor selective_encoder_layer(const Tensor& queries, const Tensor& positions,
                               const std::vector<int>& omega, const EncoderLayerParams& params);

// fixed 2-D sinusoid per level over the cross-level concatenation, {N,C}
Tensor sinusoidal_positions(const std::vector<LevelShape>& shapes, int channels);

// operation counts of the reference cost model: per level and layer,
// queries * C * (C + K*C + 5K + 3MK); dense runs every query every layer,
// filtered runs v_l*w_t of them
struct CostBreakdown {
    double dense_ops = 0.0;
    double filtered_ops = 0.0;
};

CostBreakdown analytic_cost(const std::vector<LevelShape>& shapes, const FilterRatios& ratios,
                            int channels, int heads, int sample_points);

// counted: selected positions over layers*total positions, from the plan;
// closed_form: (|w|_1/T) * (sum v_l*s_l^2 / sum s_l^2) as published
struct KeepRatio {
    double counted = 0.0;
    double closed_form = 0.0;
};

KeepRatio measured_keep_ratio(const FilterPlan& plan);

}  // namespace salenc
