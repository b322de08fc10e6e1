#pragma once

#include <span>
#include <vector>

#include "salenc/geometry.hpp"
#include "salenc/pyramid.hpp"
#include "salenc/tensor.hpp"

namespace salenc {

struct FocalParams {
    double alpha = 0.25;
    double gamma = 2.0;
    double lambda = 2.0;   // loss weight applied by the training loop, not here
    double eps_clamp = 1e-12;

    void validate() const;
};

// half-open over the lower edge: a box belongs to a level when
// lo < max_side <= hi
struct ScaleInterval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double side) const { return side > lo && side <= hi; }
};

// one interval per stride: (4s, 16s], opened downward on the finest level
// and upward on the coarsest so every side length lands somewhere
std::vector<ScaleInterval> scale_intervals_for(const std::vector<int>& strides);

std::vector<ScaleInterval> default_scale_intervals();  // strides 8,16,32,64

// relative closeness to the box center, identical for identical
// normalized offsets; 1 at the center, 0 on the corner, 0 outside
double salience_confidence(double x, double y, const BBox& box);

// per-level {1,H,W} maps; value is the max confidence over all boxes
std::vector<Tensor> build_salience_targets(const std::vector<LevelShape>& shapes,
                                           const std::vector<int>& strides,
                                           const std::vector<BBox>& boxes);

// binary per-level {1,H,W} maps; 1 iff the position lies inside some box
// whose max side falls in that level's interval
std::vector<Tensor> discrete_fg_targets(const std::vector<LevelShape>& shapes,
                                        const std::vector<int>& strides,
                                        const std::vector<BBox>& boxes,
                                        const std::vector<ScaleInterval>& intervals);

// mean over every position of -alpha*(1-p)^gamma*log(p) with
// p = pred*target + (1-pred)*(1-target), clamped to [eps_clamp, 1];
// pred values must already be probabilities
Tensor salience_focal_loss(std::span<const Tensor> pred, std::span<const Tensor> targets,
                           const FocalParams& params);

}  // namespace salenc
