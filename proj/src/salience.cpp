#include "salenc/salience.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "salenc/ops.hpp"

namespace salenc {

void FocalParams::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ConfigError("focal alpha must lie in (0,1), got " + std::to_string(alpha));
    if (!(gamma >= 0.0)) throw ConfigError("focal gamma must be >= 0");
    if (!(eps_clamp > 0.0)) throw ConfigError("focal clamp epsilon must be > 0");
    if (!(lambda >= 0.0)) throw ConfigError("focal loss weight must be >= 0");
}

std::vector<ScaleInterval> scale_intervals_for(const std::vector<int>& strides) {
    if (strides.empty()) throw ConfigError("scale intervals: no strides");
    std::vector<ScaleInterval> out;
    for (std::size_t l = 0; l < strides.size(); ++l) {
        ScaleInterval iv;
        iv.lo = l == 0 ? -1.0 : 4.0 * strides[l];
        iv.hi = l + 1 == strides.size() ? std::numeric_limits<double>::infinity()
                                        : 16.0 * strides[l];
        out.push_back(iv);
    }
    return out;
}

std::vector<ScaleInterval> default_scale_intervals() {
    return scale_intervals_for({8, 16, 32, 64});
}

double salience_confidence(double x, double y, const BBox& box) {
    // everything runs on normalized offsets so that two points with the same
    // (dx/w, dy/h) get bitwise-equal values regardless of box size
    const double dxn = (x - box.cx) / box.w;
    const double dyn = (y - box.cy) / box.h;
    if (std::abs(dxn) > 0.5 || std::abs(dyn) > 0.5) return 0.0;
    const double v = 1.0 - std::sqrt(2.0 * dxn * dxn + 2.0 * dyn * dyn);
    return v > 0.0 ? v : 0.0;
}

std::vector<Tensor> build_salience_targets(const std::vector<LevelShape>& shapes,
                                           const std::vector<int>& strides,
                                           const std::vector<BBox>& boxes) {
    if (shapes.size() != strides.size())
        throw ShapeError("salience targets: " + std::to_string(shapes.size()) + " shapes vs " +
                         std::to_string(strides.size()) + " strides");
    std::vector<Tensor> maps;
    maps.reserve(shapes.size());
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        const int h = shapes[l].h, w = shapes[l].w;
        Tensor map = Tensor::zeros({1, h, w});
        double* d = map.mutable_data();
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const auto [x, y] =
                    grid_to_image_coords({static_cast<int>(l), i, j}, strides[l]);
                double best = 0.0;
                for (const BBox& b : boxes) best = std::max(best, salience_confidence(x, y, b));
                d[i * w + j] = best;
            }
        maps.push_back(map);
    }
    return maps;
}

std::vector<Tensor> discrete_fg_targets(const std::vector<LevelShape>& shapes,
                                        const std::vector<int>& strides,
                                        const std::vector<BBox>& boxes,
                                        const std::vector<ScaleInterval>& intervals) {
    if (shapes.size() != strides.size())
        throw ShapeError("discrete targets: " + std::to_string(shapes.size()) + " shapes vs " +
                         std::to_string(strides.size()) + " strides");
    if (intervals.size() != shapes.size())
        throw ConfigError("discrete targets: " + std::to_string(intervals.size()) +
                          " scale intervals for " + std::to_string(shapes.size()) + " levels");
    std::vector<Tensor> maps;
    maps.reserve(shapes.size());
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        const int h = shapes[l].h, w = shapes[l].w;
        Tensor map = Tensor::zeros({1, h, w});
        double* d = map.mutable_data();
        for (const BBox& b : boxes) {
            if (!intervals[l].contains(b.max_side())) continue;
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) {
                    const auto [x, y] =
                        grid_to_image_coords({static_cast<int>(l), i, j}, strides[l]);
                    if (std::abs(x - b.cx) <= 0.5 * b.w && std::abs(y - b.cy) <= 0.5 * b.h)
                        d[i * w + j] = 1.0;
                }
        }
        maps.push_back(map);
    }
    return maps;
}

Tensor salience_focal_loss(std::span<const Tensor> pred, std::span<const Tensor> targets,
                           const FocalParams& params) {
    params.validate();
    if (pred.size() != targets.size())
        throw ContractError("focal loss: " + std::to_string(pred.size()) + " predictions vs " +
                            std::to_string(targets.size()) + " targets");
    if (pred.empty()) throw ContractError("focal loss: no levels");
    Tensor total;
    int count = 0;
    for (std::size_t l = 0; l < pred.size(); ++l) {
        if (pred[l].shape() != targets[l].shape())
            throw ContractError("focal loss: level " + std::to_string(l) + " prediction " +
                                format_shape(pred[l].shape()) + " vs target " +
                                format_shape(targets[l].shape()));
        const Tensor& t = targets[l];
        Tensor one_minus_t = affine_const(t, -1.0, 1.0);
        Tensor p = add(mul(pred[l], t), mul(affine_const(pred[l], -1.0, 1.0), one_minus_t));
        Tensor pc = clamp(p, params.eps_clamp, 1.0);
        Tensor term = mul(pow_const(affine_const(pc, -1.0, 1.0), params.gamma), log(pc));
        Tensor level_sum = sum_all(affine_const(term, -params.alpha, 0.0));
        total = total.defined() ? add(total, level_sum) : level_sum;
        count += pred[l].size();
    }
    return affine_const(total, 1.0 / static_cast<double>(count), 0.0);
}

}  // namespace salenc
