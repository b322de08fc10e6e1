#pragma once

#include <string>
#include <vector>

#include "salenc/common.hpp"
#include "salenc/tensor.hpp"

namespace salenc {

struct LevelShape {
    int h = 0;
    int w = 0;
    int cells() const { return h * w; }
};

// shapes for a square image covered by the given strides, ceil division
inline std::vector<LevelShape> level_shapes_for(int image_size, const std::vector<int>& strides) {
    if (image_size < 1) throw ConfigError("image size must be positive");
    std::vector<LevelShape> shapes;
    shapes.reserve(strides.size());
    for (int s : strides) {
        if (s < 1) throw ConfigError("stride must be positive, got " + std::to_string(s));
        const int n = (image_size + s - 1) / s;
        shapes.push_back({n, n});
    }
    return shapes;
}

inline int total_cells(const std::vector<LevelShape>& shapes) {
    int n = 0;
    for (const LevelShape& s : shapes) n += s.cells();
    return n;
}

// flat index of level l's (0,0) cell when levels are concatenated in order
inline std::vector<int> level_offsets(const std::vector<LevelShape>& shapes) {
    std::vector<int> offsets(shapes.size());
    int at = 0;
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        offsets[l] = at;
        at += shapes[l].cells();
    }
    return offsets;
}

// multi-level feature maps, each {C, H_l, W_l}
struct FeaturePyramid {
    std::vector<Tensor> levels;
    std::vector<int> strides;

    int level_count() const { return static_cast<int>(levels.size()); }
    std::vector<LevelShape> shapes() const {
        std::vector<LevelShape> out;
        out.reserve(levels.size());
        for (const Tensor& t : levels) out.push_back({t.dim(1), t.dim(2)});
        return out;
    }
    void validate(int channels) const {
        if (levels.size() != strides.size())
            throw ShapeError("feature pyramid: " + std::to_string(levels.size()) +
                             " levels vs " + std::to_string(strides.size()) + " strides");
        for (const Tensor& t : levels) {
            if (t.rank() != 3 || t.dim(0) != channels)
                throw ShapeError("feature pyramid level has shape " + format_shape(t.shape()) +
                                 ", expected {" + std::to_string(channels) + ",H,W}");
        }
    }
};

}  // namespace salenc
