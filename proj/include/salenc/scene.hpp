#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "salenc/geometry.hpp"
#include "salenc/pyramid.hpp"

namespace salenc {

enum class ScaleClass { Small, Medium, Large };

const char* scale_class_name(ScaleClass c);
ScaleClass scale_class_from_name(const std::string& name);

struct SceneBox {
    BBox box;
    ScaleClass scale = ScaleClass::Small;
};

struct SyntheticScene {
    std::uint64_t seed = 0;
    int image_size = 0;
    std::vector<SceneBox> boxes;
    FeaturePyramid pyramid;

    std::vector<BBox> plain_boxes() const;
};

struct SceneConfig {
    int image_size = 256;
    int channels = 32;
    std::vector<int> strides = {8, 16, 32, 64};
    int boxes_per_scene = 6;
    // requested proportions of each scale class; box counts follow them
    // exactly via largest-remainder rounding
    double mix_small = 1.0;
    double mix_medium = 1.0;
    double mix_large = 1.0;
    // per-class max-side ranges in pixels
    double small_lo = 6.0, small_hi = 16.0;
    double medium_lo = 24.0, medium_hi = 64.0;
    double large_lo = 80.0, large_hi = 176.0;
    // feature synthesis: a graded center-peaked signature, a size-correlated
    // plateau along an orthogonal direction, smooth background, pixel noise
    std::uint64_t signature_seed = 7;
    double bump_amp = 2.0;
    double plateau_amp = 1.0;
    double background_sigma = 0.25;
    double noise_sigma = 0.05;

    void validate() const;
};

// deterministic: the same (seed, config) is bitwise reproducible
SyntheticScene generate_scene(std::uint64_t seed, const SceneConfig& config);

std::vector<SyntheticScene> generate_corpus(std::uint64_t base_seed, int scene_count,
                                            const SceneConfig& config);

}  // namespace salenc
