#include "salenc/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "salenc/ops.hpp"
#include "salenc/salience.hpp"

namespace salenc {

const char* scale_class_name(ScaleClass c) {
    switch (c) {
        case ScaleClass::Small: return "small";
        case ScaleClass::Medium: return "medium";
        case ScaleClass::Large: return "large";
    }
    return "?";
}

ScaleClass scale_class_from_name(const std::string& name) {
    if (name == "small") return ScaleClass::Small;
    if (name == "medium") return ScaleClass::Medium;
    if (name == "large") return ScaleClass::Large;
    throw ConfigError("unknown scale class '" + name + "'");
}

std::vector<BBox> SyntheticScene::plain_boxes() const {
    std::vector<BBox> out;
    out.reserve(boxes.size());
    for (const SceneBox& b : boxes) out.push_back(b.box);
    return out;
}

void SceneConfig::validate() const {
    if (image_size < 8) throw ConfigError("scene: image size too small");
    if (channels < 4) throw ConfigError("scene: need at least 4 channels");
    if (strides.empty()) throw ConfigError("scene: no pyramid strides");
    if (boxes_per_scene < 0) throw ConfigError("scene: negative box count");
    if (mix_small < 0.0 || mix_medium < 0.0 || mix_large < 0.0 ||
        mix_small + mix_medium + mix_large <= 0.0)
        throw ConfigError("scene: scale mix must be non-negative and non-zero");
    if (!(small_lo > 0.0 && small_lo <= small_hi && medium_lo <= medium_hi &&
          large_lo <= large_hi))
        throw ConfigError("scene: malformed size ranges");
    if (large_hi >= image_size)
        throw ConfigError("scene: largest box does not fit the image");
}

namespace {

// exact largest-remainder split of n into the three classes
std::vector<int> class_counts(int n, double ms, double mm, double ml) {
    const double total = ms + mm + ml;
    const double quota[3] = {n * ms / total, n * mm / total, n * ml / total};
    std::vector<int> count(3);
    double frac[3];
    int assigned = 0;
    for (int i = 0; i < 3; ++i) {
        count[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(quota[i]));
        frac[i] = quota[i] - std::floor(quota[i]);
        assigned += count[static_cast<std::size_t>(i)];
    }
    std::vector<int> order = {0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (frac[a] != frac[b]) return frac[a] > frac[b];
        return a < b;
    });
    for (int i = 0; assigned < n; ++i, ++assigned)
        ++count[static_cast<std::size_t>(order[static_cast<std::size_t>(i % 3)])];
    return count;
}

// unit-norm signature directions shared by every scene of a config
void signature_directions(const SceneConfig& cfg, std::vector<double>& u,
                          std::vector<double>& z) {
    Rng rng(cfg.signature_seed);
    const int c = cfg.channels;
    u.resize(static_cast<std::size_t>(c));
    z.resize(static_cast<std::size_t>(c));
    for (double& v : u) v = rng.normal();
    for (double& v : z) v = rng.normal();
    double nu = 0.0;
    for (double v : u) nu += v * v;
    nu = std::sqrt(nu);
    for (double& v : u) v /= nu;
    double dot = 0.0;
    for (int i = 0; i < c; ++i) dot += z[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i)];
    for (int i = 0; i < c; ++i) z[static_cast<std::size_t>(i)] -= dot * u[static_cast<std::size_t>(i)];
    double nz = 0.0;
    for (double v : z) nz += v * v;
    nz = std::sqrt(nz);
    for (double& v : z) v /= nz;
}

Tensor smooth_background(int channels, int h, int w, double sigma, Rng& rng) {
    const int ch = std::max(1, h / 4);
    const int cw = std::max(1, w / 4);
    Tensor coarse = Tensor::zeros({channels, ch, cw});
    double* d = coarse.mutable_data();
    for (int i = 0; i < coarse.size(); ++i) d[i] = rng.normal() * sigma;
    return bilinear_resize(coarse, h, w);
}

}  // namespace

SyntheticScene generate_scene(std::uint64_t seed, const SceneConfig& config) {
    config.validate();
    SyntheticScene scene;
    scene.seed = seed;
    scene.image_size = config.image_size;

    Rng rng = Rng(seed).fork(0x5ce9e5);

    const std::vector<int> counts =
        class_counts(config.boxes_per_scene, config.mix_small, config.mix_medium,
                     config.mix_large);
    const double ranges[3][2] = {{config.small_lo, config.small_hi},
                                 {config.medium_lo, config.medium_hi},
                                 {config.large_lo, config.large_hi}};
    const ScaleClass classes[3] = {ScaleClass::Small, ScaleClass::Medium, ScaleClass::Large};
    for (int cls = 0; cls < 3; ++cls) {
        for (int b = 0; b < counts[static_cast<std::size_t>(cls)]; ++b) {
            const double max_side = rng.uniform(ranges[cls][0], ranges[cls][1]);
            const double aspect = rng.uniform(0.6, 1.0);
            double w = max_side, h = max_side * aspect;
            if (rng.uniform() < 0.5) std::swap(w, h);
            BBox box;
            box.w = w;
            box.h = h;
            box.cx = rng.uniform(0.5 * w, config.image_size - 0.5 * w);
            box.cy = rng.uniform(0.5 * h, config.image_size - 0.5 * h);
            scene.boxes.push_back({box, classes[cls]});
        }
    }

    std::vector<double> u, z;
    signature_directions(config, u, z);

    const std::vector<LevelShape> shapes = level_shapes_for(config.image_size, config.strides);
    scene.pyramid.strides = config.strides;
    Rng noise_rng = rng.fork(0xbac9);
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        const int h = shapes[l].h, w = shapes[l].w, c = config.channels;
        Tensor level = smooth_background(c, h, w, config.background_sigma, noise_rng);
        double* d = level.mutable_data();
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const auto [x, y] =
                    grid_to_image_coords({static_cast<int>(l), i, j}, config.strides[l]);
                double bump = 0.0, plateau = 0.0;
                for (const SceneBox& sb : scene.boxes) {
                    const double theta = salience_confidence(x, y, sb.box);
                    bump += config.bump_amp * theta;
                    if (std::abs(x - sb.box.cx) <= 0.5 * sb.box.w &&
                        std::abs(y - sb.box.cy) <= 0.5 * sb.box.h)
                        plateau += config.plateau_amp *
                                   std::min(1.5, sb.box.max_side() / 96.0);
                }
                for (int ch = 0; ch < c; ++ch)
                    d[(ch * h + i) * w + j] += bump * u[static_cast<std::size_t>(ch)] +
                                               plateau * z[static_cast<std::size_t>(ch)] +
                                               noise_rng.normal() * config.noise_sigma;
            }
        scene.pyramid.levels.push_back(level);
    }
    return scene;
}

std::vector<SyntheticScene> generate_corpus(std::uint64_t base_seed, int scene_count,
                                            const SceneConfig& config) {
    if (scene_count < 1) throw ConfigError("corpus: scene count must be positive");
    std::vector<SyntheticScene> out;
    out.reserve(static_cast<std::size_t>(scene_count));
    Rng seeder(base_seed);
    for (int i = 0; i < scene_count; ++i) out.push_back(generate_scene(seeder.next_u64(), config));
    return out;
}

}  // namespace salenc
