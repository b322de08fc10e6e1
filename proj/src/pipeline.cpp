#include "salenc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "salenc/ops.hpp"
#include "salenc/predictor.hpp"

namespace salenc {

const char* supervision_name(Supervision s) {
    return s == Supervision::Salience ? "salience" : "discrete";
}

Supervision supervision_from_name(const std::string& name) {
    if (name == "salience") return Supervision::Salience;
    if (name == "discrete") return Supervision::Discrete;
    throw ConfigError("unknown supervision mode '" + name + "'");
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("training: epochs must be positive");
    if (!(learning_rate >= 0.0)) throw ConfigError("training: learning rate must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw ConfigError("training: momentum must lie in [0,1)");
    focal.validate();
}

std::vector<std::vector<Tensor>> build_targets(const std::vector<SyntheticScene>& corpus,
                                               const TrainConfig& config,
                                               const ModelConfig& model_config,
                                               std::uint64_t shuffle_round) {
    const std::vector<LevelShape> shapes = model_config.level_shapes();
    std::vector<std::vector<Tensor>> targets;
    targets.reserve(corpus.size());
    Rng shuffle_rng = Rng(config.seed).fork(0x5f5f).fork(shuffle_round);
    for (const SyntheticScene& scene : corpus) {
        std::vector<Tensor> maps =
            config.supervision == Supervision::Salience
                ? build_salience_targets(shapes, model_config.strides, scene.plain_boxes())
                : discrete_fg_targets(shapes, model_config.strides, scene.plain_boxes(),
                                      scale_intervals_for(model_config.strides));
        if (config.shuffle_targets) {
            // permute values across the whole pyramid, not per map: a per-level
            // shuffle would keep each level's positive rate, which is signal a
            // model can still learn without ever matching features to labels
            std::vector<double*> slots;
            for (Tensor& map : maps) {
                double* d = map.mutable_data();
                for (int i = 0; i < map.size(); ++i) slots.push_back(d + i);
            }
            for (std::size_t i = slots.size() - 1; i > 0; --i) {
                const std::size_t j = static_cast<std::size_t>(
                    shuffle_rng.uniform_int(0, static_cast<int>(i)));
                std::swap(*slots[i], *slots[j]);
            }
        }
        targets.push_back(std::move(maps));
    }
    return targets;
}

namespace {

double corpus_loss(Model& model, const std::vector<SyntheticScene>& corpus,
                   const std::vector<std::vector<Tensor>>& targets, const FocalParams& focal) {
    double total = 0.0;
    for (std::size_t s = 0; s < corpus.size(); ++s) {
        std::vector<Tensor> pred = predict_salience(corpus[s].pyramid, model.predictor);
        Tensor loss = salience_focal_loss(std::span<const Tensor>(pred.data(), pred.size()),
                                          std::span<const Tensor>(targets[s].data(),
                                                                  targets[s].size()),
                                          focal);
        total += focal.lambda * loss.value();
    }
    return total / static_cast<double>(corpus.size());
}

}  // namespace

TrainResult train_salience(Model& model, const std::vector<SyntheticScene>& corpus,
                           const TrainConfig& config) {
    config.validate();
    if (corpus.empty()) throw ContractError("train_salience: empty corpus");
    auto targets = build_targets(corpus, config, model.config);

    std::vector<Tensor*> params = model.predictor_tensors();
    std::vector<std::vector<double>> velocity;
    velocity.reserve(params.size());
    for (Tensor* p : params) velocity.emplace_back(static_cast<std::size_t>(p->size()), 0.0);

    TrainResult result;
    result.loss_curve.push_back(corpus_loss(model, corpus, targets, config.focal));
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        // shuffled runs redraw the permutation every epoch: under a fixed one,
        // feature patterns recurring across scenes converge to the focal
        // optimum of their own few drawn targets, which is convex in the
        // positive fraction, so distinctive patterns end up lifted above the
        // constant attractor and the "no signal" run quietly acquires signal
        if (config.shuffle_targets)
            targets = build_targets(corpus, config, model.config,
                                    static_cast<std::uint64_t>(epoch));
        for (std::size_t s = 0; s < corpus.size(); ++s) {
            Tape tape;
            for (Tensor* p : params) tape.watch(*p);
            std::vector<Tensor> pred = predict_salience(corpus[s].pyramid, model.predictor);
            Tensor loss = affine_const(
                salience_focal_loss(std::span<const Tensor>(pred.data(), pred.size()),
                                    std::span<const Tensor>(targets[s].data(),
                                                            targets[s].size()),
                                    config.focal),
                config.focal.lambda, 0.0);
            if (!std::isfinite(loss.value()))
                throw ContractError("train_salience: loss diverged at epoch " +
                                    std::to_string(epoch) + ", scene " + std::to_string(s));
            backward(tape, loss);
            for (std::size_t pi = 0; pi < params.size(); ++pi) {
                Tensor* p = params[pi];
                const std::vector<double>& g = p->grad();
                double* values = p->mutable_data();
                for (int e = 0; e < p->size(); ++e) {
                    velocity[pi][static_cast<std::size_t>(e)] =
                        config.momentum * velocity[pi][static_cast<std::size_t>(e)] +
                        g[static_cast<std::size_t>(e)];
                    values[e] -= config.learning_rate * velocity[pi][static_cast<std::size_t>(e)];
                }
            }
        }
        const double epoch_loss = corpus_loss(model, corpus, targets, config.focal);
        if (!std::isfinite(epoch_loss))
            throw ContractError("train_salience: loss diverged after epoch " +
                                std::to_string(epoch));
        result.loss_curve.push_back(epoch_loss);
    }
    return result;
}

double roc_auc(const std::vector<double>& scores, const std::vector<char>& labels) {
    if (scores.size() != labels.size())
        throw ContractError("roc_auc: " + std::to_string(scores.size()) + " scores vs " +
                            std::to_string(labels.size()) + " labels");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    std::size_t n_pos = 0, n_neg = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) {
                pos_rank_sum += avg_rank;
                ++n_pos;
            } else {
                ++n_neg;
            }
        }
        i = j;
    }
    if (n_pos == 0 || n_neg == 0)
        throw ContractError("roc_auc: need both positive and negative samples");
    return (pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double evaluate_salience_auc(const Model& model, const std::vector<SyntheticScene>& corpus) {
    const std::vector<LevelShape> shapes = model.config.level_shapes();
    std::vector<std::vector<double>> scores(shapes.size());
    std::vector<std::vector<char>> labels(shapes.size());
    for (const SyntheticScene& scene : corpus) {
        std::vector<Tensor> pred = predict_salience(scene.pyramid, model.predictor);
        std::vector<Tensor> truth =
            build_salience_targets(shapes, model.config.strides, scene.plain_boxes());
        for (std::size_t l = 0; l < pred.size(); ++l) {
            for (int p = 0; p < pred[l].size(); ++p) {
                scores[l].push_back(pred[l].data()[static_cast<std::size_t>(p)]);
                labels[l].push_back(truth[l].data()[static_cast<std::size_t>(p)] > 0.0 ? 1 : 0);
            }
        }
    }
    // selection ranks cells within a level, so ranking quality is scored per
    // level and averaged; pooling everything would mostly measure score
    // calibration between levels, which nothing downstream depends on
    double sum = 0.0;
    int used = 0;
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        const bool has_pos =
            std::find(labels[l].begin(), labels[l].end(), char{1}) != labels[l].end();
        const bool has_neg =
            std::find(labels[l].begin(), labels[l].end(), char{0}) != labels[l].end();
        if (!has_pos || !has_neg) continue;  // single-class level, nothing to rank
        sum += roc_auc(scores[l], labels[l]);
        ++used;
    }
    if (used == 0)
        throw ContractError("evaluate_salience_auc: no level has both classes");
    return sum / used;
}

FeaturePyramid fuse_pyramid(const FeaturePyramid& pyramid, const FusionParams& params) {
    const int levels = pyramid.level_count();
    if (levels < 1) throw ContractError("fuse_pyramid: empty pyramid");
    FeaturePyramid out;
    out.strides = pyramid.strides;
    out.levels.resize(static_cast<std::size_t>(levels));
    out.levels[static_cast<std::size_t>(levels - 1)] =
        pyramid.levels[static_cast<std::size_t>(levels - 1)];
    for (int l = levels - 2; l >= 0; --l)
        out.levels[static_cast<std::size_t>(l)] =
            cross_level_fuse(pyramid.levels[static_cast<std::size_t>(l)],
                             out.levels[static_cast<std::size_t>(l + 1)], params);
    return out;
}

EncodeResult encode_scene(const SyntheticScene& scene, const Model& model) {
    const ModelConfig& cfg = model.config;
    scene.pyramid.validate(cfg.channels);
    if (scene.pyramid.strides != cfg.strides)
        throw ContractError("encode_scene: scene pyramid strides do not match the model config");

    EncodeResult result;
    result.salience = predict_salience(scene.pyramid, model.predictor);
    result.plan = select_queries(result.salience, cfg.strides, cfg.ratios);

    const FeaturePyramid used =
        cfg.fusion_enabled ? fuse_pyramid(scene.pyramid, model.fusion) : scene.pyramid;

    std::vector<Tensor> level_rows;
    std::vector<int> level_of_row;
    level_rows.reserve(used.levels.size());
    for (std::size_t l = 0; l < used.levels.size(); ++l) {
        level_rows.push_back(channels_to_rows(used.levels[l]));
        const int cells = level_rows.back().dim(0);
        for (int i = 0; i < cells; ++i) level_of_row.push_back(static_cast<int>(l));
    }
    Tensor queries = concat_rows(std::span<const Tensor>(level_rows.data(), level_rows.size()));

    Tensor positions = add(sinusoidal_positions(result.plan.shapes, cfg.channels),
                           gather_rows(model.level_embed, level_of_row));

    for (int t = 0; t < cfg.encoder_layers; ++t)
        queries = selective_encoder_layer(queries, positions,
                                          result.plan.omega[static_cast<std::size_t>(t)],
                                          model.encoder[static_cast<std::size_t>(t)]);

    if (cfg.embedding != EmbeddingMode::None)
        queries = apply_background_embedding(queries, result.plan, model.background);

    result.queries = queries;
    return result;
}

std::vector<Selection> two_stage_initialize(const Tensor& queries,
                                            const std::vector<Tensor>& salience_maps, int k,
                                            double nms_threshold, bool redundancy,
                                            const std::vector<int>& strides) {
    if (k < 1) throw ContractError("two_stage_initialize: k must be >= 1");
    if (salience_maps.size() != strides.size())
        throw ContractError("two_stage_initialize: " + std::to_string(salience_maps.size()) +
                            " maps vs " + std::to_string(strides.size()) + " strides");
    struct Entry {
        int global = 0;
        Selection sel;
    };
    std::vector<Entry> entries;
    int global = 0;
    for (std::size_t l = 0; l < salience_maps.size(); ++l) {
        const Tensor& m = salience_maps[l];
        if (m.rank() != 3 || m.dim(0) != 1)
            throw ShapeError("two_stage_initialize: map has shape " + format_shape(m.shape()));
        const int h = m.dim(1), w = m.dim(2);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j, ++global) {
                Entry e;
                e.global = global;
                e.sel.pos = {static_cast<int>(l), i, j};
                e.sel.score = m.data()[static_cast<std::size_t>(i * w + j)];
                entries.push_back(e);
            }
    }
    if (queries.defined() && queries.dim(0) != global)
        throw ContractError("two_stage_initialize: " + std::to_string(queries.dim(0)) +
                            " queries for " + std::to_string(global) + " map positions");
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.sel.score != b.sel.score) return a.sel.score > b.sel.score;
        return a.global < b.global;
    });
    const std::size_t take = std::min<std::size_t>(entries.size(), static_cast<std::size_t>(k));
    std::vector<Selection> top;
    top.reserve(take);
    for (std::size_t i = 0; i < take; ++i) top.push_back(entries[i].sel);
    if (!redundancy) return top;
    return remove_redundancy(top, nms_threshold, RedundancyMode::Both, strides);
}

std::map<ScaleClass, CoverageStats> evaluate_selection_bias(
    const Model& model, const std::vector<SyntheticScene>& corpus) {
    struct Accum {
        int objects = 0;
        int covered = 0;
        long long queries = 0;
    };
    std::map<ScaleClass, Accum> acc;
    for (const SyntheticScene& scene : corpus) {
        std::vector<Tensor> pred = predict_salience(scene.pyramid, model.predictor);
        FilterPlan plan = select_queries(pred, model.config.strides, model.config.ratios);

        // union of every layer's selection, as image coordinates
        std::vector<std::pair<double, double>> points;
        const int layers = plan.layer_count();
        const int levels = static_cast<int>(plan.shapes.size());
        for (int l = 0; l < levels; ++l) {
            std::vector<char> taken(static_cast<std::size_t>(plan.shapes[static_cast<std::size_t>(l)].cells()), 0);
            for (int t = 0; t < layers; ++t)
                for (int idx : plan.per_level[static_cast<std::size_t>(t)][static_cast<std::size_t>(l)])
                    taken[static_cast<std::size_t>(idx)] = 1;
            const int w = plan.shapes[static_cast<std::size_t>(l)].w;
            for (std::size_t idx = 0; idx < taken.size(); ++idx) {
                if (!taken[idx]) continue;
                const GridPos pos{l, static_cast<int>(idx) / w, static_cast<int>(idx) % w};
                points.push_back(
                    grid_to_image_coords(pos, plan.strides[static_cast<std::size_t>(l)]));
            }
        }
        for (const SceneBox& sb : scene.boxes) {
            int inside = 0;
            for (const auto& [x, y] : points)
                if (std::abs(x - sb.box.cx) <= 0.5 * sb.box.w &&
                    std::abs(y - sb.box.cy) <= 0.5 * sb.box.h)
                    ++inside;
            Accum& a = acc[sb.scale];
            ++a.objects;
            if (inside > 0) ++a.covered;
            a.queries += inside;
        }
    }
    std::map<ScaleClass, CoverageStats> out;
    for (const auto& [cls, a] : acc) {
        CoverageStats s;
        s.objects = a.objects;
        s.coverage = a.objects > 0 ? static_cast<double>(a.covered) / a.objects : 0.0;
        s.queries_per_object =
            a.objects > 0 ? static_cast<double>(a.queries) / a.objects : 0.0;
        out[cls] = s;
    }
    return out;
}

}  // namespace salenc
