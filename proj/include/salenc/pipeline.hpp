#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "salenc/model.hpp"
#include "salenc/refinement.hpp"
#include "salenc/scene.hpp"

namespace salenc {

enum class Supervision { Salience, Discrete };

const char* supervision_name(Supervision s);
Supervision supervision_from_name(const std::string& name);

struct TrainConfig {
    int epochs = 50;
    double learning_rate = 1e-4;
    double momentum = 0.9;
    FocalParams focal;  // focal.lambda scales the training objective
    std::uint64_t seed = 42;
    Supervision supervision = Supervision::Salience;
    bool shuffle_targets = false;  // null-hypothesis runs

    void validate() const;
};

struct TrainResult {
    // entry 0 is the pre-training corpus loss; entry e the loss after epoch e
    std::vector<double> loss_curve;

    double initial_loss() const { return loss_curve.front(); }
    double final_loss() const { return loss_curve.back(); }
};

// momentum SGD on the predictor parameters against lambda * focal loss;
// throws on non-finite loss; deterministic for a given (corpus, config)
TrainResult train_salience(Model& model, const std::vector<SyntheticScene>& corpus,
                           const TrainConfig& config);

// per-scene supervision maps; honors supervision mode and target shuffling.
// shuffle_round salts the permutation so a caller can redraw it
std::vector<std::vector<Tensor>> build_targets(const std::vector<SyntheticScene>& corpus,
                                               const TrainConfig& config,
                                               const ModelConfig& model_config,
                                               std::uint64_t shuffle_round = 0);

// Mann-Whitney statistic with average ranks for ties
double roc_auc(const std::vector<double>& scores, const std::vector<char>& labels);

// per-level ROC-AUC (cells pooled across scenes, positive = inside any box)
// averaged over levels; single-class levels are skipped
double evaluate_salience_auc(const Model& model, const std::vector<SyntheticScene>& corpus);

// top-down chain: each finer level is fused with the already fused level
// above it
FeaturePyramid fuse_pyramid(const FeaturePyramid& pyramid, const FusionParams& params);

struct EncodeResult {
    Tensor queries;                // {N,C} after all encoder layers + refinement
    FilterPlan plan;
    std::vector<Tensor> salience;  // predicted per-level maps
};

// predict -> select -> (fuse) -> flatten -> T selective layers -> background
// embedding on the final layer's unselected rows
EncodeResult encode_scene(const SyntheticScene& scene, const Model& model);

// top-k positions across levels by salience score, then redundancy removal
// (level-wise followed by image-wise) when enabled
std::vector<Selection> two_stage_initialize(const Tensor& queries,
                                            const std::vector<Tensor>& salience_maps, int k,
                                            double nms_threshold, bool redundancy,
                                            const std::vector<int>& strides);

struct CoverageStats {
    double coverage = 0.0;           // share of objects with >= 1 selected query inside
    double queries_per_object = 0.0;
    int objects = 0;
};

// selection footprint of a trained model under its configured ratios,
// split by ground-truth scale class
std::map<ScaleClass, CoverageStats> evaluate_selection_bias(
    const Model& model, const std::vector<SyntheticScene>& corpus);

}  // namespace salenc
