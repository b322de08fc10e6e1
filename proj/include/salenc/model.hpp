#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "salenc/filtering.hpp"
#include "salenc/predictor.hpp"
#include "salenc/refinement.hpp"
#include "salenc/salience.hpp"
#include "salenc/scene.hpp"

namespace salenc {

enum class EmbeddingMode { Relative, Absolute, None };

const char* embedding_mode_name(EmbeddingMode m);
EmbeddingMode embedding_mode_from_name(const std::string& name);

struct ModelConfig {
    int image_size = 256;
    int channels = 32;
    int hidden = 32;        // predictor perceptron width
    int ffn_width = 64;
    int heads = 4;
    int encoder_layers = 2;
    std::vector<int> strides = {8, 16, 32, 64};
    int fusion_blocks = 1;
    int fusion_groups = 8;
    int gate_reduction = 4;
    int sample_points = 4;  // K in the reference cost model
    FilterRatios ratios{{0.3, 0.5, 0.7, 1.0}, {1.0, 0.6}};
    EmbeddingMode embedding = EmbeddingMode::Relative;
    bool fusion_enabled = true;
    bool redundancy_enabled = true;
    double nms_threshold = 0.3;
    int top_k = 300;

    int level_count() const { return static_cast<int>(strides.size()); }
    std::vector<LevelShape> level_shapes() const {
        return level_shapes_for(image_size, strides);
    }
    void validate() const;
};

struct Model {
    ModelConfig config;
    PredictorParams predictor;
    std::vector<EncoderLayerParams> encoder;
    Tensor level_embed;  // {L, C}, added to the sinusoid per level
    BackgroundEmbedding background;  // defined unless embedding mode is none
    FusionParams fusion;

    static Model init(const ModelConfig& config, std::uint64_t seed);

    // stable name -> tensor mapping used by checkpoints and the optimizer
    std::vector<std::pair<std::string, Tensor*>> named_tensors();
    std::vector<Tensor*> predictor_tensors() { return predictor.tensors(); }
};

}  // namespace salenc
