#include "salenc/model.hpp"

#include <algorithm>

namespace salenc {

const char* embedding_mode_name(EmbeddingMode m) {
    switch (m) {
        case EmbeddingMode::Relative: return "relative";
        case EmbeddingMode::Absolute: return "absolute";
        case EmbeddingMode::None: return "none";
    }
    return "?";
}

EmbeddingMode embedding_mode_from_name(const std::string& name) {
    if (name == "relative") return EmbeddingMode::Relative;
    if (name == "absolute") return EmbeddingMode::Absolute;
    if (name == "none") return EmbeddingMode::None;
    throw ConfigError("unknown embedding mode '" + name + "'");
}

void ModelConfig::validate() const {
    if (image_size < 8) throw ConfigError("model: image size too small");
    if (channels < 4 || channels % 4 != 0)
        throw ConfigError("model: channels must be a positive multiple of 4");
    if (hidden < 1 || ffn_width < 1) throw ConfigError("model: widths must be positive");
    if (heads < 1 || channels % heads != 0)
        throw ConfigError("model: heads must divide channels");
    if (encoder_layers < 1) throw ConfigError("model: need at least one encoder layer");
    if (strides.empty()) throw ConfigError("model: no pyramid strides");
    for (int s : strides)
        if (s < 1) throw ConfigError("model: strides must be positive");
    if (fusion_blocks < 0) throw ConfigError("model: fusion block count must be >= 0");
    if (fusion_groups < 1 || channels % fusion_groups != 0)
        throw ConfigError("model: fusion groups must divide channels");
    if (gate_reduction < 1 || channels % gate_reduction != 0)
        throw ConfigError("model: gate reduction must divide channels");
    if (sample_points < 1) throw ConfigError("model: cost-model sample points must be positive");
    if (embedding == EmbeddingMode::Absolute && channels % 2 != 0)
        throw ConfigError("model: absolute embedding needs even channels");
    if (!(nms_threshold >= 0.0)) throw ConfigError("model: nms threshold must be >= 0");
    if (top_k < 1) throw ConfigError("model: top_k must be >= 1");
    ratios.validate(level_count(), static_cast<int>(ratios.layer_ratios.size()));
    if (static_cast<int>(ratios.layer_ratios.size()) != encoder_layers)
        throw ConfigError("model: " + std::to_string(ratios.layer_ratios.size()) +
                          " layer ratios for " + std::to_string(encoder_layers) +
                          " encoder layers");
}

Model Model::init(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Model m;
    m.config = config;
    Rng root(seed);

    Rng pred_rng = root.fork(1);
    m.predictor = PredictorParams::init(config.channels, config.hidden, config.level_count(),
                                        pred_rng);
    for (int t = 0; t < config.encoder_layers; ++t) {
        Rng layer_rng = root.fork(100 + static_cast<std::uint64_t>(t));
        m.encoder.push_back(
            EncoderLayerParams::init(config.channels, config.ffn_width, config.heads, layer_rng));
    }
    {
        Rng lvl_rng = root.fork(2);
        m.level_embed = Tensor::zeros({config.level_count(), config.channels});
        double* d = m.level_embed.mutable_data();
        for (int i = 0; i < m.level_embed.size(); ++i) d[i] = lvl_rng.normal() * 0.02;
    }
    if (config.embedding != EmbeddingMode::None) {
        Rng emb_rng = root.fork(3);
        int table = 0;
        for (const LevelShape& s : config.level_shapes()) table = std::max({table, s.h, s.w});
        m.background = BackgroundEmbedding::init(config.embedding == EmbeddingMode::Relative
                                                     ? EmbeddingVariant::Relative
                                                     : EmbeddingVariant::Absolute,
                                                 table, config.channels, emb_rng);
    }
    {
        Rng fuse_rng = root.fork(4);
        m.fusion = FusionParams::init(config.channels, config.fusion_blocks, config.fusion_groups,
                                      config.gate_reduction, fuse_rng);
    }
    return m;
}

std::vector<std::pair<std::string, Tensor*>> Model::named_tensors() {
    std::vector<std::pair<std::string, Tensor*>> out;
    out.emplace_back("predictor.w1", &predictor.w1);
    out.emplace_back("predictor.b1", &predictor.b1);
    out.emplace_back("predictor.w2", &predictor.w2);
    out.emplace_back("predictor.b2", &predictor.b2);
    if (predictor.alphas.defined()) out.emplace_back("predictor.alphas", &predictor.alphas);
    for (std::size_t t = 0; t < encoder.size(); ++t) {
        const std::string base = "encoder." + std::to_string(t) + ".";
        EncoderLayerParams& e = encoder[t];
        out.emplace_back(base + "wq", &e.wq);
        out.emplace_back(base + "bq", &e.bq);
        out.emplace_back(base + "wk", &e.wk);
        out.emplace_back(base + "bk", &e.bk);
        out.emplace_back(base + "wv", &e.wv);
        out.emplace_back(base + "bv", &e.bv);
        out.emplace_back(base + "wo", &e.wo);
        out.emplace_back(base + "bo", &e.bo);
        out.emplace_back(base + "ffn_w1", &e.ffn_w1);
        out.emplace_back(base + "ffn_b1", &e.ffn_b1);
        out.emplace_back(base + "ffn_w2", &e.ffn_w2);
        out.emplace_back(base + "ffn_b2", &e.ffn_b2);
    }
    out.emplace_back("level_embed", &level_embed);
    if (config.embedding != EmbeddingMode::None) {
        out.emplace_back("background.rows", &background.rows);
        out.emplace_back("background.cols", &background.cols);
    }
    out.emplace_back("fusion.entry", &fusion.entry_kernel);
    out.emplace_back("fusion.residual", &fusion.residual_kernel);
    for (std::size_t b = 0; b < fusion.blocks.size(); ++b) {
        const std::string base = "fusion.block." + std::to_string(b) + ".";
        BlockParams& blk = fusion.blocks[b];
        out.emplace_back(base + "k3", &blk.k3);
        out.emplace_back(base + "k1", &blk.k1);
        out.emplace_back(base + "aff3_scale", &blk.aff3_scale);
        out.emplace_back(base + "aff3_shift", &blk.aff3_shift);
        out.emplace_back(base + "aff1_scale", &blk.aff1_scale);
        out.emplace_back(base + "aff1_shift", &blk.aff1_shift);
        out.emplace_back(base + "alpha", &blk.alpha_raw);
        out.emplace_back(base + "gate_w1", &blk.gate_w1);
        out.emplace_back(base + "gate_b1", &blk.gate_b1);
        out.emplace_back(base + "gate_w2", &blk.gate_w2);
        out.emplace_back(base + "gate_b2", &blk.gate_b2);
    }
    return out;
}

}  // namespace salenc
