#pragma once

#include <vector>

#include "salenc/filtering.hpp"
#include "salenc/geometry.hpp"
#include "salenc/pyramid.hpp"
#include "salenc/tensor.hpp"

namespace salenc {

enum class EmbeddingVariant { Relative, Absolute };

// learned row/column embeddings shared across levels; the relative variant
// keeps m = C channels per table, the absolute variant m = C/2 so that a
// row||column concatenation spans C
struct BackgroundEmbedding {
    EmbeddingVariant variant = EmbeddingVariant::Relative;
    Tensor rows;  // {n, m}
    Tensor cols;  // {n, m}

    int table_size() const { return rows.defined() ? rows.dim(0) : 0; }
    static BackgroundEmbedding init(EmbeddingVariant variant, int table_size, int channels,
                                    Rng& rng);
    std::vector<Tensor*> tensors();
};

// channel k is the outer product rows[.,k] x cols[.,k] resized to H x W
Tensor relative_background_embedding(const BackgroundEmbedding& emb, int h, int w);

// rows[i] || cols[j], shape {1, 2m}
Tensor absolute_background_embedding(const BackgroundEmbedding& emb, const GridPos& pos);

// one embedding row per flat query position, {N, C}
Tensor assemble_background_rows(const BackgroundEmbedding& emb,
                                const std::vector<LevelShape>& shapes);

// adds the embedding to every row outside the final layer's selection;
// selected rows come back bitwise unchanged
Tensor apply_background_embedding(const Tensor& queries, const FilterPlan& plan,
                                  const BackgroundEmbedding& emb);

// one fusion block: blended grouped 3x3/1x1 convolutions, relu, a
// squeeze-excite channel gate, and a residual connection
struct BlockParams {
    int groups = 1;
    Tensor k3;                       // {C, C/g, 3, 3}
    Tensor k1;                       // {C, C/g, 1, 1}
    Tensor aff3_scale, aff3_shift;   // {1, C}
    Tensor aff1_scale, aff1_shift;   // {1, C}
    Tensor alpha_raw;                // {1}, clamped to [0,1] in the forward
    Tensor gate_w1, gate_b1;         // {C, C/r} / {1, C/r}
    Tensor gate_w2, gate_b2;         // {C/r, C} / {1, C}

    static BlockParams init(int channels, int groups, int gate_reduction, Rng& rng);
    std::vector<Tensor*> tensors();
    void validate(int channels) const;
};

Tensor repvgg_plux_block(const Tensor& f_in, const BlockParams& params);

struct FusionParams {
    std::vector<BlockParams> blocks;
    Tensor entry_kernel;     // {C, 2C, 1, 1}
    Tensor residual_kernel;  // {C, 2C, 1, 1}

    static FusionParams init(int channels, int block_count, int groups, int gate_reduction,
                             Rng& rng);
    std::vector<Tensor*> tensors();
    void validate(int channels) const;
};

// entry: 1x1 conv over concat(f_low, upsample(f_high)) then the block chain;
// a 1x1 conv of the same concatenation joins as a residual branch
Tensor cross_level_fuse(const Tensor& f_low, const Tensor& f_high, const FusionParams& params);

enum class RedundancyMode { LevelWise, ImageWise, Both };

struct Selection {
    GridPos pos;
    double score = 0.0;
};

// suppresses near-duplicate selections with unit boxes: level-wise in grid
// index units per level, image-wise after mapping centers through the stride
// grid with half-size = stride; output preserves input order (a subset)
std::vector<Selection> remove_redundancy(const std::vector<Selection>& selected,
                                         double iou_threshold, RedundancyMode mode,
                                         const std::vector<int>& strides);

}  // namespace salenc
