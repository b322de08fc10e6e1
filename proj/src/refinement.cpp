#include "salenc/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "salenc/ops.hpp"

namespace salenc {

namespace {

Tensor randn(std::vector<int> shape, double scale, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    double* d = t.mutable_data();
    for (int i = 0; i < t.size(); ++i) d[i] = rng.normal() * scale;
    return t;
}

}  // namespace

BackgroundEmbedding BackgroundEmbedding::init(EmbeddingVariant variant, int table_size,
                                              int channels, Rng& rng) {
    if (table_size < 1) throw ConfigError("background embedding: table size must be positive");
    int m = channels;
    if (variant == EmbeddingVariant::Absolute) {
        if (channels % 2 != 0)
            throw ConfigError("background embedding: absolute variant needs even channels, got " +
                              std::to_string(channels));
        m = channels / 2;
    }
    BackgroundEmbedding emb;
    emb.variant = variant;
    emb.rows = randn({table_size, m}, 0.02, rng);
    emb.cols = randn({table_size, m}, 0.02, rng);
    return emb;
}

std::vector<Tensor*> BackgroundEmbedding::tensors() { return {&rows, &cols}; }

Tensor relative_background_embedding(const BackgroundEmbedding& emb, int h, int w) {
    if (emb.variant != EmbeddingVariant::Relative)
        throw ContractError("relative_background_embedding: embedding is not the relative variant");
    const int n = emb.rows.dim(0), m = emb.rows.dim(1);
    std::vector<Tensor> channels;
    channels.reserve(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
        Tensor rk = slice_cols(emb.rows, k, 1);                       // {n,1}
        Tensor ck = slice_cols(emb.cols, k, 1);                       // {n,1}
        channels.push_back(reshape(matmul(rk, transpose(ck)), {1, n, n}));
    }
    Tensor stacked = concat_channels(std::span<const Tensor>(channels.data(), channels.size()));
    return bilinear_resize(stacked, h, w);
}

Tensor absolute_background_embedding(const BackgroundEmbedding& emb, const GridPos& pos) {
    if (emb.variant != EmbeddingVariant::Absolute)
        throw ContractError("absolute_background_embedding: embedding is not the absolute variant");
    const int n = emb.rows.dim(0);
    if (pos.i < 0 || pos.j < 0 || pos.i >= n || pos.j >= n)
        throw ContractError("absolute_background_embedding: position (" + std::to_string(pos.i) +
                            "," + std::to_string(pos.j) + ") outside table of size " +
                            std::to_string(n));
    Tensor r = gather_rows(emb.rows, {pos.i});
    Tensor c = gather_rows(emb.cols, {pos.j});
    const Tensor parts[] = {r, c};
    return concat_cols(std::span<const Tensor>(parts, 2));
}

Tensor assemble_background_rows(const BackgroundEmbedding& emb,
                                const std::vector<LevelShape>& shapes) {
    if (shapes.empty()) throw ContractError("assemble_background_rows: no levels");
    std::vector<Tensor> level_rows;
    level_rows.reserve(shapes.size());
    if (emb.variant == EmbeddingVariant::Relative) {
        for (const LevelShape& s : shapes)
            level_rows.push_back(channels_to_rows(relative_background_embedding(emb, s.h, s.w)));
    } else {
        const int n = emb.rows.dim(0);
        for (const LevelShape& s : shapes) {
            if (s.h > n || s.w > n)
                throw ContractError("assemble_background_rows: table size " + std::to_string(n) +
                                    " smaller than level " + std::to_string(s.h) + "x" +
                                    std::to_string(s.w));
            std::vector<int> ri, ci;
            ri.reserve(static_cast<std::size_t>(s.cells()));
            ci.reserve(static_cast<std::size_t>(s.cells()));
            for (int i = 0; i < s.h; ++i)
                for (int j = 0; j < s.w; ++j) {
                    ri.push_back(i);
                    ci.push_back(j);
                }
            Tensor r = gather_rows(emb.rows, ri);
            Tensor c = gather_rows(emb.cols, ci);
            const Tensor parts[] = {r, c};
            level_rows.push_back(concat_cols(std::span<const Tensor>(parts, 2)));
        }
    }
    return concat_rows(std::span<const Tensor>(level_rows.data(), level_rows.size()));
}

Tensor apply_background_embedding(const Tensor& queries, const FilterPlan& plan,
                                  const BackgroundEmbedding& emb) {
    if (queries.rank() != 2)
        throw ShapeError("apply_background_embedding: queries must be {N,C}, got " +
                         format_shape(queries.shape()));
    const int n = queries.dim(0);
    if (plan.omega.empty()) throw ContractError("apply_background_embedding: plan has no layers");
    if (total_cells(plan.shapes) != n)
        throw ShapeError("apply_background_embedding: plan covers " +
                         std::to_string(total_cells(plan.shapes)) + " positions, queries have " +
                         std::to_string(n));
    const std::vector<int>& final_sel = plan.omega.back();
    std::vector<char> selected(static_cast<std::size_t>(n), 0);
    for (int idx : final_sel) selected[static_cast<std::size_t>(idx)] = 1;
    std::vector<int> unselected;
    unselected.reserve(static_cast<std::size_t>(n) - final_sel.size());
    for (int i = 0; i < n; ++i)
        if (!selected[static_cast<std::size_t>(i)]) unselected.push_back(i);
    if (unselected.empty()) return queries;

    Tensor emb_rows = assemble_background_rows(emb, plan.shapes);
    if (emb_rows.dim(1) != queries.dim(1))
        throw ShapeError("apply_background_embedding: embedding width " +
                         std::to_string(emb_rows.dim(1)) + " vs query width " +
                         std::to_string(queries.dim(1)));
    Tensor shifted = add(gather_rows(queries, unselected), gather_rows(emb_rows, unselected));
    return scatter_rows(queries, unselected, shifted);
}

BlockParams BlockParams::init(int channels, int groups, int gate_reduction, Rng& rng) {
    if (channels < 1 || groups < 1 || channels % groups != 0)
        throw ConfigError("fusion block: " + std::to_string(channels) +
                          " channels not divisible by " + std::to_string(groups) + " groups");
    if (gate_reduction < 1 || channels % gate_reduction != 0)
        throw ConfigError("fusion block: gate reduction " + std::to_string(gate_reduction) +
                          " does not divide " + std::to_string(channels) + " channels");
    const int cg = channels / groups;
    const int hidden = channels / gate_reduction;
    BlockParams p;
    p.groups = groups;
    p.k3 = randn({channels, cg, 3, 3}, 1.0 / std::sqrt(9.0 * cg), rng);
    p.k1 = randn({channels, cg, 1, 1}, 1.0 / std::sqrt(static_cast<double>(cg)), rng);
    p.aff3_scale = Tensor::full({1, channels}, 1.0);
    p.aff3_shift = Tensor::zeros({1, channels});
    p.aff1_scale = Tensor::full({1, channels}, 1.0);
    p.aff1_shift = Tensor::zeros({1, channels});
    p.alpha_raw = Tensor::full({1}, 0.5);
    p.gate_w1 = randn({channels, hidden}, 1.0 / std::sqrt(static_cast<double>(channels)), rng);
    p.gate_b1 = Tensor::zeros({1, hidden});
    p.gate_w2 = randn({hidden, channels}, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
    p.gate_b2 = Tensor::zeros({1, channels});
    return p;
}

std::vector<Tensor*> BlockParams::tensors() {
    return {&k3, &k1, &aff3_scale, &aff3_shift, &aff1_scale, &aff1_shift,
            &alpha_raw, &gate_w1, &gate_b1, &gate_w2, &gate_b2};
}

void BlockParams::validate(int channels) const {
    if (!k3.defined() || k3.rank() != 4 || k3.dim(0) != channels)
        throw ConfigError("fusion block: 3x3 kernel does not produce " + std::to_string(channels) +
                          " channels");
    if (!k1.defined() || k1.rank() != 4 || k1.dim(0) != channels || k1.dim(2) != 1 ||
        k1.dim(3) != 1)
        throw ConfigError("fusion block: 1x1 kernel has shape " + format_shape(k1.shape()));
    if (groups < 1 || channels % groups != 0 || k3.dim(1) != channels / groups ||
        k1.dim(1) != channels / groups)
        throw ConfigError("fusion block: kernels inconsistent with " + std::to_string(groups) +
                          " groups");
    if (aff3_scale.size() != channels || aff3_shift.size() != channels ||
        aff1_scale.size() != channels || aff1_shift.size() != channels)
        throw ConfigError("fusion block: affine widths do not match channels");
    if (!alpha_raw.defined() || alpha_raw.size() != 1)
        throw ConfigError("fusion block: blend coefficient must be a single value");
    if (gate_w1.dim(0) != channels || gate_b1.size() != gate_w1.dim(1) ||
        gate_w2.dim(0) != gate_w1.dim(1) || gate_w2.dim(1) != channels ||
        gate_b2.size() != channels)
        throw ConfigError("fusion block: gate perceptron shapes inconsistent");
}

Tensor repvgg_plux_block(const Tensor& f_in, const BlockParams& params) {
    if (f_in.rank() != 3)
        throw ShapeError("repvgg_plux_block: input must be {C,H,W}, got " +
                         format_shape(f_in.shape()));
    params.validate(f_in.dim(0));
    Tensor g3 = channel_affine(grouped_conv2d(f_in, params.k3, params.groups),
                               params.aff3_scale, params.aff3_shift);
    Tensor g1 = channel_affine(grouped_conv2d(f_in, params.k1, params.groups),
                               params.aff1_scale, params.aff1_shift);
    Tensor alpha = clamp(params.alpha_raw, 0.0, 1.0);
    Tensor blended = add(mul_scalar_t(g3, alpha), mul_scalar_t(g1, affine_const(alpha, -1.0, 1.0)));
    Tensor f_m = relu(blended);

    Tensor pooled = spatial_mean(f_m);  // {1,C}
    Tensor gate = sigmoid(add_rowvec(
        matmul(relu(add_rowvec(matmul(pooled, params.gate_w1), params.gate_b1)), params.gate_w2),
        params.gate_b2));
    return add(mul_channels(f_m, gate), f_in);
}

FusionParams FusionParams::init(int channels, int block_count, int groups, int gate_reduction,
                                Rng& rng) {
    if (block_count < 0) throw ConfigError("fusion: block count must be >= 0");
    FusionParams p;
    for (int i = 0; i < block_count; ++i)
        p.blocks.push_back(BlockParams::init(channels, groups, gate_reduction, rng));
    const double s = 1.0 / std::sqrt(2.0 * channels);
    p.entry_kernel = randn({channels, 2 * channels, 1, 1}, s, rng);
    p.residual_kernel = randn({channels, 2 * channels, 1, 1}, s, rng);
    return p;
}

std::vector<Tensor*> FusionParams::tensors() {
    std::vector<Tensor*> out = {&entry_kernel, &residual_kernel};
    for (BlockParams& b : blocks)
        for (Tensor* t : b.tensors()) out.push_back(t);
    return out;
}

void FusionParams::validate(int channels) const {
    auto entry = [&](const Tensor& t, const char* name) {
        if (!t.defined() || t.rank() != 4 || t.dim(0) != channels || t.dim(1) != 2 * channels ||
            t.dim(2) != 1 || t.dim(3) != 1)
            throw ConfigError(std::string("fusion: ") + name + " must be {" +
                              std::to_string(channels) + "," + std::to_string(2 * channels) +
                              ",1,1}");
    };
    entry(entry_kernel, "entry kernel");
    entry(residual_kernel, "residual kernel");
    for (const BlockParams& b : blocks) b.validate(channels);
}

Tensor cross_level_fuse(const Tensor& f_low, const Tensor& f_high, const FusionParams& params) {
    if (f_low.rank() != 3 || f_high.rank() != 3)
        throw ShapeError("cross_level_fuse: inputs must be {C,H,W}");
    const int c = f_low.dim(0), h = f_low.dim(1), w = f_low.dim(2);
    if (f_high.dim(0) != c)
        throw ContractError("cross_level_fuse: channel mismatch " + format_shape(f_low.shape()) +
                            " vs " + format_shape(f_high.shape()));
    auto half_ok = [](int fine, int coarse) { return coarse == (fine + 1) / 2 || coarse == fine / 2; };
    if (!half_ok(h, f_high.dim(1)) || !half_ok(w, f_high.dim(2)))
        throw ContractError("cross_level_fuse: " + format_shape(f_high.shape()) +
                            " is not the half-resolution partner of " +
                            format_shape(f_low.shape()));
    params.validate(c);

    Tensor cat = concat_channels(f_low, bilinear_resize(f_high, h, w));
    Tensor x = grouped_conv2d(cat, params.entry_kernel, 1);
    for (const BlockParams& b : params.blocks) x = repvgg_plux_block(x, b);
    return add(x, grouped_conv2d(cat, params.residual_kernel, 1));
}

std::vector<Selection> remove_redundancy(const std::vector<Selection>& selected,
                                         double iou_threshold, RedundancyMode mode,
                                         const std::vector<int>& strides) {
    for (const Selection& s : selected)
        if (!std::isfinite(s.score))
            throw ContractError("remove_redundancy: non-finite score");

    auto level_pass = [&](const std::vector<Selection>& in) {
        std::map<int, std::vector<std::size_t>> by_level;
        for (std::size_t i = 0; i < in.size(); ++i) by_level[in[i].pos.level].push_back(i);
        std::vector<char> keep(in.size(), 0);
        for (const auto& [level, members] : by_level) {
            std::vector<BBox> boxes;
            std::vector<double> scores;
            for (std::size_t i : members) {
                boxes.push_back(unit_box(in[i].pos));
                scores.push_back(in[i].score);
            }
            for (int k : nms(boxes, scores, iou_threshold))
                keep[members[static_cast<std::size_t>(k)]] = 1;
        }
        std::vector<Selection> out;
        for (std::size_t i = 0; i < in.size(); ++i)
            if (keep[i]) out.push_back(in[i]);
        return out;
    };

    auto image_pass = [&](const std::vector<Selection>& in) {
        std::vector<BBox> boxes;
        std::vector<double> scores;
        for (const Selection& s : in) {
            if (s.pos.level < 0 || s.pos.level >= static_cast<int>(strides.size()))
                throw ContractError("remove_redundancy: selection on level " +
                                    std::to_string(s.pos.level) + " but only " +
                                    std::to_string(strides.size()) + " strides given");
            const int stride = strides[static_cast<std::size_t>(s.pos.level)];
            const auto [x, y] = grid_to_image_coords(s.pos, stride);
            BBox b;
            b.cx = x;
            b.cy = y;
            b.w = 2.0 * stride;
            b.h = 2.0 * stride;
            boxes.push_back(b);
            scores.push_back(s.score);
        }
        std::vector<char> keep(in.size(), 0);
        for (int k : nms(boxes, scores, iou_threshold)) keep[static_cast<std::size_t>(k)] = 1;
        std::vector<Selection> out;
        for (std::size_t i = 0; i < in.size(); ++i)
            if (keep[i]) out.push_back(in[i]);
        return out;
    };

    switch (mode) {
        case RedundancyMode::LevelWise:
            return level_pass(selected);
        case RedundancyMode::ImageWise:
            return image_pass(selected);
        case RedundancyMode::Both:
            return image_pass(level_pass(selected));
    }
    throw ContractError("remove_redundancy: unknown mode");
}

}  // namespace salenc
