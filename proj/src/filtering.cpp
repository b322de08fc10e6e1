#include "salenc/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "salenc/ops.hpp"

namespace salenc {

void FilterRatios::validate(int levels, int layers) const {
    if (static_cast<int>(level_ratios.size()) != levels)
        throw ConfigError("filter ratios: " + std::to_string(level_ratios.size()) +
                          " level ratios for " + std::to_string(levels) + " levels");
    if (static_cast<int>(layer_ratios.size()) != layers)
        throw ConfigError("filter ratios: " + std::to_string(layer_ratios.size()) +
                          " layer ratios for " + std::to_string(layers) + " layers");
    for (double v : level_ratios)
        if (!(v >= 0.0 && v <= 1.0))
            throw ConfigError("filter ratios: level ratio " + std::to_string(v) +
                              " outside [0,1]");
    for (double w : layer_ratios)
        if (!(w >= 0.0 && w <= 1.0))
            throw ConfigError("filter ratios: layer ratio " + std::to_string(w) +
                              " outside [0,1]");
}

namespace {

int keep_count(double v, double w, int cells) {
    if (v <= 0.0 || w <= 0.0 || cells == 0) return 0;
    const double x = v * w * static_cast<double>(cells);
    // tolerate float noise just above an integer product
    int k = static_cast<int>(std::ceil(x - 1e-9));
    if (k < 1) k = 1;
    if (k > cells) k = cells;
    return k;
}

}  // namespace

FilterPlan select_queries(const std::vector<Tensor>& salience_maps,
                          const std::vector<int>& strides, const FilterRatios& ratios) {
    const int levels = static_cast<int>(salience_maps.size());
    const int layers = static_cast<int>(ratios.layer_ratios.size());
    ratios.validate(levels, layers);
    if (strides.size() != salience_maps.size())
        throw ConfigError("select_queries: " + std::to_string(strides.size()) + " strides for " +
                          std::to_string(levels) + " levels");

    FilterPlan plan;
    plan.strides = strides;
    plan.ratios = ratios;
    for (const Tensor& m : salience_maps) {
        if (m.rank() != 3 || m.dim(0) != 1)
            throw ShapeError("select_queries: salience map has shape " + format_shape(m.shape()) +
                             ", expected {1,H,W}");
        plan.shapes.push_back({m.dim(1), m.dim(2)});
    }
    const std::vector<int> offsets = level_offsets(plan.shapes);

    // one descending (value, then lower index) order per level; every layer's
    // top-k is a prefix of it, which makes smaller layer ratios select subsets
    std::vector<std::vector<int>> order(static_cast<std::size_t>(levels));
    for (int l = 0; l < levels; ++l) {
        const int n = plan.shapes[static_cast<std::size_t>(l)].cells();
        auto& ord = order[static_cast<std::size_t>(l)];
        ord.resize(static_cast<std::size_t>(n));
        std::iota(ord.begin(), ord.end(), 0);
        const auto& vals = salience_maps[static_cast<std::size_t>(l)].data();
        std::sort(ord.begin(), ord.end(), [&](int a, int b) {
            if (vals[static_cast<std::size_t>(a)] != vals[static_cast<std::size_t>(b)])
                return vals[static_cast<std::size_t>(a)] > vals[static_cast<std::size_t>(b)];
            return a < b;
        });
    }

    plan.per_level.resize(static_cast<std::size_t>(layers));
    plan.omega.resize(static_cast<std::size_t>(layers));
    for (int t = 0; t < layers; ++t) {
        auto& level_lists = plan.per_level[static_cast<std::size_t>(t)];
        level_lists.resize(static_cast<std::size_t>(levels));
        for (int l = 0; l < levels; ++l) {
            const int k = keep_count(ratios.level_ratios[static_cast<std::size_t>(l)],
                                     ratios.layer_ratios[static_cast<std::size_t>(t)],
                                     plan.shapes[static_cast<std::size_t>(l)].cells());
            auto& sel = level_lists[static_cast<std::size_t>(l)];
            sel.assign(order[static_cast<std::size_t>(l)].begin(),
                       order[static_cast<std::size_t>(l)].begin() + k);
            std::sort(sel.begin(), sel.end());
            for (int idx : sel)
                plan.omega[static_cast<std::size_t>(t)].push_back(offsets[static_cast<std::size_t>(l)] + idx);
        }
    }
    return plan;
}

EncoderLayerParams EncoderLayerParams::init(int channels, int ffn_width, int heads, Rng& rng) {
    if (channels < 1 || ffn_width < 1) throw ConfigError("encoder layer: widths must be positive");
    if (heads < 1 || channels % heads != 0)
        throw ConfigError("encoder layer: " + std::to_string(channels) +
                          " channels not divisible into " + std::to_string(heads) + " heads");
    auto randn = [&rng](std::vector<int> shape, double scale) {
        Tensor t = Tensor::zeros(std::move(shape));
        double* d = t.mutable_data();
        for (int i = 0; i < t.size(); ++i) d[i] = rng.normal() * scale;
        return t;
    };
    const double s = 1.0 / std::sqrt(static_cast<double>(channels));
    EncoderLayerParams p;
    p.heads = heads;
    p.wq = randn({channels, channels}, s);
    p.bq = Tensor::zeros({1, channels});
    p.wk = randn({channels, channels}, s);
    p.bk = Tensor::zeros({1, channels});
    p.wv = randn({channels, channels}, s);
    p.bv = Tensor::zeros({1, channels});
    p.wo = randn({channels, channels}, s);
    p.bo = Tensor::zeros({1, channels});
    p.ffn_w1 = randn({channels, ffn_width}, s);
    p.ffn_b1 = Tensor::zeros({1, ffn_width});
    p.ffn_w2 = randn({ffn_width, channels}, 1.0 / std::sqrt(static_cast<double>(ffn_width)));
    p.ffn_b2 = Tensor::zeros({1, channels});
    return p;
}

std::vector<Tensor*> EncoderLayerParams::tensors() {
    return {&wq, &bq, &wk, &bk, &wv, &bv, &wo, &bo, &ffn_w1, &ffn_b1, &ffn_w2, &ffn_b2};
}

void EncoderLayerParams::validate(int channels) const {
    auto square = [&](const Tensor& t, const char* name) {
        if (!t.defined() || t.rank() != 2 || t.dim(0) != channels || t.dim(1) != channels)
            throw ConfigError(std::string("encoder layer: ") + name + " must be {" +
                              std::to_string(channels) + "," + std::to_string(channels) + "}");
    };
    square(wq, "wq");
    square(wk, "wk");
    square(wv, "wv");
    square(wo, "wo");
    if (heads < 1 || channels % heads != 0)
        throw ConfigError("encoder layer: head count does not divide channels");
    if (bq.size() != channels || bk.size() != channels || bv.size() != channels ||
        bo.size() != channels || ffn_b2.size() != channels)
        throw ConfigError("encoder layer: bias widths do not match channels");
    if (ffn_w1.dim(0) != channels || ffn_w1.dim(1) != ffn_b1.size() ||
        ffn_w2.dim(0) != ffn_w1.dim(1) || ffn_w2.dim(1) != channels)
        throw ConfigError("encoder layer: feed-forward shapes inconsistent");
}

Tensor selective_encoder_layer(const Tensor& queries, const Tensor& positions,
                               const std::vector<int>& omega, const EncoderLayerParams& params) {
    if (queries.rank() != 2)
        throw ShapeError("selective_encoder_layer: queries must be {N,C}, got " +
                         format_shape(queries.shape()));
    const int n = queries.dim(0), c = queries.dim(1);
    params.validate(c);
    if (positions.rank() != 2 || positions.dim(0) != n || positions.dim(1) != c)
        throw ShapeError("selective_encoder_layer: positions " + format_shape(positions.shape()) +
                         " do not match queries " + format_shape(queries.shape()));
    for (int idx : omega)
        if (idx < 0 || idx >= n)
            throw ContractError("selective_encoder_layer: selected index " + std::to_string(idx) +
                                " out of bounds for " + std::to_string(n) + " queries");
    if (omega.empty()) return queries;

    const int dh = c / params.heads;
    Tensor with_pos = add(queries, positions);
    Tensor sel = gather_rows(with_pos, omega);                            // {k,C}
    Tensor q_all = add_rowvec(matmul(sel, params.wq), params.bq);         // {k,C}
    Tensor k_all = add_rowvec(matmul(with_pos, params.wk), params.bk);    // {N,C}
    Tensor v_all = add_rowvec(matmul(queries, params.wv), params.bv);     // {N,C}

    std::vector<Tensor> head_ctx;
    head_ctx.reserve(static_cast<std::size_t>(params.heads));
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int h = 0; h < params.heads; ++h) {
        Tensor qh = slice_cols(q_all, h * dh, dh);
        Tensor kh = slice_cols(k_all, h * dh, dh);
        Tensor vh = slice_cols(v_all, h * dh, dh);
        Tensor logits = affine_const(matmul(qh, transpose(kh)), scale, 0.0);  // {k,N}
        head_ctx.push_back(matmul(softmax_rows(logits), vh));                 // {k,dh}
    }
    Tensor ctx = concat_cols(std::span<const Tensor>(head_ctx.data(), head_ctx.size()));
    Tensor attn_out = add_rowvec(matmul(ctx, params.wo), params.bo);

    Tensor sel_q = gather_rows(queries, omega);
    Tensor after_attn = add(sel_q, attn_out);
    Tensor hidden = relu(add_rowvec(matmul(after_attn, params.ffn_w1), params.ffn_b1));
    Tensor ffn_out = add_rowvec(matmul(hidden, params.ffn_w2), params.ffn_b2);
    Tensor updated = add(after_attn, ffn_out);

    return scatter_rows(queries, omega, updated);
}

Tensor sinusoidal_positions(const std::vector<LevelShape>& shapes, int channels) {
    if (channels < 4 || channels % 4 != 0)
        throw ConfigError("sinusoidal positions: channels must be a positive multiple of 4");
    const int n = total_cells(shapes);
    Tensor out = Tensor::zeros({n, channels});
    double* d = out.mutable_data();
    const int half = channels / 2;
    const double temperature = 10000.0;
    int row = 0;
    for (const LevelShape& s : shapes) {
        for (int i = 0; i < s.h; ++i)
            for (int j = 0; j < s.w; ++j, ++row) {
                // normalized cell centers, so encodings align across levels
                const double yi = (i + 0.5) / static_cast<double>(s.h) * 2.0 * 3.14159265358979323846;
                const double xj = (j + 0.5) / static_cast<double>(s.w) * 2.0 * 3.14159265358979323846;
                for (int k = 0; k < half / 2; ++k) {
                    const double freq = std::pow(temperature, 2.0 * k / static_cast<double>(half));
                    d[row * channels + 2 * k] = std::sin(yi / freq);
                    d[row * channels + 2 * k + 1] = std::cos(yi / freq);
                    d[row * channels + half + 2 * k] = std::sin(xj / freq);
                    d[row * channels + half + 2 * k + 1] = std::cos(xj / freq);
                }
            }
    }
    return out;
}

CostBreakdown analytic_cost(const std::vector<LevelShape>& shapes, const FilterRatios& ratios,
                            int channels, int heads, int sample_points) {
    ratios.validate(static_cast<int>(shapes.size()), static_cast<int>(ratios.layer_ratios.size()));
    if (channels < 1 || heads < 1 || sample_points < 1)
        throw ConfigError("analytic_cost: dimensions must be positive");
    const double c = channels, m = heads, k = sample_points;
    const double factor = c * (c + k * c + 5.0 * k + 3.0 * m * k);
    const double layers = static_cast<double>(ratios.layer_ratios.size());
    CostBreakdown out;
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        const double cells = static_cast<double>(shapes[l].cells());
        out.dense_ops += cells * layers * factor;
        for (double w : ratios.layer_ratios)
            out.filtered_ops += ratios.level_ratios[l] * w * cells * factor;
    }
    return out;
}

KeepRatio measured_keep_ratio(const FilterPlan& plan) {
    const int layers = plan.layer_count();
    if (layers == 0) throw ContractError("measured_keep_ratio: empty plan");
    const int total = total_cells(plan.shapes);
    long long selected = 0;
    for (const auto& levels : plan.per_level)
        for (const auto& sel : levels) selected += static_cast<long long>(sel.size());
    KeepRatio out;
    out.counted = static_cast<double>(selected) /
                  (static_cast<double>(layers) * static_cast<double>(total));
    double w_sum = 0.0;
    for (double w : plan.ratios.layer_ratios) w_sum += w;
    double vs2 = 0.0, s2 = 0.0;
    for (std::size_t l = 0; l < plan.strides.size(); ++l) {
        const double s = static_cast<double>(plan.strides[l]);
        vs2 += plan.ratios.level_ratios[l] * s * s;
        s2 += s * s;
    }
    out.closed_form = (w_sum / static_cast<double>(layers)) * (vs2 / s2);
    return out;
}

}  // namespace salenc
