#include "salenc/predictor.hpp"

#include <cmath>
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

PredictorParams PredictorParams::init(int channels, int hidden, int levels, Rng& rng) {
    if (channels < 1 || hidden < 1) throw ConfigError("predictor: channel widths must be positive");
    if (levels < 1) throw ConfigError("predictor: need at least one level");
    PredictorParams p;
    p.w1 = randn({channels, hidden}, 1.0 / std::sqrt(static_cast<double>(channels)), rng);
    p.b1 = Tensor::zeros({1, hidden});
    p.w2 = randn({hidden, 1}, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
    p.b2 = Tensor::zeros({1, 1});
    if (levels > 1) p.alphas = Tensor::full({1, levels - 1}, 1.0);
    return p;
}

std::vector<Tensor*> PredictorParams::tensors() {
    std::vector<Tensor*> out = {&w1, &b1, &w2, &b2};
    if (alphas.defined()) out.push_back(&alphas);
    return out;
}

void PredictorParams::validate(int channels, int levels) const {
    if (!w1.defined() || w1.rank() != 2 || w1.dim(0) != channels)
        throw ConfigError("predictor: first layer expects " + std::to_string(channels) +
                          " input channels, weights are " +
                          (w1.defined() ? format_shape(w1.shape()) : std::string("undefined")));
    const int hidden = w1.dim(1);
    if (b1.size() != hidden || w2.dim(0) != hidden || w2.dim(1) != 1 || b2.size() != 1)
        throw ConfigError("predictor: inconsistent scorer parameter shapes");
    if (levels > 1 && (!alphas.defined() || alphas.size() != levels - 1))
        throw ConfigError("predictor: need " + std::to_string(levels - 1) +
                          " modulation coefficients");
}

namespace {

Tensor score_map(const Tensor& features, const PredictorParams& p) {
    const int h = features.dim(1), w = features.dim(2);
    Tensor rows = channels_to_rows(features);                       // {HW, C}
    Tensor hid = relu(add_rowvec(matmul(rows, p.w1), p.b1));        // {HW, hidden}
    Tensor logits = add_rowvec(matmul(hid, p.w2), p.b2);            // {HW, 1}
    return sigmoid(rows_to_channels(logits, h, w));                 // {1, H, W}
}

}  // namespace

std::vector<Tensor> predict_salience(const FeaturePyramid& pyramid,
                                     const PredictorParams& params) {
    const int levels = pyramid.level_count();
    if (levels < 1) throw ContractError("predict_salience: empty pyramid");
    const int channels = pyramid.levels[0].dim(0);
    pyramid.validate(channels);
    params.validate(channels, levels);

    std::vector<Tensor> scores(static_cast<std::size_t>(levels));
    scores[static_cast<std::size_t>(levels - 1)] =
        score_map(pyramid.levels[static_cast<std::size_t>(levels - 1)], params);
    for (int l = levels - 2; l >= 0; --l) {
        const Tensor& f = pyramid.levels[static_cast<std::size_t>(l)];
        Tensor alpha = slice_cols(params.alphas, l, 1);
        Tensor scaled = mul_scalar_t(scores[static_cast<std::size_t>(l + 1)], alpha);
        Tensor up = bilinear_resize(scaled, f.dim(1), f.dim(2));
        Tensor modulated = mul_by_map(f, affine_const(up, 1.0, 1.0));
        scores[static_cast<std::size_t>(l)] = score_map(modulated, params);
    }
    return scores;
}

}  // namespace salenc
