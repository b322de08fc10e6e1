#pragma once

#include <span>
#include <vector>

#include "salenc/tensor.hpp"

namespace salenc {

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// k*a + c
Tensor affine_const(const Tensor& a, double k, double c);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log(const Tensor& a);
Tensor pow_const(const Tensor& a, double p);
// clamp to [lo, hi]; gradient passes through on the closed interval
Tensor clamp(const Tensor& a, double lo, double hi);
// a * s where s has a single element; gradients flow into both
Tensor mul_scalar_t(const Tensor& a, const Tensor& s);

// ---------------------------------------------------------------------------
// Matrix ops (rank-2 tensors)
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor slice_cols(const Tensor& a, int start, int count);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor gather_rows(const Tensor& a, const std::vector<int>& idx);
// copy of `base` with base[idx[r]] = rows[r]; indices must be unique;
// untouched rows are byte-for-byte copies of base
Tensor scatter_rows(const Tensor& base, const std::vector<int>& idx, const Tensor& rows);
// mat {n,m} + row {1,m} broadcast over rows
Tensor add_rowvec(const Tensor& mat, const Tensor& row);
Tensor softmax_rows(const Tensor& a);

// ---------------------------------------------------------------------------
// Reductions / reshaping
// ---------------------------------------------------------------------------

Tensor sum_all(const Tensor& a);   // {1}
Tensor mean_all(const Tensor& a);  // {1}
Tensor reshape(const Tensor& a, std::vector<int> shape);

// ---------------------------------------------------------------------------
// Map/channel ops (rank-3 tensors {C,H,W})
// ---------------------------------------------------------------------------

// grouped 2-D cross-correlation, zero-padded to preserve H x W;
// kernels {C_out, C/g, kh, kw} with kh, kw odd
Tensor grouped_conv2d(const Tensor& input, const Tensor& kernels, int groups);
// per-channel y = x*scale[c] + shift[c]; scale/shift {1,C} or {C}
Tensor channel_affine(const Tensor& x, const Tensor& scale, const Tensor& shift);
// align-corners-false bilinear sampling
Tensor bilinear_resize(const Tensor& x, int out_h, int out_w);
Tensor channels_to_rows(const Tensor& x);              // {C,H,W} -> {H*W,C}
Tensor rows_to_channels(const Tensor& x, int h, int w);  // {H*W,C} -> {C,H,W}
Tensor mul_by_map(const Tensor& x, const Tensor& m);   // {C,H,W} * {1,H,W}
Tensor mul_channels(const Tensor& x, const Tensor& gate);  // {C,H,W} * {1,C}
Tensor spatial_mean(const Tensor& x);                  // {C,H,W} -> {1,C}
Tensor concat_channels(std::span<const Tensor> parts);  // {Ci,H,W} -> {sum Ci,H,W}
Tensor concat_channels(const Tensor& a, const Tensor& b);

}  // namespace salenc
