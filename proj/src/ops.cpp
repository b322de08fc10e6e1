#include "salenc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace salenc {

namespace {

using detail::TensorImpl;
using Impl = std::shared_ptr<detail::TensorImpl>;

Impl make_impl(std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data.assign(n, 0.0);
    return impl;
}

void require_defined(const Tensor& t, const char* op) {
    if (!t.defined()) throw ContractError(std::string(op) + ": empty tensor argument");
}

void require_rank(const Tensor& t, int rank, const char* op) {
    require_defined(t, op);
    if (t.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank-" + std::to_string(rank) +
                         " tensor, got shape " + format_shape(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require_defined(a, op);
    require_defined(b, op);
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + format_shape(a.shape()) +
                         " vs " + format_shape(b.shape()));
    }
}

// true when gradient should be accumulated into this input for the tape
// that is recording right now
bool active_on(const Impl& impl, const Tape* tape) {
    return impl->tape == tape && !impl->grad.empty();
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tape* tape = detail::common_tape({&a, &b});
    auto out = make_impl(a.shape());
    const std::size_t n = out->data.size();
    for (std::size_t i = 0; i < n; ++i) out->data[i] = a.data()[i] + b.data()[i];
    if (tape) {
        Impl ai = a.impl(), bi = b.impl(), oi = out;
        const bool da = active_on(ai, tape), db = active_on(bi, tape);
        tape->record(out, [ai, bi, oi, da, db, n] {
            if (da)
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += oi->grad[i];
            if (db)
                for (std::size_t i = 0; i < n; ++i) bi->grad[i] += oi->grad[i];
        });
    }
    return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tape* tape = detail::common_tape({&a, &b});
    auto out = make_impl(a.shape());
    const std::size_t n = out->data.size();
    for (std::size_t i = 0; i < n; ++i) out->data[i] = a.data()[i] - b.data()[i];
    if (tape) {
        Impl ai = a.impl(), bi = b.impl(), oi = out;
        const bool da = active_on(ai, tape), db = active_on(bi, tape);
        tape->record(out, [ai, bi, oi, da, db, n] {
            if (da)
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += oi->grad[i];
            if (db)
                for (std::size_t i = 0; i < n; ++i) bi->grad[i] -= oi->grad[i];
        });
    }
    return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tape* tape = detail::common_tape({&a, &b});
    auto out = make_impl(a.shape());
    const std::size_t n = out->data.size();
    detail::add_macs(n);
    for (std::size_t i = 0; i < n; ++i) out->data[i] = a.data()[i] * b.data()[i];
    if (tape) {
        Impl ai = a.impl(), bi = b.impl(), oi = out;
        const bool da = active_on(ai, tape), db = active_on(bi, tape);
        tape->record(out, [ai, bi, oi, da, db, n] {
            if (da)
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += oi->grad[i] * bi->data[i];
            if (db)
                for (std::size_t i = 0; i < n; ++i) bi->grad[i] += oi->grad[i] * ai->data[i];
        });
    }
    return Tensor(out);
}

Tensor affine_const(const Tensor& a, double k, double c) {
    require_defined(a, "affine_const");
    Tape* tape = detail::common_tape({&a});
    auto out = make_impl(a.shape());
    const std::size_t n = out->data.size();
    detail::add_macs(n);
    for (std::size_t i = 0; i < n; ++i) out->data[i] = k * a.data()[i] + c;
    if (tape) {
        Impl ai = a.impl(), oi = out;
        const bool da = active_on(ai, tape);
        tape->record(out, [ai, oi, da, k, n] {
            if (da)
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += k * oi->grad[i];
        });
    }
    return Tensor(out);
}

Tensor relu(const Tensor& a) {
    require_defined(a, "relu");
    Tape* tape = detail::common_tape({&a});
    auto out = make_impl(a.shape());
    const std::size_t n = out->data.size();
    for (std::size_t i = 0; i < n; ++i) out->data[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
    if (tape) {
        Impl ai = a.impl(), oi = out;
        const bool da = active_on(ai, tape);
        tape->record(out, [ai, oi, da, n] {
            if (da)
                for (std::size_t i = 0; i < n; ++i)
                    if (ai->data[i] > 0.0) ai->grad[i] += oi->grad[i];
        });
    }
    return Tensor(out);
}

Tensor sigmoid(const Tensor& a) {
    require_defined(a, "sigmoid");
    Tape* tape = detail::common_tape({&a});
    auto out = make_impl(a.shape());
    const std::size_t n = out->data.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a.data()[i];
        // evaluate on the negative side to avoid exp overflow
        out->data[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                : std::exp(x) / (1.0 + std::exp(x));
    }
    if (tape) {
        Impl ai = a.impl(), oi = out;
        const bool da = active_on(ai, tape);
        tape->record(out, [ai, oi, da, n] {
            if (da)
                for (std::size_t i = 0; i < n; ++i) {
                    const double y = oi->data[i];
                    ai->grad[i] += oi->grad[i] * y * (1.0 - y);
                }
        });
    }
    return Tensor(out);
}

Tensor log(const Tensor& a) {
    require_defined(a, "log");
    Tape* tape = detail::common_tape({&a});
    auto out = make_impl(a.shape());
    const std::size_t n = out->data.size();
    for (std::size_t i = 0; i < n; ++i) out->data[i] = std::log(a.data()[i]);
    if (tape) {
        Impl ai = a.impl(), oi = out;
        const bool da = active_on(ai, tape);
        tape->record(out, [ai, oi, da, n] {
            if (da)
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += oi->grad[i] / ai->data[i];
        });
    }
    return Tensor(out);
}

Tensor pow_const(const Tensor& a, double p) {
    require_defined(a, "pow_const");
    Tape* tape = detail::common_tape({&a});
    auto out = make_impl(a.shape());
    const std::size_t n = out->data.size();
    for (std::size_t i = 0; i < n; ++i) out->data[i] = std::pow(a.data()[i], p);
    if (tape) {
        Impl ai = a.impl(), oi = out;
        const bool da = active_on(ai, tape);
        tape->record(out, [ai, oi, da, p, n] {
            if (da && p != 0.0)
                for (std::size_t i = 0; i < n; ++i)
                    ai->grad[i] += oi->grad[i] * p * std::pow(ai->data[i], p - 1.0);
        });
    }
    return Tensor(out);
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    require_defined(a, "clamp");
    if (!(lo <= hi)) throw ContractError("clamp: lo must not exceed hi");
    Tape* tape = detail::common_tape({&a});
    auto out = make_impl(a.shape());
    const std::size_t n = out->data.size();
    for (std::size_t i = 0; i < n; ++i) out->data[i] = std::min(hi, std::max(lo, a.data()[i]));
    if (tape) {
        Impl ai = a.impl(), oi = out;
        const bool da = active_on(ai, tape);
        tape->record(out, [ai, oi, da, lo, hi, n] {
            if (da)
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = ai->data[i];
                    if (x >= lo && x <= hi) ai->grad[i] += oi->grad[i];
                }
        });
    }
    return Tensor(out);
}

Tensor mul_scalar_t(const Tensor& a, const Tensor& s) {
    require_defined(a, "mul_scalar_t");
    require_defined(s, "mul_scalar_t");
    if (s.size() != 1) {
        throw ShapeError("mul_scalar_t: scale must have one element, got shape " +
                         format_shape(s.shape()));
    }
    Tape* tape = detail::common_tape({&a, &s});
    auto out = make_impl(a.shape());
    const std::size_t n = out->data.size();
    const double sv = s.data()[0];
    detail::add_macs(n);
    for (std::size_t i = 0; i < n; ++i) out->data[i] = a.data()[i] * sv;
    if (tape) {
        Impl ai = a.impl(), si = s.impl(), oi = out;
        const bool da = active_on(ai, tape), ds = active_on(si, tape);
        tape->record(out, [ai, si, oi, da, ds, n] {
            const double sv = si->data[0];
            if (da)
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += oi->grad[i] * sv;
            if (ds) {
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) acc += oi->grad[i] * ai->data[i];
                si->grad[0] += acc;
            }
        });
    }
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// Matrix ops
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    if (a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: inner dimensions disagree, " + format_shape(a.shape()) +
                         " x " + format_shape(b.shape()));
    }
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tape* tape = detail::common_tape({&a, &b});
    auto out = make_impl({m, n});
    detail::add_macs(static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(n) *
                     static_cast<std::uint64_t>(k));
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* od = out->data.data();
    for (int i = 0; i < m; ++i) {
        for (int kk = 0; kk < k; ++kk) {
            const double av = ad[i * k + kk];
            if (av == 0.0) continue;
            const double* brow = bd + kk * n;
            double* orow = od + i * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    if (tape) {
        Impl ai = a.impl(), bi = b.impl(), oi = out;
        const bool da = active_on(ai, tape), db = active_on(bi, tape);
        tape->record(out, [ai, bi, oi, da, db, m, k, n] {
            const double* go = oi->grad.data();
            if (da) {
                // dA = dOut * B^T
                double* ga = ai->grad.data();
                const double* bd2 = bi->data.data();
                for (int i = 0; i < m; ++i)
                    for (int kk = 0; kk < k; ++kk) {
                        double acc = 0.0;
                        const double* grow = go + i * n;
                        const double* brow = bd2 + kk * n;
                        for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        ga[i * k + kk] += acc;
                    }
            }
            if (db) {
                // dB = A^T * dOut
                double* gb = bi->grad.data();
                const double* ad2 = ai->data.data();
                for (int kk = 0; kk < k; ++kk)
                    for (int i = 0; i < m; ++i) {
                        const double av = ad2[i * k + kk];
                        if (av == 0.0) continue;
                        const double* grow = go + i * n;
                        double* brow = gb + kk * n;
                        for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
                    }
            }
        });
    }
    return Tensor(out);
}

Tensor transpose(const Tensor& a) {
    require_rank(a, 2, "transpose");
    const int m = a.dim(0), n = a.dim(1);
    Tape* tape = detail::common_tape({&a});
    auto out = make_impl({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out->data[j * m + i] = a.data()[i * n + j];
    if (tape) {
        Impl ai = a.impl(), oi = out;
        const bool da = active_on(ai, tape);
        tape->record(out, [ai, oi, da, m, n] {
            if (da)
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) ai->grad[i * n + j] += oi->grad[j * m + i];
        });
    }
    return Tensor(out);
}

Tensor slice_cols(const Tensor& a, int start, int count) {
    require_rank(a, 2, "slice_cols");
    const int m = a.dim(0), n = a.dim(1);
    if (start < 0 || count <= 0 || start + count > n) {
        throw ContractError("slice_cols: range [" + std::to_string(start) + ", " +
                            std::to_string(start + count) + ") out of bounds for " +
                            format_shape(a.shape()));
    }
    Tape* tape = detail::common_tape({&a});
    auto out = make_impl({m, count});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < count; ++j) out->data[i * count + j] = a.data()[i * n + start + j];
    if (tape) {
        Impl ai = a.impl(), oi = out;
        const bool da = active_on(ai, tape);
        tape->record(out, [ai, oi, da, m, n, start, count] {
            if (da)
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < count; ++j)
                        ai->grad[i * n + start + j] += oi->grad[i * count + j];
        });
    }
    return Tensor(out);
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw ContractError("concat_cols: no tensors given");
    const int m = parts[0].dim(0);
    int total = 0;
    for (const Tensor& p : parts) {
        require_rank(p, 2, "concat_cols");
        if (p.dim(0) != m)
            throw ShapeError("concat_cols: row count mismatch " + format_shape(p.shape()));
        total += p.dim(1);
    }
    Tape* tape = nullptr;
    for (const Tensor& p : parts) {
        Tape* t = detail::common_tape({&p});
        if (t && tape && t != tape) throw ContractError("concat_cols: tensors from different tapes");
        if (t) tape = t;
    }
    auto out = make_impl({m, total});
    int col = 0;
    for (const Tensor& p : parts) {
        const int n = p.dim(1);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) out->data[i * total + col + j] = p.data()[i * n + j];
        col += n;
    }
    if (tape) {
        std::vector<Impl> impls;
        std::vector<bool> active;
        std::vector<int> widths;
        for (const Tensor& p : parts) {
            impls.push_back(p.impl());
            active.push_back(active_on(p.impl(), tape));
            widths.push_back(p.dim(1));
        }
        Impl oi = out;
        tape->record(out, [impls, active, widths, oi, m, total] {
            int col = 0;
            for (std::size_t pi = 0; pi < impls.size(); ++pi) {
                const int n = widths[pi];
                if (active[pi])
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < n; ++j)
                            impls[pi]->grad[i * n + j] += oi->grad[i * total + col + j];
                col += n;
            }
        });
    }
    return Tensor(out);
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) throw ContractError("concat_rows: no tensors given");
    const int n = parts[0].dim(1);
    int total = 0;
    for (const Tensor& p : parts) {
        require_rank(p, 2, "concat_rows");
        if (p.dim(1) != n)
            throw ShapeError("concat_rows: column count mismatch " + format_shape(p.shape()));
        total += p.dim(0);
    }
    Tape* tape = nullptr;
    for (const Tensor& p : parts) {
        Tape* t = detail::common_tape({&p});
        if (t && tape && t != tape) throw ContractError("concat_rows: tensors from different tapes");
        if (t) tape = t;
    }
    auto out = make_impl({total, n});
    int row = 0;
    for (const Tensor& p : parts) {
        std::copy(p.data().begin(), p.data().end(), out->data.begin() + row * n);
        row += p.dim(0);
    }
    if (tape) {
        std::vector<Impl> impls;
        std::vector<bool> active;
        std::vector<int> heights;
        for (const Tensor& p : parts) {
            impls.push_back(p.impl());
            active.push_back(active_on(p.impl(), tape));
            heights.push_back(p.dim(0));
        }
        Impl oi = out;
        tape->record(out, [impls, active, heights, oi, n] {
            int row = 0;
            for (std::size_t pi = 0; pi < impls.size(); ++pi) {
                const int m = heights[pi];
                if (active[pi])
                    for (int i = 0; i < m * n; ++i) impls[pi]->grad[i] += oi->grad[row * n + i];
                row += m;
            }
        });
    }
    return Tensor(out);
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& idx) {
    require_rank(a, 2, "gather_rows");
    const int m = a.dim(0), n = a.dim(1);
    for (int r : idx)
        if (r < 0 || r >= m)
            throw ContractError("gather_rows: index " + std::to_string(r) +
                                " out of bounds for " + format_shape(a.shape()));
    if (idx.empty()) throw ContractError("gather_rows: empty index list");
    Tape* tape = detail::common_tape({&a});
    auto out = make_impl({static_cast<int>(idx.size()), n});
    for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy(a.data().begin() + idx[r] * n, a.data().begin() + (idx[r] + 1) * n,
                  out->data.begin() + static_cast<int>(r) * n);
    if (tape) {
        Impl ai = a.impl(), oi = out;
        const bool da = active_on(ai, tape);
        tape->record(out, [ai, oi, da, idx, n] {
            if (da)
                for (std::size_t r = 0; r < idx.size(); ++r)
                    for (int j = 0; j < n; ++j)
                        ai->grad[idx[r] * n + j] += oi->grad[static_cast<int>(r) * n + j];
        });
    }
    return Tensor(out);
}

Tensor scatter_rows(const Tensor& base, const std::vector<int>& idx, const Tensor& rows) {
    require_rank(base, 2, "scatter_rows");
    require_rank(rows, 2, "scatter_rows");
    const int m = base.dim(0), n = base.dim(1);
    if (rows.dim(1) != n || rows.dim(0) != static_cast<int>(idx.size())) {
        throw ShapeError("scatter_rows: rows shape " + format_shape(rows.shape()) +
                         " does not match " + std::to_string(idx.size()) + " indices into " +
                         format_shape(base.shape()));
    }
    std::vector<char> seen(static_cast<std::size_t>(m), 0);
    for (int r : idx) {
        if (r < 0 || r >= m)
            throw ContractError("scatter_rows: index " + std::to_string(r) +
                                " out of bounds for " + format_shape(base.shape()));
        if (seen[static_cast<std::size_t>(r)]++)
            throw ContractError("scatter_rows: duplicate index " + std::to_string(r));
    }
    Tape* tape = detail::common_tape({&base, &rows});
    auto out = make_impl({m, n});
    out->data = base.data();  // untouched rows stay byte-identical
    for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy(rows.data().begin() + static_cast<int>(r) * n,
                  rows.data().begin() + static_cast<int>(r + 1) * n,
                  out->data.begin() + idx[r] * n);
    if (tape) {
        Impl bi = base.impl(), ri = rows.impl(), oi = out;
        const bool db = active_on(bi, tape), dr = active_on(ri, tape);
        tape->record(out, [bi, ri, oi, db, dr, idx, m, n] {
            if (db) {
                std::vector<char> replaced(static_cast<std::size_t>(m), 0);
                for (int r : idx) replaced[static_cast<std::size_t>(r)] = 1;
                for (int i = 0; i < m; ++i)
                    if (!replaced[static_cast<std::size_t>(i)])
                        for (int j = 0; j < n; ++j) bi->grad[i * n + j] += oi->grad[i * n + j];
            }
            if (dr)
                for (std::size_t r = 0; r < idx.size(); ++r)
                    for (int j = 0; j < n; ++j)
                        ri->grad[static_cast<int>(r) * n + j] += oi->grad[idx[r] * n + j];
        });
    }
    return Tensor(out);
}

Tensor add_rowvec(const Tensor& mat, const Tensor& row) {
    require_rank(mat, 2, "add_rowvec");
    require_defined(row, "add_rowvec");
    const int m = mat.dim(0), n = mat.dim(1);
    if (row.size() != n) {
        throw ShapeError("add_rowvec: row shape " + format_shape(row.shape()) +
                         " does not match matrix " + format_shape(mat.shape()));
    }
    Tape* tape = detail::common_tape({&mat, &row});
    auto out = make_impl({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out->data[i * n + j] = mat.data()[i * n + j] + row.data()[j];
    if (tape) {
        Impl mi = mat.impl(), ri = row.impl(), oi = out;
        const bool dm = active_on(mi, tape), dr = active_on(ri, tape);
        tape->record(out, [mi, ri, oi, dm, dr, m, n] {
            if (dm)
                for (int i = 0; i < m * n; ++i) mi->grad[i] += oi->grad[i];
            if (dr)
                for (int j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < m; ++i) acc += oi->grad[i * n + j];
                    ri->grad[j] += acc;
                }
        });
    }
    return Tensor(out);
}

Tensor softmax_rows(const Tensor& a) {
    require_rank(a, 2, "softmax_rows");
    const int m = a.dim(0), n = a.dim(1);
    Tape* tape = detail::common_tape({&a});
    auto out = make_impl({m, n});
    for (int i = 0; i < m; ++i) {
        const double* x = a.data().data() + i * n;
        double* y = out->data.data() + i * n;
        double mx = x[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            y[j] = std::exp(x[j] - mx);
            z += y[j];
        }
        for (int j = 0; j < n; ++j) y[j] /= z;
    }
    if (tape) {
        Impl ai = a.impl(), oi = out;
        const bool da = active_on(ai, tape);
        tape->record(out, [ai, oi, da, m, n] {
            if (!da) return;
            for (int i = 0; i < m; ++i) {
                const double* y = oi->data.data() + i * n;
                const double* gy = oi->grad.data() + i * n;
                double dot = 0.0;
                for (int j = 0; j < n; ++j) dot += gy[j] * y[j];
                double* gx = ai->grad.data() + i * n;
                for (int j = 0; j < n; ++j) gx[j] += y[j] * (gy[j] - dot);
            }
        });
    }
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// Reductions / reshaping
// ---------------------------------------------------------------------------

Tensor sum_all(const Tensor& a) {
    require_defined(a, "sum_all");
    Tape* tape = detail::common_tape({&a});
    auto out = make_impl({1});
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    out->data[0] = acc;
    if (tape) {
        Impl ai = a.impl(), oi = out;
        const bool da = active_on(ai, tape);
        tape->record(out, [ai, oi, da] {
            if (da) {
                const double g = oi->grad[0];
                for (double& v : ai->grad) v += g;
            }
        });
    }
    return Tensor(out);
}

Tensor mean_all(const Tensor& a) {
    require_defined(a, "mean_all");
    return affine_const(sum_all(a), 1.0 / static_cast<double>(a.size()), 0.0);
}

Tensor reshape(const Tensor& a, std::vector<int> shape) {
    require_defined(a, "reshape");
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d <= 0 ? 0 : d);
    if (n != a.data().size()) {
        throw ShapeError("reshape: cannot view " + format_shape(a.shape()) + " as " +
                         format_shape(shape));
    }
    Tape* tape = detail::common_tape({&a});
    auto out = make_impl(std::move(shape));
    out->data = a.data();
    if (tape) {
        Impl ai = a.impl(), oi = out;
        const bool da = active_on(ai, tape);
        tape->record(out, [ai, oi, da] {
            if (da)
                for (std::size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += oi->grad[i];
        });
    }
    return Tensor(out);
}

// ---------------------------------------------------------------------------
// Map/channel ops
// ---------------------------------------------------------------------------

Tensor grouped_conv2d(const Tensor& input, const Tensor& kernels, int groups) {
    require_rank(input, 3, "grouped_conv2d");
    require_rank(kernels, 4, "grouped_conv2d");
    const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int c_out = kernels.dim(0), kc = kernels.dim(1), kh = kernels.dim(2), kw = kernels.dim(3);
    if (groups <= 0 || c_in % groups != 0 || c_out % groups != 0) {
        throw ConfigError("grouped_conv2d: channel counts (" + std::to_string(c_in) + ", " +
                          std::to_string(c_out) + ") not divisible by groups=" +
                          std::to_string(groups));
    }
    if (kc != c_in / groups) {
        throw ShapeError("grouped_conv2d: kernel shape " + format_shape(kernels.shape()) +
                         " does not match input " + format_shape(input.shape()) + " with groups=" +
                         std::to_string(groups));
    }
    if (kh % 2 == 0 || kw % 2 == 0) {
        throw ConfigError("grouped_conv2d: same-padding requires odd kernel size, got " +
                          std::to_string(kh) + "x" + std::to_string(kw));
    }
    const int gi = c_in / groups, go = c_out / groups;
    const int ph = kh / 2, pw = kw / 2;
    Tape* tape = detail::common_tape({&input, &kernels});
    auto out = make_impl({c_out, h, w});
    detail::add_macs(static_cast<std::uint64_t>(c_out) * h * w * gi * kh * kw);

    const double* in = input.data().data();
    const double* ker = kernels.data().data();
    double* od = out->data.data();
    for (int co = 0; co < c_out; ++co) {
        const int grp = co / go;
        for (int oy = 0; oy < h; ++oy)
            for (int ox = 0; ox < w; ++ox) {
                double acc = 0.0;
                for (int cl = 0; cl < gi; ++cl) {
                    const int ci = grp * gi + cl;
                    for (int ky = 0; ky < kh; ++ky) {
                        const int iy = oy + ky - ph;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ix = ox + kx - pw;
                            if (ix < 0 || ix >= w) continue;
                            acc += in[(ci * h + iy) * w + ix] *
                                   ker[((co * gi + cl) * kh + ky) * kw + kx];
                        }
                    }
                }
                od[(co * h + oy) * w + ox] = acc;
            }
    }
    if (tape) {
        Impl ii = input.impl(), ki = kernels.impl(), oi = out;
        const bool di = active_on(ii, tape), dk = active_on(ki, tape);
        tape->record(out, [ii, ki, oi, di, dk, c_out, h, w, gi, go, kh, kw, ph, pw] {
            const double* go_grad = oi->grad.data();
            for (int co = 0; co < c_out; ++co) {
                const int grp = co / go;
                for (int oy = 0; oy < h; ++oy)
                    for (int ox = 0; ox < w; ++ox) {
                        const double g = go_grad[(co * h + oy) * w + ox];
                        if (g == 0.0) continue;
                        for (int cl = 0; cl < gi; ++cl) {
                            const int ci = grp * gi + cl;
                            for (int ky = 0; ky < kh; ++ky) {
                                const int iy = oy + ky - ph;
                                if (iy < 0 || iy >= h) continue;
                                for (int kx = 0; kx < kw; ++kx) {
                                    const int ix = ox + kx - pw;
                                    if (ix < 0 || ix >= w) continue;
                                    const std::size_t in_at = (ci * h + iy) * w + ix;
                                    const std::size_t k_at = ((co * gi + cl) * kh + ky) * kw + kx;
                                    if (di) ii->grad[in_at] += g * ki->data[k_at];
                                    if (dk) ki->grad[k_at] += g * ii->data[in_at];
                                }
                            }
                        }
                    }
            }
        });
    }
    return Tensor(out);
}

Tensor channel_affine(const Tensor& x, const Tensor& scale, const Tensor& shift) {
    require_rank(x, 3, "channel_affine");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (scale.size() != c || shift.size() != c) {
        throw ShapeError("channel_affine: scale " + format_shape(scale.shape()) + " / shift " +
                         format_shape(shift.shape()) + " do not match " + std::to_string(c) +
                         " channels");
    }
    Tape* tape = detail::common_tape({&x, &scale, &shift});
    auto out = make_impl(x.shape());
    const int hw = h * w;
    detail::add_macs(static_cast<std::uint64_t>(c) * hw);
    for (int ch = 0; ch < c; ++ch) {
        const double s = scale.data()[ch], t = shift.data()[ch];
        for (int p = 0; p < hw; ++p) out->data[ch * hw + p] = x.data()[ch * hw + p] * s + t;
    }
    if (tape) {
        Impl xi = x.impl(), si = scale.impl(), ti = shift.impl(), oi = out;
        const bool dx = active_on(xi, tape), ds = active_on(si, tape), dt = active_on(ti, tape);
        tape->record(out, [xi, si, ti, oi, dx, ds, dt, c, hw] {
            for (int ch = 0; ch < c; ++ch) {
                const double s = si->data[ch];
                double acc_s = 0.0, acc_t = 0.0;
                for (int p = 0; p < hw; ++p) {
                    const double g = oi->grad[ch * hw + p];
                    if (dx) xi->grad[ch * hw + p] += g * s;
                    acc_s += g * xi->data[ch * hw + p];
                    acc_t += g;
                }
                if (ds) si->grad[ch] += acc_s;
                if (dt) ti->grad[ch] += acc_t;
            }
        });
    }
    return Tensor(out);
}

namespace {

struct ResizeTap {
    int lo, hi;     // source indices
    double w_lo, w_hi;
};

// align-corners-false source taps for one output axis
std::vector<ResizeTap> resize_taps(int in_size, int out_size) {
    std::vector<ResizeTap> taps(static_cast<std::size_t>(out_size));
    const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
    for (int o = 0; o < out_size; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        if (src < 0.0) src = 0.0;
        const double max_src = static_cast<double>(in_size - 1);
        if (src > max_src) src = max_src;
        const int lo = static_cast<int>(src);
        const int hi = std::min(lo + 1, in_size - 1);
        const double f = src - static_cast<double>(lo);
        taps[static_cast<std::size_t>(o)] = {lo, hi, 1.0 - f, f};
    }
    return taps;
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, int out_h, int out_w) {
    require_rank(x, 3, "bilinear_resize");
    if (out_h < 1 || out_w < 1) {
        throw ShapeError("bilinear_resize: output size must be at least 1x1, got " +
                         std::to_string(out_h) + "x" + std::to_string(out_w));
    }
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const auto ty = resize_taps(h, out_h);
    const auto tx = resize_taps(w, out_w);
    Tape* tape = detail::common_tape({&x});
    auto out = make_impl({c, out_h, out_w});
    detail::add_macs(static_cast<std::uint64_t>(c) * out_h * out_w * 4);
    for (int ch = 0; ch < c; ++ch) {
        const double* src = x.data().data() + ch * h * w;
        double* dst = out->data.data() + ch * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
            const ResizeTap& ry = ty[static_cast<std::size_t>(oy)];
            for (int ox = 0; ox < out_w; ++ox) {
                const ResizeTap& rx = tx[static_cast<std::size_t>(ox)];
                dst[oy * out_w + ox] = ry.w_lo * (rx.w_lo * src[ry.lo * w + rx.lo] +
                                                  rx.w_hi * src[ry.lo * w + rx.hi]) +
                                       ry.w_hi * (rx.w_lo * src[ry.hi * w + rx.lo] +
                                                  rx.w_hi * src[ry.hi * w + rx.hi]);
            }
        }
    }
    if (tape) {
        Impl xi = x.impl(), oi = out;
        const bool dx = active_on(xi, tape);
        tape->record(out, [xi, oi, dx, ty, tx, c, h, w, out_h, out_w] {
            if (!dx) return;
            for (int ch = 0; ch < c; ++ch) {
                double* gsrc = xi->grad.data() + ch * h * w;
                const double* gdst = oi->grad.data() + ch * out_h * out_w;
                for (int oy = 0; oy < out_h; ++oy) {
                    const ResizeTap& ry = ty[static_cast<std::size_t>(oy)];
                    for (int ox = 0; ox < out_w; ++ox) {
                        const ResizeTap& rx = tx[static_cast<std::size_t>(ox)];
                        const double g = gdst[oy * out_w + ox];
                        gsrc[ry.lo * w + rx.lo] += g * ry.w_lo * rx.w_lo;
                        gsrc[ry.lo * w + rx.hi] += g * ry.w_lo * rx.w_hi;
                        gsrc[ry.hi * w + rx.lo] += g * ry.w_hi * rx.w_lo;
                        gsrc[ry.hi * w + rx.hi] += g * ry.w_hi * rx.w_hi;
                    }
                }
            }
        });
    }
    return Tensor(out);
}

Tensor channels_to_rows(const Tensor& x) {
    require_rank(x, 3, "channels_to_rows");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int hw = h * w;
    Tape* tape = detail::common_tape({&x});
    auto out = make_impl({hw, c});
    for (int ch = 0; ch < c; ++ch)
        for (int p = 0; p < hw; ++p) out->data[p * c + ch] = x.data()[ch * hw + p];
    if (tape) {
        Impl xi = x.impl(), oi = out;
        const bool dx = active_on(xi, tape);
        tape->record(out, [xi, oi, dx, c, hw] {
            if (dx)
                for (int ch = 0; ch < c; ++ch)
                    for (int p = 0; p < hw; ++p) xi->grad[ch * hw + p] += oi->grad[p * c + ch];
        });
    }
    return Tensor(out);
}

Tensor rows_to_channels(const Tensor& x, int h, int w) {
    require_rank(x, 2, "rows_to_channels");
    const int hw = x.dim(0), c = x.dim(1);
    if (hw != h * w) {
        throw ShapeError("rows_to_channels: " + format_shape(x.shape()) + " does not cover " +
                         std::to_string(h) + "x" + std::to_string(w));
    }
    Tape* tape = detail::common_tape({&x});
    auto out = make_impl({c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int p = 0; p < hw; ++p) out->data[ch * hw + p] = x.data()[p * c + ch];
    if (tape) {
        Impl xi = x.impl(), oi = out;
        const bool dx = active_on(xi, tape);
        tape->record(out, [xi, oi, dx, c, hw] {
            if (dx)
                for (int ch = 0; ch < c; ++ch)
                    for (int p = 0; p < hw; ++p) xi->grad[p * c + ch] += oi->grad[ch * hw + p];
        });
    }
    return Tensor(out);
}

Tensor mul_by_map(const Tensor& x, const Tensor& m) {
    require_rank(x, 3, "mul_by_map");
    require_defined(m, "mul_by_map");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int hw = h * w;
    if (m.size() != hw) {
        throw ShapeError("mul_by_map: map " + format_shape(m.shape()) + " does not match " +
                         format_shape(x.shape()));
    }
    Tape* tape = detail::common_tape({&x, &m});
    auto out = make_impl(x.shape());
    detail::add_macs(static_cast<std::uint64_t>(c) * hw);
    for (int ch = 0; ch < c; ++ch)
        for (int p = 0; p < hw; ++p) out->data[ch * hw + p] = x.data()[ch * hw + p] * m.data()[p];
    if (tape) {
        Impl xi = x.impl(), mi = m.impl(), oi = out;
        const bool dx = active_on(xi, tape), dm = active_on(mi, tape);
        tape->record(out, [xi, mi, oi, dx, dm, c, hw] {
            if (dx)
                for (int ch = 0; ch < c; ++ch)
                    for (int p = 0; p < hw; ++p)
                        xi->grad[ch * hw + p] += oi->grad[ch * hw + p] * mi->data[p];
            if (dm)
                for (int p = 0; p < hw; ++p) {
                    double acc = 0.0;
                    for (int ch = 0; ch < c; ++ch)
                        acc += oi->grad[ch * hw + p] * xi->data[ch * hw + p];
                    mi->grad[p] += acc;
                }
        });
    }
    return Tensor(out);
}

Tensor mul_channels(const Tensor& x, const Tensor& gate) {
    require_rank(x, 3, "mul_channels");
    require_defined(gate, "mul_channels");
    const int c = x.dim(0), hw = x.dim(1) * x.dim(2);
    if (gate.size() != c) {
        throw ShapeError("mul_channels: gate " + format_shape(gate.shape()) +
                         " does not match " + std::to_string(c) + " channels");
    }
    Tape* tape = detail::common_tape({&x, &gate});
    auto out = make_impl(x.shape());
    detail::add_macs(static_cast<std::uint64_t>(c) * hw);
    for (int ch = 0; ch < c; ++ch) {
        const double g = gate.data()[ch];
        for (int p = 0; p < hw; ++p) out->data[ch * hw + p] = x.data()[ch * hw + p] * g;
    }
    if (tape) {
        Impl xi = x.impl(), gi = gate.impl(), oi = out;
        const bool dx = active_on(xi, tape), dg = active_on(gi, tape);
        tape->record(out, [xi, gi, oi, dx, dg, c, hw] {
            for (int ch = 0; ch < c; ++ch) {
                const double g = gi->data[ch];
                double acc = 0.0;
                for (int p = 0; p < hw; ++p) {
                    const double og = oi->grad[ch * hw + p];
                    if (dx) xi->grad[ch * hw + p] += og * g;
                    acc += og * xi->data[ch * hw + p];
                }
                if (dg) gi->grad[ch] += acc;
            }
        });
    }
    return Tensor(out);
}

Tensor spatial_mean(const Tensor& x) {
    require_rank(x, 3, "spatial_mean");
    const int c = x.dim(0), hw = x.dim(1) * x.dim(2);
    Tape* tape = detail::common_tape({&x});
    auto out = make_impl({1, c});
    const double inv = 1.0 / static_cast<double>(hw);
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int p = 0; p < hw; ++p) acc += x.data()[ch * hw + p];
        out->data[ch] = acc * inv;
    }
    if (tape) {
        Impl xi = x.impl(), oi = out;
        const bool dx = active_on(xi, tape);
        tape->record(out, [xi, oi, dx, c, hw, inv] {
            if (dx)
                for (int ch = 0; ch < c; ++ch) {
                    const double g = oi->grad[ch] * inv;
                    for (int p = 0; p < hw; ++p) xi->grad[ch * hw + p] += g;
                }
        });
    }
    return Tensor(out);
}

Tensor concat_channels(std::span<const Tensor> parts) {
    if (parts.empty()) throw ContractError("concat_channels: no tensors given");
    const int h = parts[0].dim(1), w = parts[0].dim(2);
    int total = 0;
    for (const Tensor& p : parts) {
        require_rank(p, 3, "concat_channels");
        if (p.dim(1) != h || p.dim(2) != w)
            throw ShapeError("concat_channels: spatial mismatch " + format_shape(p.shape()));
        total += p.dim(0);
    }
    Tape* tape = nullptr;
    for (const Tensor& p : parts) {
        Tape* t = detail::common_tape({&p});
        if (t && tape && t != tape)
            throw ContractError("concat_channels: tensors from different tapes");
        if (t) tape = t;
    }
    auto out = make_impl({total, h, w});
    std::size_t at = 0;
    for (const Tensor& p : parts) {
        std::copy(p.data().begin(), p.data().end(), out->data.begin() + at);
        at += p.data().size();
    }
    if (tape) {
        std::vector<Impl> impls;
        std::vector<bool> active;
        for (const Tensor& p : parts) {
            impls.push_back(p.impl());
            active.push_back(active_on(p.impl(), tape));
        }
        Impl oi = out;
        tape->record(out, [impls, active, oi] {
            std::size_t at = 0;
            for (std::size_t pi = 0; pi < impls.size(); ++pi) {
                const std::size_t n = impls[pi]->data.size();
                if (active[pi])
                    for (std::size_t i = 0; i < n; ++i) impls[pi]->grad[i] += oi->grad[at + i];
                at += n;
            }
        });
    }
    return Tensor(out);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const Tensor parts[] = {a, b};
    return concat_channels(std::span<const Tensor>(parts, 2));
}

}  // namespace salenc
