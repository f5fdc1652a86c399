#include "clustvit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "clustvit/errors.hpp"
#include "clustvit/kernels.hpp"

namespace clustvit::ops {

namespace {

using NodePtr = std::shared_ptr<TensorNode>;

thread_local MacCounter* t_counter = nullptr;

void count_macs(std::uint64_t macs) {
    if (t_counter) t_counter->add(macs);
}

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

bool wants_grad(const NodePtr& n) { return n->requires_grad; }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const std::size_t m = a.dim(0), p = a.dim(1), n = b.dim(1);
    if (b.dim(0) != p)
        throw ShapeError("matmul: inner dimensions differ for " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    count_macs(static_cast<std::uint64_t>(m) * p * n);
    std::vector<double> out(m * n, 0.0);
    kernels::gemm_nn(a.data(), b.data(), out, m, p, n);
    NodePtr an = a.shared(), bn = b.shared();
    return detail::make_result({m, n}, std::move(out), {a, b}, [an, bn, m, p, n](std::span<const double> g) {
        if (wants_grad(an)) kernels::gemm_nt(g, bn->data, an->grad_buffer(), m, n, p);
        if (wants_grad(bn)) kernels::gemm_tn(an->data, g, bn->grad_buffer(), p, m, n);
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul_nt");
    require_rank2(b, "matmul_nt");
    const std::size_t m = a.dim(0), p = a.dim(1), n = b.dim(0);
    if (b.dim(1) != p)
        throw ShapeError("matmul_nt: inner dimensions differ for " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + "^T");
    count_macs(static_cast<std::uint64_t>(m) * p * n);
    std::vector<double> out(m * n, 0.0);
    kernels::gemm_nt(a.data(), b.data(), out, m, p, n);
    NodePtr an = a.shared(), bn = b.shared();
    return detail::make_result({m, n}, std::move(out), {a, b}, [an, bn, m, p, n](std::span<const double> g) {
        // C = A B^T: dA = G B, dB = G^T A
        if (wants_grad(an)) kernels::gemm_nn(g, bn->data, an->grad_buffer(), m, n, p);
        if (wants_grad(bn)) kernels::gemm_tn(g, an->data, bn->grad_buffer(), n, m, p);
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
    NodePtr an = a.shared(), bn = b.shared();
    return detail::make_result(a.shape(), std::move(out), {a, b}, [an, bn](std::span<const double> g) {
        for (const auto& node : {an, bn}) {
            if (!wants_grad(node)) continue;
            auto dst = node->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
    NodePtr an = a.shared(), bn = b.shared();
    return detail::make_result(a.shape(), std::move(out), {a, b}, [an, bn](std::span<const double> g) {
        if (wants_grad(an)) {
            auto dst = an->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * bn->data[i];
        }
        if (wants_grad(bn)) {
            auto dst = bn->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * an->data[i];
        }
    });
}

Tensor scale(const Tensor& x, double s) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) * s;
    NodePtr xn = x.shared();
    return detail::make_result(x.shape(), std::move(out), {x}, [xn, s](std::span<const double> g) {
        auto dst = xn->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * s;
    });
}

Tensor add_row(const Tensor& x, const Tensor& bias) {
    const std::size_t n = x.cols();
    if (bias.numel() != n)
        throw ShapeError("add_row: bias " + shape_str(bias.shape()) + " does not match rows of " + shape_str(x.shape()));
    const std::size_t rows = x.numel() / n;
    std::vector<double> out(x.values());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < n; ++j) out[r * n + j] += bias.at(j);
    NodePtr xn = x.shared(), bn = bias.shared();
    return detail::make_result(x.shape(), std::move(out), {x, bias}, [xn, bn, rows, n](std::span<const double> g) {
        if (wants_grad(xn)) {
            auto dst = xn->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
        }
        if (wants_grad(bn)) {
            auto dst = bn->grad_buffer();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < n; ++j) dst[j] += g[r * n + j];
        }
    });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    return add_row(matmul(x, weight), bias);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const std::size_t d = x.cols();
    if (gain.numel() != d || bias.numel() != d)
        throw ShapeError("layer_norm: gain/bias must have " + std::to_string(d) + " elements");
    if (!(eps > 0.0)) throw ShapeError("layer_norm: eps must be positive");
    const std::size_t rows = x.numel() / d;
    std::vector<double> out(x.numel());
    std::vector<double> xhat(x.numel());
    std::vector<double> inv_std(rows);
    const auto in = x.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = in.data() + r * d;
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) mu += row[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = is;
        for (std::size_t j = 0; j < d; ++j) {
            const double h = (row[j] - mu) * is;
            xhat[r * d + j] = h;
            out[r * d + j] = h * gain.at(j) + bias.at(j);
        }
    }
    NodePtr xn = x.shared(), gn = gain.shared(), bn = bias.shared();
    return detail::make_result(
        x.shape(), std::move(out), {x, gain, bias},
        [xn, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, d](std::span<const double> g) {
            if (wants_grad(gn)) {
                auto dst = gn->grad_buffer();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < d; ++j) dst[j] += g[r * d + j] * xhat[r * d + j];
            }
            if (wants_grad(bn)) {
                auto dst = bn->grad_buffer();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < d; ++j) dst[j] += g[r * d + j];
            }
            if (wants_grad(xn)) {
                auto dst = xn->grad_buffer();
                const double inv_d = 1.0 / static_cast<double>(d);
                for (std::size_t r = 0; r < rows; ++r) {
                    double sum_gh = 0.0, sum_ghx = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double gh = g[r * d + j] * gn->data[j];
                        sum_gh += gh;
                        sum_ghx += gh * xhat[r * d + j];
                    }
                    for (std::size_t j = 0; j < d; ++j) {
                        const double gh = g[r * d + j] * gn->data[j];
                        dst[r * d + j] += inv_std[r] * (gh - inv_d * sum_gh - xhat[r * d + j] * inv_d * sum_ghx);
                    }
                }
            }
        });
}

Tensor softmax(const Tensor& x, int axis) {
    const int rank = static_cast<int>(x.rank());
    const int ax = axis < 0 ? axis + rank : axis;
    if (ax < 0 || ax >= rank) throw ShapeError("softmax: axis out of range for " + shape_str(x.shape()));
    std::size_t outer = 1, inner = 1;
    for (int i = 0; i < ax; ++i) outer *= x.dim(i);
    for (int i = ax + 1; i < rank; ++i) inner *= x.dim(i);
    const std::size_t len = x.dim(ax);

    std::vector<double> out(x.numel());
    const auto in = x.data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = o * len * inner + i;
            double mx = in[base];
            for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, in[base + j * inner]);
            double z = 0.0;
            for (std::size_t j = 0; j < len; ++j) {
                const double e = std::exp(in[base + j * inner] - mx);
                out[base + j * inner] = e;
                z += e;
            }
            const double inv = 1.0 / z;
            for (std::size_t j = 0; j < len; ++j) out[base + j * inner] *= inv;
        }
    NodePtr xn = x.shared();
    auto y = out;
    return detail::make_result(x.shape(), std::move(out), {x},
                               [xn, y = std::move(y), outer, inner, len](std::span<const double> g) {
                                   auto dst = xn->grad_buffer();
                                   for (std::size_t o = 0; o < outer; ++o)
                                       for (std::size_t i = 0; i < inner; ++i) {
                                           const std::size_t base = o * len * inner + i;
                                           double dot = 0.0;
                                           for (std::size_t j = 0; j < len; ++j)
                                               dot += g[base + j * inner] * y[base + j * inner];
                                           for (std::size_t j = 0; j < len; ++j) {
                                               const std::size_t k = base + j * inner;
                                               dst[k] += y[k] * (g[k] - dot);
                                           }
                                       }
                               });
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, x.at(i));
    NodePtr xn = x.shared();
    return detail::make_result(x.shape(), std::move(out), {x}, [xn](std::span<const double> g) {
        auto dst = xn->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (xn->data[i] > 0.0) dst[i] += g[i];
    });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Tensor gelu(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = x.at(i);
        out[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
    }
    NodePtr xn = x.shared();
    return detail::make_result(x.shape(), std::move(out), {x}, [xn](std::span<const double> g) {
        auto dst = xn->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = xn->data[i];
            const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
            const double dinner = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
            dst[i] += g[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dinner);
        }
    });
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    NodePtr xn = x.shared();
    return detail::make_result({1}, {s}, {x}, [xn](std::span<const double> g) {
        auto dst = xn->grad_buffer();
        for (auto& d : dst) d += g[0];
    });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, std::optional<int> ignore_label) {
    require_rank2(logits, "cross_entropy");
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    if (targets.size() != n)
        throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " + std::to_string(n) +
                         " rows");
    std::vector<double> probs(n * c, 0.0);
    std::vector<char> used(n, 0);
    std::size_t count = 0;
    double total = 0.0;
    const auto in = logits.data();
    for (std::size_t r = 0; r < n; ++r) {
        const int t = targets[r];
        if (ignore_label && t == *ignore_label) continue;
        if (t < 0 || static_cast<std::size_t>(t) >= c)
            throw ShapeError("cross_entropy: target " + std::to_string(t) + " out of range at row " + std::to_string(r));
        const double* row = in.data() + r * c;
        const double mx = *std::max_element(row, row + c);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
        const double lse = mx + std::log(z);
        total += lse - row[t];
        for (std::size_t j = 0; j < c; ++j) probs[r * c + j] = std::exp(row[j] - lse);
        used[r] = 1;
        ++count;
    }
    if (count == 0) throw NumericError("cross_entropy: empty loss (every row ignored)");
    const double inv = 1.0 / static_cast<double>(count);
    NodePtr ln = logits.shared();
    std::vector<int> tgt(targets.begin(), targets.end());
    return detail::make_result(
        {1}, {total * inv}, {logits},
        [ln, probs = std::move(probs), used = std::move(used), tgt = std::move(tgt), n, c, inv](std::span<const double> g) {
            auto dst = ln->grad_buffer();
            const double s = g[0] * inv;
            for (std::size_t r = 0; r < n; ++r) {
                if (!used[r]) continue;
                for (std::size_t j = 0; j < c; ++j) dst[r * c + j] += s * probs[r * c + j];
                dst[r * c + static_cast<std::size_t>(tgt[r])] -= s;
            }
        });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel())
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    NodePtr xn = x.shared();
    return detail::make_result(std::move(shape), x.values(), {x}, [xn](std::span<const double> g) {
        auto dst = xn->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
    require_rank2(x, "slice_cols");
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    if (start + count > cols) throw ShapeError("slice_cols: range exceeds " + shape_str(x.shape()));
    std::vector<double> out(rows * count);
    for (std::size_t r = 0; r < rows; ++r)
        std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(r * cols + start), count,
                    out.begin() + static_cast<std::ptrdiff_t>(r * count));
    NodePtr xn = x.shared();
    return detail::make_result({rows, count}, std::move(out), {x}, [xn, rows, cols, start, count](std::span<const double> g) {
        auto dst = xn->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < count; ++j) dst[r * cols + start + j] += g[r * count + j];
    });
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t rows = parts[0].dim(0);
    std::size_t cols = 0;
    for (const auto& p : parts) {
        require_rank2(p, "concat_cols");
        if (p.dim(0) != rows) throw ShapeError("concat_cols: row counts differ");
        cols += p.dim(1);
    }
    std::vector<double> out(rows * cols);
    std::vector<NodePtr> nodes;
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.dim(1);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < w; ++j) out[r * cols + off + j] = p.at(r * w + j);
        nodes.push_back(p.shared());
        offsets.push_back(off);
        off += w;
    }
    return detail::make_result({rows, cols}, std::move(out), {parts.begin(), parts.end()},
                               [nodes, offsets, rows, cols](std::span<const double> g) {
                                   for (std::size_t k = 0; k < nodes.size(); ++k) {
                                       if (!wants_grad(nodes[k])) continue;
                                       const std::size_t w = nodes[k]->shape[1];
                                       auto dst = nodes[k]->grad_buffer();
                                       for (std::size_t r = 0; r < rows; ++r)
                                           for (std::size_t j = 0; j < w; ++j)
                                               dst[r * w + j] += g[r * cols + offsets[k] + j];
                                   }
                               });
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const std::size_t cols = parts[0].cols();
    std::size_t rows = 0;
    std::vector<double> out;
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) {
        require_rank2(p, "concat_rows");
        if (p.cols() != cols)
            throw ShapeError("concat_rows: column counts differ (" + shape_str(parts[0].shape()) + " vs " +
                             shape_str(p.shape()) + ")");
        rows += p.dim(0);
        out.insert(out.end(), p.data().begin(), p.data().end());
        nodes.push_back(p.shared());
    }
    return detail::make_result({rows, cols}, std::move(out), {parts.begin(), parts.end()}, [nodes](std::span<const double> g) {
        std::size_t off = 0;
        for (const auto& node : nodes) {
            const std::size_t len = node->data.size();
            if (wants_grad(node)) {
                auto dst = node->grad_buffer();
                for (std::size_t i = 0; i < len; ++i) dst[i] += g[off + i];
            }
            off += len;
        }
    });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
    require_rank2(x, "gather_rows");
    const std::size_t cols = x.dim(1);
    std::vector<double> out(rows.size() * cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= x.dim(0))
            throw ShapeError("gather_rows: row " + std::to_string(rows[i]) + " out of range for " + shape_str(x.shape()));
        std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(rows[i] * cols), cols,
                    out.begin() + static_cast<std::ptrdiff_t>(i * cols));
    }
    NodePtr xn = x.shared();
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    return detail::make_result({rows.size(), cols}, std::move(out), {x}, [xn, idx = std::move(idx), cols](std::span<const double> g) {
        auto dst = xn->grad_buffer();
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < cols; ++j) dst[idx[i] * cols + j] += g[i * cols + j];
    });
}

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count) {
    require_rank2(x, "slice_rows");
    if (start + count > x.dim(0)) throw ShapeError("slice_rows: range exceeds " + shape_str(x.shape()));
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), start);
    return gather_rows(x, idx);
}

Tensor segment_mean(const Tensor& x, const std::vector<std::vector<std::size_t>>& groups) {
    require_rank2(x, "segment_mean");
    const std::size_t cols = x.dim(1);
    std::vector<double> out(groups.size() * cols, 0.0);
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& members = groups[gi];
        if (members.empty()) throw ShapeError("segment_mean: empty group " + std::to_string(gi));
        double* dst = out.data() + gi * cols;
        for (std::size_t r : members) {
            if (r >= x.dim(0)) throw ShapeError("segment_mean: row out of range");
            for (std::size_t j = 0; j < cols; ++j) dst[j] += x.at(r * cols + j);
        }
        const double inv = 1.0 / static_cast<double>(members.size());
        for (std::size_t j = 0; j < cols; ++j) dst[j] *= inv;
    }
    NodePtr xn = x.shared();
    return detail::make_result({groups.size(), cols}, std::move(out), {x}, [xn, groups, cols](std::span<const double> g) {
        auto dst = xn->grad_buffer();
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            const double inv = 1.0 / static_cast<double>(groups[gi].size());
            for (std::size_t r : groups[gi])
                for (std::size_t j = 0; j < cols; ++j) dst[r * cols + j] += inv * g[gi * cols + j];
        }
    });
}

namespace {

struct Tap {
    std::size_t lo, hi;
    double w_hi;  // weight of `hi`; `lo` gets 1 - w_hi
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t factor) {
    std::vector<Tap> taps(in * factor);
    for (std::size_t o = 0; o < taps.size(); ++o) {
        double src = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        const auto lo = static_cast<std::size_t>(std::floor(src));
        const std::size_t hi = std::min(lo + 1, in - 1);
        taps[o] = {lo, hi, src - static_cast<double>(lo)};
    }
    return taps;
}

}  // namespace

Tensor upsample_bilinear(const Tensor& x, std::size_t rows, std::size_t cols, std::size_t factor) {
    require_rank2(x, "upsample_bilinear");
    if (x.dim(0) != rows * cols)
        throw ShapeError("upsample_bilinear: " + shape_str(x.shape()) + " is not a " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " grid");
    if (factor == 0) throw ShapeError("upsample_bilinear: factor must be positive");
    const std::size_t c = x.dim(1);
    const std::size_t out_rows = rows * factor, out_cols = cols * factor;
    auto ty = bilinear_taps(rows, factor);
    auto tx = bilinear_taps(cols, factor);
    std::vector<double> out(out_rows * out_cols * c, 0.0);
    const auto in = x.data();
    for (std::size_t y = 0; y < out_rows; ++y) {
        const Tap& a = ty[y];
        for (std::size_t xo = 0; xo < out_cols; ++xo) {
            const Tap& b = tx[xo];
            const double w00 = (1 - a.w_hi) * (1 - b.w_hi), w01 = (1 - a.w_hi) * b.w_hi;
            const double w10 = a.w_hi * (1 - b.w_hi), w11 = a.w_hi * b.w_hi;
            const double* p00 = in.data() + (a.lo * cols + b.lo) * c;
            const double* p01 = in.data() + (a.lo * cols + b.hi) * c;
            const double* p10 = in.data() + (a.hi * cols + b.lo) * c;
            const double* p11 = in.data() + (a.hi * cols + b.hi) * c;
            double* dst = out.data() + (y * out_cols + xo) * c;
            for (std::size_t k = 0; k < c; ++k) dst[k] = w00 * p00[k] + w01 * p01[k] + w10 * p10[k] + w11 * p11[k];
        }
    }
    NodePtr xn = x.shared();
    return detail::make_result(
        {out_rows * out_cols, c}, std::move(out), {x},
        [xn, ty = std::move(ty), tx = std::move(tx), cols, out_rows, out_cols, c](std::span<const double> g) {
            auto dst = xn->grad_buffer();
            for (std::size_t y = 0; y < out_rows; ++y) {
                const Tap& a = ty[y];
                for (std::size_t xo = 0; xo < out_cols; ++xo) {
                    const Tap& b = tx[xo];
                    const double w00 = (1 - a.w_hi) * (1 - b.w_hi), w01 = (1 - a.w_hi) * b.w_hi;
                    const double w10 = a.w_hi * (1 - b.w_hi), w11 = a.w_hi * b.w_hi;
                    const double* src = g.data() + (y * out_cols + xo) * c;
                    double* d00 = dst.data() + (a.lo * cols + b.lo) * c;
                    double* d01 = dst.data() + (a.lo * cols + b.hi) * c;
                    double* d10 = dst.data() + (a.hi * cols + b.lo) * c;
                    double* d11 = dst.data() + (a.hi * cols + b.hi) * c;
                    for (std::size_t k = 0; k < c; ++k) {
                        d00[k] += w00 * src[k];
                        d01[k] += w01 * src[k];
                        d10[k] += w10 * src[k];
                        d11[k] += w11 * src[k];
                    }
                }
            }
        });
}

MacCounter::MacCounter() : previous_(t_counter) { t_counter = this; }
MacCounter::~MacCounter() { t_counter = previous_; }

std::uint64_t MacCounter::total() const {
    std::uint64_t s = 0;
    for (const auto& [tag, v] : by_tag_) s += v;
    return s;
}

std::uint64_t MacCounter::at(const std::string& tag) const {
    auto it = by_tag_.find(tag);
    return it == by_tag_.end() ? 0 : it->second;
}

MacCounter* MacCounter::active() { return t_counter; }

MacTag::MacTag(std::string tag) {
    if (t_counter) {
        previous_ = t_counter->tag();
        t_counter->set_tag(std::move(tag));
    }
}

MacTag::~MacTag() {
    if (t_counter) t_counter->set_tag(previous_);
}

}  // namespace clustvit::ops
