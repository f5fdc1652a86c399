#pragma once

// Differentiable operations on Tensor.
//
// Matrices are rank-2 row-major. Row-wise ops (layer_norm, add_row, the
// softmax default axis) treat every leading axis as a batch of rows.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clustvit/tensor.hpp"

namespace clustvit::ops {

Tensor matmul(const Tensor& a, const Tensor& b);     // a[m x p] * b[p x n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a[m x p] * b[n x p]^T

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);
Tensor add_row(const Tensor& x, const Tensor& bias);  // bias[n] added to every row of x[... x n]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);  // x * W + b

// Normalizes over the last axis, then applies gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-6);

// Max-subtracted softmax along `axis` (negative counts from the back).
Tensor softmax(const Tensor& x, int axis = -1);
Tensor relu(const Tensor& x);
// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
Tensor gelu(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Mean of -log softmax(logits)[target] over rows whose target is not ignore_label.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets,
                     std::optional<int> ignore_label = std::nullopt);

Tensor reshape(const Tensor& x, Shape shape);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);

// Row gather; backward scatter-adds, so repeated indices accumulate.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count);

// One output row per group: the mean of the listed rows of x. Groups must be non-empty.
Tensor segment_mean(const Tensor& x, const std::vector<std::vector<std::size_t>>& groups);

// x holds a (rows*cols) x C grid in row-major cell order; the result is the
// (rows*factor)*(cols*factor) x C bilinear upsampling with half-pixel centers
// (no corner alignment) and edge clamping.
Tensor upsample_bilinear(const Tensor& x, std::size_t rows, std::size_t cols, std::size_t factor);

// Multiply-accumulate accounting for forward matmuls. While a MacCounter is
// installed on the current thread, every matmul adds m*p*n to the active tag.
class MacCounter {
public:
    MacCounter();
    ~MacCounter();
    MacCounter(const MacCounter&) = delete;
    MacCounter& operator=(const MacCounter&) = delete;

    void add(std::uint64_t macs) { by_tag_[tag_] += macs; }
    void set_tag(std::string tag) { tag_ = std::move(tag); }
    const std::string& tag() const { return tag_; }

    std::uint64_t total() const;
    std::uint64_t at(const std::string& tag) const;
    const std::map<std::string, std::uint64_t>& by_tag() const { return by_tag_; }

    static MacCounter* active();

private:
    std::map<std::string, std::uint64_t> by_tag_;
    std::string tag_ = "other";
    MacCounter* previous_;
};

// Switches the active counter's tag for the scope; no-op without a counter.
class MacTag {
public:
    explicit MacTag(std::string tag);
    ~MacTag();
    MacTag(const MacTag&) = delete;
    MacTag& operator=(const MacTag&) = delete;

private:
    std::string previous_;
};

}  // namespace clustvit::ops
