#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "clustvit/image.hpp"
#include "clustvit/pseudo_clusters.hpp"
#include "clustvit/tensor.hpp"

namespace clustvit {

struct LossReport {
    double seg_loss = 0.0;
    double clust_loss = 0.0;
    double total = 0.0;
    double lambda = 0.0;
};

struct CombinedLoss {
    Tensor total;  // differentiable scalar
    LossReport report;
};

// Rows are ground truth, columns are predictions; indices are 0-based.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t num_classes);

    std::size_t num_classes() const { return n_; }
    std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * n_ + pred]; }
    std::uint64_t total() const;

    // One count per pixel. Throws ShapeError naming the first out-of-range pixel.
    void accumulate(std::span<const int> gt, std::span<const int> pred);
    void add(std::size_t gt, std::size_t pred, std::uint64_t count = 1);
    ConfusionMatrix& operator+=(const ConfusionMatrix& other);

private:
    std::size_t n_;
    std::vector<std::uint64_t> counts_;
};

struct MiouResult {
    double miou = 0.0;
    std::vector<double> iou;       // per class; NaN where the class is absent from gt and prediction
    std::size_t classes_counted = 0;
};

namespace metrics {

// seg CE over pixels (mask ids 1..C map to logit columns 0..C-1) plus
// lambda * cluster CE over patches. Undefined cluster_logits -> seg term only.
CombinedLoss combined_loss(const Tensor& seg_logits, const Mask& gt, const Tensor& cluster_logits,
                           const PseudoClusterMask& pseudo, double lambda);

// IoU_c = TP / (TP + FP + FN). Throws Error on an empty matrix.
MiouResult miou(const ConfusionMatrix& conf);

// Per-pixel argmax of (H*W) x C logits, as 0-based indices.
std::vector<int> argmax_rows(const Tensor& logits);

// Mask class ids (1..C) to 0-based indices.
std::vector<int> mask_indices(const Mask& mask);

}  // namespace metrics

}  // namespace clustvit
