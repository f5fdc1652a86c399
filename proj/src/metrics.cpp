#include "clustvit/metrics.hpp"

#include <cmath>
#include <limits>

#include "clustvit/errors.hpp"
#include "clustvit/ops.hpp"

namespace clustvit {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : n_(num_classes), counts_(num_classes * num_classes, 0) {}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t s = 0;
    for (auto c : counts_) s += c;
    return s;
}

void ConfusionMatrix::accumulate(std::span<const int> gt, std::span<const int> pred) {
    if (gt.size() != pred.size())
        throw ShapeError("confusion matrix: " + std::to_string(gt.size()) + " gt pixels vs " +
                         std::to_string(pred.size()) + " predicted");
    const int n = static_cast<int>(n_);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] < 0 || gt[i] >= n || pred[i] < 0 || pred[i] >= n)
            throw ShapeError("confusion matrix: pixel " + std::to_string(i) + " has gt " + std::to_string(gt[i]) +
                             ", pred " + std::to_string(pred[i]) + " outside [0, " + std::to_string(n_) + ")");
    }
    for (std::size_t i = 0; i < gt.size(); ++i) ++counts_[static_cast<std::size_t>(gt[i]) * n_ + static_cast<std::size_t>(pred[i])];
}

void ConfusionMatrix::add(std::size_t gt, std::size_t pred, std::uint64_t count) {
    if (gt >= n_ || pred >= n_) throw ShapeError("confusion matrix: index out of range");
    counts_[gt * n_ + pred] += count;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    if (other.n_ != n_) throw ShapeError("confusion matrix: class counts differ");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
}

namespace metrics {

CombinedLoss combined_loss(const Tensor& seg_logits, const Mask& gt, const Tensor& cluster_logits,
                           const PseudoClusterMask& pseudo, double lambda) {
    if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
    if (seg_logits.rows() != gt.labels.size())
        throw ShapeError("combined_loss: " + std::to_string(seg_logits.rows()) + " logit rows for " +
                         std::to_string(gt.labels.size()) + " pixels");
    const auto targets = mask_indices(gt);
    CombinedLoss out;
    Tensor seg = ops::cross_entropy(seg_logits, targets);
    out.report.lambda = lambda;
    out.report.seg_loss = seg.item();
    if (!cluster_logits.defined()) {
        out.total = seg;
        out.report.total = out.report.seg_loss;
        return out;
    }
    if (cluster_logits.rows() != pseudo.labels.size())
        throw ShapeError("combined_loss: " + std::to_string(cluster_logits.rows()) + " cluster rows for " +
                         std::to_string(pseudo.labels.size()) + " pseudo labels");
    Tensor clust = ops::cross_entropy(cluster_logits, pseudo.labels);
    out.total = ops::add(seg, ops::scale(clust, lambda));
    out.report.clust_loss = clust.item();
    out.report.total = out.total.item();
    return out;
}

MiouResult miou(const ConfusionMatrix& conf) {
    if (conf.total() == 0) throw Error("miou: empty confusion matrix");
    const std::size_t n = conf.num_classes();
    MiouResult r;
    r.iou.assign(n, std::numeric_limits<double>::quiet_NaN());
    double sum = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::uint64_t tp = conf.at(c, c), fp = 0, fn = 0;
        for (std::size_t o = 0; o < n; ++o) {
            if (o == c) continue;
            fp += conf.at(o, c);
            fn += conf.at(c, o);
        }
        const std::uint64_t denom = tp + fp + fn;
        if (denom == 0) continue;
        r.iou[c] = static_cast<double>(tp) / static_cast<double>(denom);
        sum += r.iou[c];
        ++r.classes_counted;
    }
    r.miou = sum / static_cast<double>(r.classes_counted);
    return r;
}

std::vector<int> argmax_rows(const Tensor& logits) {
    const std::size_t n = logits.rows(), c = logits.cols();
    std::vector<int> out(n);
    const auto v = logits.data();
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < c; ++j)
            if (v[r * c + j] > v[r * c + best]) best = j;
        out[r] = static_cast<int>(best);
    }
    return out;
}

std::vector<int> mask_indices(const Mask& mask) {
    std::vector<int> out(mask.labels.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask.labels[i] - 1;
    return out;
}

}  // namespace metrics

}  // namespace clustvit
