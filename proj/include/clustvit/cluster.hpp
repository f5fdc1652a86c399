#pragma once

// Token cluster block: a two-layer MLP predicts one of k clusters (or 0 =
// unclustered) per patch token, each non-empty cluster is replaced by the mean
// of its members, and the bookkeeping needed to undo the merge is recorded.

#include <cstddef>
#include <span>
#include <vector>

#include "clustvit/optim.hpp"
#include "clustvit/tensor.hpp"
#include "clustvit/vit.hpp"

namespace clustvit {

struct ClusterParams {
    Tensor fc1_weight, fc1_bias;  // D x H, H
    Tensor fc2_weight, fc2_bias;  // H x (k+1), k+1

    static ClusterParams create(const EncoderConfig& cfg, ParameterSet& params, Rng& rng);
};

struct AssignmentIndex {
    std::vector<int> assignment;                    // per patch, in {0..k}
    std::vector<std::size_t> kept;                  // patches with assignment 0, ascending
    std::vector<std::vector<std::size_t>> members;  // members[c-1] for cluster c, ascending
    Tensor residuals;                               // pre-merge clustered tokens, N_clustered x D

    std::size_t num_patches() const { return assignment.size(); }
    std::size_t clusters() const { return members.size(); }
    std::size_t clustered_count() const { return num_patches() - kept.size(); }
    // Cluster ids (1..k) with at least one member, ascending.
    std::vector<int> active_clusters() const;
    std::size_t active_count() const { return active_clusters().size(); }
    // Original patch indices of the residual rows: members concatenated in cluster-id order.
    std::vector<std::size_t> clustered_order() const;
    // Sequence length after reduce(): 1 + N_unclustered + k_active.
    std::size_t reduced_length() const { return 1 + kept.size() + active_count(); }
};

struct Aggregation {
    Tensor representatives;  // k_active x D
    AssignmentIndex index;
};

namespace cluster {

// N x (k+1) logits for the patch tokens of z (CLS excluded).
Tensor cluster_logits(const TokenSequence& z, const ClusterParams& p);

// Per-row argmax; ties resolve to the lowest class index.
std::vector<int> assign(const Tensor& logits);

// Groups patch tokens of z by assignment. Empty clusters get no representative.
Aggregation aggregate(const TokenSequence& z, std::span<const int> assignment, std::size_t k);

// [CLS; kept tokens in original order; representatives in cluster-id order].
// Returns z unchanged when nothing was clustered.
TokenSequence reduce(const TokenSequence& z, const Aggregation& agg);

}  // namespace cluster

}  // namespace clustvit
