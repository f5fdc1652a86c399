#include "clustvit/cluster.hpp"

#include "clustvit/errors.hpp"
#include "clustvit/ops.hpp"

namespace clustvit {

ClusterParams ClusterParams::create(const EncoderConfig& cfg, ParameterSet& params, Rng& rng) {
    const std::size_t d = cfg.embed_dim, h = cfg.cluster_mlp_hidden(), out = cfg.clusters + 1;
    ClusterParams p;
    p.fc1_weight = params.add_glorot("cluster.fc1.weight", d, h, rng);
    p.fc1_bias = params.add_zeros("cluster.fc1.bias", {h});
    p.fc2_weight = params.add_glorot("cluster.fc2.weight", h, out, rng);
    p.fc2_bias = params.add_zeros("cluster.fc2.bias", {out});
    return p;
}

std::vector<int> AssignmentIndex::active_clusters() const {
    std::vector<int> ids;
    for (std::size_t c = 0; c < members.size(); ++c)
        if (!members[c].empty()) ids.push_back(static_cast<int>(c + 1));
    return ids;
}

std::vector<std::size_t> AssignmentIndex::clustered_order() const {
    std::vector<std::size_t> order;
    order.reserve(clustered_count());
    for (const auto& m : members) order.insert(order.end(), m.begin(), m.end());
    return order;
}

namespace cluster {

Tensor cluster_logits(const TokenSequence& z, const ClusterParams& p) {
    ops::MacTag tag("cluster");
    Tensor patches = ops::slice_rows(z.tokens, 1, z.length() - 1);
    return ops::linear(ops::relu(ops::linear(patches, p.fc1_weight, p.fc1_bias)), p.fc2_weight, p.fc2_bias);
}

std::vector<int> assign(const Tensor& logits) {
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    std::vector<int> out(n, 0);
    const auto v = logits.data();
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < c; ++j)
            if (v[r * c + j] > v[r * c + best]) best = j;
        out[r] = static_cast<int>(best);
    }
    return out;
}

Aggregation aggregate(const TokenSequence& z, std::span<const int> assignment, std::size_t k) {
    const std::size_t n = z.length() - 1;
    if (assignment.size() != n)
        throw ShapeError("aggregate: " + std::to_string(assignment.size()) + " assignments for " + std::to_string(n) +
                         " patch tokens");
    Aggregation agg;
    AssignmentIndex& idx = agg.index;
    idx.assignment.assign(assignment.begin(), assignment.end());
    idx.members.resize(k);
    for (std::size_t i = 0; i < n; ++i) {
        const int c = assignment[i];
        if (c < 0 || static_cast<std::size_t>(c) > k)
            throw ShapeError("aggregate: cluster id " + std::to_string(c) + " outside [0, " + std::to_string(k) + "]");
        if (c == 0)
            idx.kept.push_back(i);
        else
            idx.members[static_cast<std::size_t>(c - 1)].push_back(i);
    }

    // Rows of z.tokens are offset by one for CLS.
    Tensor patches = ops::slice_rows(z.tokens, 1, n);
    std::vector<std::vector<std::size_t>> groups;
    for (const auto& m : idx.members)
        if (!m.empty()) groups.push_back(m);
    idx.residuals = ops::gather_rows(patches, idx.clustered_order());
    agg.representatives = ops::segment_mean(patches, groups);
    return agg;
}

TokenSequence reduce(const TokenSequence& z, const Aggregation& agg) {
    if (agg.index.clustered_count() == 0) return z;
    std::vector<std::size_t> rows{0};
    for (std::size_t i : agg.index.kept) rows.push_back(i + 1);
    const Tensor parts[] = {ops::gather_rows(z.tokens, rows), agg.representatives};
    return {ops::concat_rows(parts), z.grid_rows, z.grid_cols};
}

}  // namespace cluster

}  // namespace clustvit
