#include "clustvit/regenerator.hpp"

#include <stdexcept>

#include "clustvit/errors.hpp"
#include "clustvit/ops.hpp"

namespace clustvit {

RegeneratorParams RegeneratorParams::create(const EncoderConfig& cfg, ParameterSet& params, Rng& rng) {
    const std::size_t d = cfg.embed_dim;
    RegeneratorParams p;
    p.fc1_weight = params.add_glorot("regen.fc1.weight", 2 * d, d, rng);
    p.fc1_bias = params.add_zeros("regen.fc1.bias", {d});
    p.fc2_weight = params.add_glorot("regen.fc2.weight", d, d, rng);
    p.fc2_bias = params.add_zeros("regen.fc2.bias", {d});
    p.skip = cfg.refine_skip;
    return p;
}

namespace regen {

SplitTokens split(const TokenSequence& z_out, const AssignmentIndex& index) {
    const std::size_t kept = index.kept.size(), active = index.active_count();
    if (z_out.length() != 1 + kept + active)
        throw ShapeError("index/sequence disagreement: sequence has " + std::to_string(z_out.length()) +
                         " tokens, index expects 1 + " + std::to_string(kept) + " + " + std::to_string(active));
    return {ops::slice_rows(z_out.tokens, 0, 1), ops::slice_rows(z_out.tokens, 1, kept),
            ops::slice_rows(z_out.tokens, 1 + kept, active)};
}

Tensor expand(const Tensor& representatives, const AssignmentIndex& index) {
    std::vector<std::size_t> rows;
    rows.reserve(index.clustered_count());
    std::size_t slot = 0;
    for (const auto& m : index.members) {
        if (m.empty()) continue;
        rows.insert(rows.end(), m.size(), slot++);
    }
    if (slot != representatives.rows())
        throw ShapeError("expand: " + std::to_string(representatives.rows()) + " representatives for " +
                         std::to_string(slot) + " active clusters");
    return ops::gather_rows(representatives, rows);
}

Tensor refine(const Tensor& residuals, const Tensor& expanded, const RegeneratorParams& p) {
    if (residuals.rows() != expanded.rows())
        throw ShapeError("refine: " + std::to_string(residuals.rows()) + " residual rows vs " +
                         std::to_string(expanded.rows()) + " expanded rows");
    if (residuals.rows() == 0) return Tensor::zeros({0, expanded.cols()});
    ops::MacTag tag("regenerator");
    const Tensor parts[] = {residuals, expanded};
    Tensor hidden = ops::gelu(ops::linear(ops::concat_cols(parts), p.fc1_weight, p.fc1_bias));
    Tensor out = ops::linear(hidden, p.fc2_weight, p.fc2_bias);
    return p.skip ? ops::add(out, expanded) : out;
}

TokenSequence reassemble(const Tensor& cls, const Tensor& unclustered, const Tensor& refined,
                         const AssignmentIndex& index, std::size_t grid_rows, std::size_t grid_cols) {
    const std::size_t n = index.num_patches();
    if (unclustered.rows() + refined.rows() != n)
        throw ShapeError("reassemble: " + std::to_string(unclustered.rows()) + " + " + std::to_string(refined.rows()) +
                         " rows for " + std::to_string(n) + " patches");
    // Stacked source layout: [cls; unclustered; refined]. source[pos] picks
    // the stacked row for output position pos.
    constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
    std::vector<std::size_t> source(1 + n, kUnset);
    source[0] = 0;
    auto place = [&](std::size_t patch, std::size_t row) {
        if (patch >= n || source[1 + patch] != kUnset)
            throw std::logic_error("reassemble: patch " + std::to_string(patch) + " written twice or out of range");
        source[1 + patch] = row;
    };
    for (std::size_t i = 0; i < index.kept.size(); ++i) place(index.kept[i], 1 + i);
    const auto order = index.clustered_order();
    for (std::size_t i = 0; i < order.size(); ++i) place(order[i], 1 + index.kept.size() + i);
    for (std::size_t pos = 0; pos <= n; ++pos)
        if (source[pos] == kUnset) throw std::logic_error("reassemble: position " + std::to_string(pos) + " left empty");

    const Tensor parts[] = {cls, unclustered, refined};
    return {ops::gather_rows(ops::concat_rows(parts), source), grid_rows, grid_cols};
}

TokenSequence regenerate(const TokenSequence& z_out, const AssignmentIndex& index, const RegeneratorParams& p) {
    if (index.clustered_count() == 0) {
        if (z_out.length() != 1 + index.num_patches())
            throw ShapeError("index/sequence disagreement: pass-through expects the full sequence");
        return z_out;
    }
    SplitTokens parts = split(z_out, index);
    Tensor expanded = expand(parts.representatives, index);
    Tensor refined = refine(index.residuals, expanded, p);
    return reassemble(parts.cls, parts.unclustered, refined, index, z_out.grid_rows, z_out.grid_cols);
}

}  // namespace regen

}  // namespace clustvit
