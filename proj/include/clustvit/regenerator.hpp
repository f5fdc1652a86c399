#pragma once

// Regenerator block: splits the suffix output back into CLS, unclustered
// tokens and updated representatives, expands each representative to its
// member positions, refines every reinstated token against its pre-merge
// residual and scatters everything back to the original 1+N layout.

#include "clustvit/cluster.hpp"

namespace clustvit {

struct RegeneratorParams {
    Tensor fc1_weight, fc1_bias;  // 2D x D, D
    Tensor fc2_weight, fc2_bias;  // D x D, D
    bool skip = false;            // adds the expanded representative to the MLP output

    static RegeneratorParams create(const EncoderConfig& cfg, ParameterSet& params, Rng& rng);
};

struct SplitTokens {
    Tensor cls;              // 1 x D
    Tensor unclustered;      // N_unclustered x D
    Tensor representatives;  // k_active x D
};

namespace regen {

// Inverse of cluster::reduce's concatenation. Throws ShapeError on a length
// that disagrees with the index.
SplitTokens split(const TokenSequence& z_out, const AssignmentIndex& index);

// Row i is the representative of the cluster that clustered_order()[i] belongs to.
Tensor expand(const Tensor& representatives, const AssignmentIndex& index);

// Linear_2(GELU(Linear_1([residual | expanded]))) per row.
Tensor refine(const Tensor& residuals, const Tensor& expanded, const RegeneratorParams& p);

// Scatters rows back to original positions with CLS at 0.
TokenSequence reassemble(const Tensor& cls, const Tensor& unclustered, const Tensor& refined,
                         const AssignmentIndex& index, std::size_t grid_rows, std::size_t grid_cols);

// split -> expand -> refine -> reassemble; returns z_out untouched when no
// token was clustered.
TokenSequence regenerate(const TokenSequence& z_out, const AssignmentIndex& index, const RegeneratorParams& p);

}  // namespace regen

}  // namespace clustvit
