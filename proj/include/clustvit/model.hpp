#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "clustvit/cluster.hpp"
#include "clustvit/regenerator.hpp"
#include "clustvit/vit.hpp"

namespace clustvit {

struct ForwardResult {
    Tensor seg_logits;             // (H*W) x C
    Tensor cluster_logits;         // N x (k+1); undefined on the vanilla path
    std::vector<int> assignment;   // merge assignment actually used; empty on the vanilla path
    std::size_t tokens_after_ip;   // sequence length seen by the suffix blocks
    TokenSequence final_tokens;    // encoder output handed to the head (1+N rows)
};

// ViT encoder with a cluster block after `injection_point` blocks and a
// regenerator before the head. With clusters == 0 it is a plain ViT.
class ClustViT {
public:
    ClustViT(EncoderConfig cfg, std::uint64_t seed);

    ClustViT(const ClustViT&) = delete;
    ClustViT& operator=(const ClustViT&) = delete;
    ClustViT(ClustViT&&) = default;
    ClustViT& operator=(ClustViT&&) = default;

    const EncoderConfig& config() const { return cfg_; }
    ParameterSet& parameters() { return params_; }
    const ParameterSet& parameters() const { return params_; }
    const EncoderParams& encoder() const { return encoder_; }
    const ClusterParams& cluster() const { return cluster_; }
    const RegeneratorParams& regenerator() const { return regen_; }

    // Full pipeline. When `merge_assignment` is given it replaces the argmax
    // of the cluster logits (teacher forcing or synthetic assignments); the
    // logits are still computed and returned.
    ForwardResult forward(const Image& image, std::optional<std::span<const int>> merge_assignment = std::nullopt) const;

    // All L blocks on the full sequence, skipping cluster and regenerator.
    ForwardResult forward_vanilla(const Image& image) const;

private:
    EncoderConfig cfg_;
    ParameterSet params_;
    EncoderParams encoder_;
    ClusterParams cluster_;
    RegeneratorParams regen_;
};

}  // namespace clustvit
