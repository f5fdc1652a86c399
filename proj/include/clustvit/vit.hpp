#pragma once

// Plain ViT encoder split into a prefix (blocks before the injection point)
// and a length-agnostic suffix, plus a per-token linear segmentation head.

#include <cstddef>
#include <string>
#include <vector>

#include "clustvit/image.hpp"
#include "clustvit/optim.hpp"
#include "clustvit/tensor.hpp"

namespace clustvit {

struct EncoderConfig {
    std::size_t image_height = 64;
    std::size_t image_width = 64;
    std::size_t patch_size = 8;
    std::size_t embed_dim = 96;
    std::size_t num_layers = 8;
    std::size_t num_heads = 4;
    std::size_t ffn_hidden = 0;      // 0 -> 4 * embed_dim
    std::size_t num_classes = 3;
    std::size_t clusters = 3;        // k; 0 disables the cluster path (vanilla ViT)
    std::size_t injection_point = 4; // ip: cluster block runs after this many blocks
    std::size_t cluster_hidden = 0;  // 0 -> ceil(embed_dim * 129 / 32)
    bool refine_skip = false;        // optional residual skip around the refine MLP
    std::string scale = "tiny-desk";

    std::size_t grid_rows() const { return image_height / patch_size; }
    std::size_t grid_cols() const { return image_width / patch_size; }
    std::size_t num_patches() const { return grid_rows() * grid_cols(); }
    std::size_t patch_dim() const { return patch_size * patch_size * 3; }
    std::size_t ffn_dim() const { return ffn_hidden ? ffn_hidden : 4 * embed_dim; }
    std::size_t cluster_mlp_hidden() const;
    bool clustering() const { return clusters > 0; }

    // Throws ConfigError describing the first violated constraint.
    void validate() const;

    // "tiny-desk" plus the full-size analogs "tiny", "small", "base", "large"
    // (640x640 input, patch 16) used for FLOPs modeling.
    static EncoderConfig preset(const std::string& name);
};

struct TokenSequence {
    Tensor tokens;  // (1 + n) x D, CLS at row 0
    std::size_t grid_rows = 0;
    std::size_t grid_cols = 0;

    std::size_t length() const { return tokens.rows(); }
    std::size_t full_length() const { return 1 + grid_rows * grid_cols; }
};

struct BlockParams {
    Tensor ln1_gain, ln1_bias;
    Tensor qkv_weight, qkv_bias;
    Tensor proj_weight, proj_bias;
    Tensor ln2_gain, ln2_bias;
    Tensor fc1_weight, fc1_bias;
    Tensor fc2_weight, fc2_bias;
};

struct EncoderParams {
    Tensor patch_weight, patch_bias;  // (3 P^2) x D, D
    Tensor pos_embed;                 // N x D, patch tokens only
    Tensor cls_token;                 // 1 x D
    std::vector<BlockParams> blocks;
    Tensor head_weight, head_bias;    // D x C, C

    static EncoderParams create(const EncoderConfig& cfg, ParameterSet& params, Rng& rng);
};

namespace vit {

// N x (3 P^2) matrix of flattened patches in row-major grid order; each row is
// the patch's pixels in row-major order with interleaved RGB.
Tensor flatten_patches(const Image& image, const EncoderConfig& cfg);

TokenSequence patchify_embed(const Image& image, const EncoderParams& p, const EncoderConfig& cfg);

// Pre-norm MHSA and FFN with residuals. When attention is non-null it receives
// one (n x n) probability matrix per head.
TokenSequence transformer_block(const TokenSequence& z, const BlockParams& p, std::size_t num_heads,
                                std::vector<Tensor>* attention = nullptr);

// Blocks [begin, end).
TokenSequence encode_range(const TokenSequence& z, const EncoderParams& p, const EncoderConfig& cfg,
                           std::size_t begin, std::size_t end);
TokenSequence encode_prefix(const TokenSequence& z, const EncoderParams& p, const EncoderConfig& cfg);
TokenSequence encode_suffix(const TokenSequence& z, const EncoderParams& p, const EncoderConfig& cfg);

// Drops CLS, projects each token to class logits and bilinearly upsamples by
// the patch size. Returns (H*W) x C. Throws ShapeError("regenerate first") on
// a reduced-length sequence.
Tensor seg_head(const TokenSequence& z, const EncoderParams& p, const EncoderConfig& cfg);

}  // namespace vit

}  // namespace clustvit
