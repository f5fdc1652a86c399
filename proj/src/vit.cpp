#include "clustvit/vit.hpp"

#include <cmath>
#include <numeric>

#include "clustvit/errors.hpp"
#include "clustvit/ops.hpp"

namespace clustvit {

std::size_t EncoderConfig::cluster_mlp_hidden() const {
    if (cluster_hidden) return cluster_hidden;
    // 774 / 192 = 1548 / 384 = 3096 / 768 = 129 / 32
    return (embed_dim * 129 + 31) / 32;
}

void EncoderConfig::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("encoder config: " + what); };
    if (patch_size == 0 || image_height == 0 || image_width == 0) fail("image and patch sizes must be positive");
    if (image_height % patch_size || image_width % patch_size)
        fail("image " + std::to_string(image_height) + "x" + std::to_string(image_width) +
             " is not divisible by patch size " + std::to_string(patch_size));
    if (embed_dim == 0 || num_heads == 0 || embed_dim % num_heads)
        fail("embed_dim " + std::to_string(embed_dim) + " is not divisible by num_heads " + std::to_string(num_heads));
    if (num_layers == 0) fail("num_layers must be positive");
    if (num_classes < 1) fail("num_classes must be positive");
    if (clustering() && (injection_point < 1 || injection_point > num_layers))
        fail("injection_point " + std::to_string(injection_point) + " outside [1, " + std::to_string(num_layers) + "]");
}

EncoderConfig EncoderConfig::preset(const std::string& name) {
    EncoderConfig c;
    if (name == "tiny-desk") return c;
    c.image_height = c.image_width = 640;
    c.patch_size = 16;
    c.num_classes = 150;
    c.clusters = 3;
    c.injection_point = 4;
    c.scale = name;
    if (name == "tiny") {
        c.embed_dim = 192, c.num_layers = 12, c.num_heads = 3;
    } else if (name == "small") {
        c.embed_dim = 384, c.num_layers = 12, c.num_heads = 6;
    } else if (name == "base") {
        c.embed_dim = 768, c.num_layers = 12, c.num_heads = 12;
    } else if (name == "large") {
        c.embed_dim = 1024, c.num_layers = 24, c.num_heads = 16;
    } else {
        throw ConfigError("unknown model preset '" + name + "'");
    }
    return c;
}

EncoderParams EncoderParams::create(const EncoderConfig& cfg, ParameterSet& params, Rng& rng) {
    cfg.validate();
    const std::size_t d = cfg.embed_dim, f = cfg.ffn_dim();
    EncoderParams p;
    p.patch_weight = params.add_glorot("embed.patch.weight", cfg.patch_dim(), d, rng);
    p.patch_bias = params.add_zeros("embed.patch.bias", {d});
    p.pos_embed = params.add_glorot("embed.pos", cfg.num_patches(), d, rng);
    p.cls_token = params.add_glorot("embed.cls", 1, d, rng);
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        const std::string pre = "block" + std::to_string(l) + ".";
        BlockParams b;
        b.ln1_gain = params.add_full(pre + "ln1.gain", {d}, 1.0);
        b.ln1_bias = params.add_zeros(pre + "ln1.bias", {d});
        b.qkv_weight = params.add_glorot(pre + "attn.qkv.weight", d, 3 * d, rng);
        b.qkv_bias = params.add_zeros(pre + "attn.qkv.bias", {3 * d});
        b.proj_weight = params.add_glorot(pre + "attn.proj.weight", d, d, rng);
        b.proj_bias = params.add_zeros(pre + "attn.proj.bias", {d});
        b.ln2_gain = params.add_full(pre + "ln2.gain", {d}, 1.0);
        b.ln2_bias = params.add_zeros(pre + "ln2.bias", {d});
        b.fc1_weight = params.add_glorot(pre + "ffn.fc1.weight", d, f, rng);
        b.fc1_bias = params.add_zeros(pre + "ffn.fc1.bias", {f});
        b.fc2_weight = params.add_glorot(pre + "ffn.fc2.weight", f, d, rng);
        b.fc2_bias = params.add_zeros(pre + "ffn.fc2.bias", {d});
        p.blocks.push_back(std::move(b));
    }
    p.head_weight = params.add_glorot("head.weight", d, cfg.num_classes, rng);
    p.head_bias = params.add_zeros("head.bias", {cfg.num_classes});
    return p;
}

namespace vit {

Tensor flatten_patches(const Image& image, const EncoderConfig& cfg) {
    if (image.height != cfg.image_height || image.width != cfg.image_width)
        throw ConfigError("image is " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                          ", model expects " + std::to_string(cfg.image_height) + "x" +
                          std::to_string(cfg.image_width));
    const std::size_t ps = cfg.patch_size, rows = cfg.grid_rows(), cols = cfg.grid_cols();
    const std::size_t pd = cfg.patch_dim();
    std::vector<double> flat(rows * cols * pd);
    for (std::size_t gr = 0; gr < rows; ++gr)
        for (std::size_t gc = 0; gc < cols; ++gc) {
            double* dst = flat.data() + (gr * cols + gc) * pd;
            for (std::size_t y = 0; y < ps; ++y) {
                const double* src = &image.rgb[((gr * ps + y) * image.width + gc * ps) * 3];
                std::copy_n(src, ps * 3, dst + y * ps * 3);
            }
        }
    return Tensor::from({rows * cols, pd}, std::move(flat));
}

TokenSequence patchify_embed(const Image& image, const EncoderParams& p, const EncoderConfig& cfg) {
    ops::MacTag tag("embed");
    Tensor patches = flatten_patches(image, cfg);
    Tensor emb = ops::add(ops::linear(patches, p.patch_weight, p.patch_bias), p.pos_embed);
    const Tensor parts[] = {p.cls_token, emb};
    return {ops::concat_rows(parts), cfg.grid_rows(), cfg.grid_cols()};
}

TokenSequence transformer_block(const TokenSequence& z, const BlockParams& p, std::size_t num_heads,
                                std::vector<Tensor>* attention) {
    const Tensor& x = z.tokens;
    const std::size_t d = x.cols(), dh = d / num_heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor h = ops::layer_norm(x, p.ln1_gain, p.ln1_bias);
    Tensor qkv = ops::linear(h, p.qkv_weight, p.qkv_bias);
    std::vector<Tensor> heads;
    heads.reserve(num_heads);
    for (std::size_t i = 0; i < num_heads; ++i) {
        Tensor q = ops::slice_cols(qkv, i * dh, dh);
        Tensor k = ops::slice_cols(qkv, d + i * dh, dh);
        Tensor v = ops::slice_cols(qkv, 2 * d + i * dh, dh);
        Tensor probs = ops::softmax(ops::scale(ops::matmul_nt(q, k), inv_sqrt));
        if (attention) attention->push_back(probs);
        heads.push_back(ops::matmul(probs, v));
    }
    Tensor attn = ops::linear(ops::concat_cols(heads), p.proj_weight, p.proj_bias);
    Tensor x1 = ops::add(x, attn);

    Tensor h2 = ops::layer_norm(x1, p.ln2_gain, p.ln2_bias);
    Tensor ffn = ops::linear(ops::gelu(ops::linear(h2, p.fc1_weight, p.fc1_bias)), p.fc2_weight, p.fc2_bias);
    return {ops::add(x1, ffn), z.grid_rows, z.grid_cols};
}

TokenSequence encode_range(const TokenSequence& z, const EncoderParams& p, const EncoderConfig& cfg,
                           std::size_t begin, std::size_t end) {
    TokenSequence out = z;
    for (std::size_t l = begin; l < end; ++l) out = transformer_block(out, p.blocks.at(l), cfg.num_heads);
    return out;
}

TokenSequence encode_prefix(const TokenSequence& z, const EncoderParams& p, const EncoderConfig& cfg) {
    ops::MacTag tag("prefix");
    return encode_range(z, p, cfg, 0, cfg.injection_point);
}

TokenSequence encode_suffix(const TokenSequence& z, const EncoderParams& p, const EncoderConfig& cfg) {
    ops::MacTag tag("suffix");
    return encode_range(z, p, cfg, cfg.injection_point, cfg.num_layers);
}

Tensor seg_head(const TokenSequence& z, const EncoderParams& p, const EncoderConfig& cfg) {
    if (z.length() != z.full_length())
        throw ShapeError("seg_head: sequence has " + std::to_string(z.length()) + " tokens, expected " +
                         std::to_string(z.full_length()) + "; regenerate first");
    ops::MacTag tag("head");
    Tensor patches = ops::slice_rows(z.tokens, 1, z.length() - 1);
    Tensor logits = ops::linear(patches, p.head_weight, p.head_bias);
    return ops::upsample_bilinear(logits, z.grid_rows, z.grid_cols, cfg.patch_size);
}

}  // namespace vit

}  // namespace clustvit
