#include "clustvit/model.hpp"

#include "clustvit/errors.hpp"
#include "clustvit/ops.hpp"

namespace clustvit {

ClustViT::ClustViT(EncoderConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed);
    // Encoder first so a vanilla model with the same seed shares its weights.
    encoder_ = EncoderParams::create(cfg_, params_, rng);
    if (cfg_.clustering()) {
        cluster_ = ClusterParams::create(cfg_, params_, rng);
        regen_ = RegeneratorParams::create(cfg_, params_, rng);
    }
}

ForwardResult ClustViT::forward_vanilla(const Image& image) const {
    TokenSequence z = vit::patchify_embed(image, encoder_, cfg_);
    {
        ops::MacTag tag("prefix");
        z = vit::encode_range(z, encoder_, cfg_, 0, cfg_.num_layers);
    }
    ForwardResult r;
    r.tokens_after_ip = z.length();
    r.seg_logits = vit::seg_head(z, encoder_, cfg_);
    r.final_tokens = std::move(z);
    return r;
}

ForwardResult ClustViT::forward(const Image& image, std::optional<std::span<const int>> merge_assignment) const {
    if (!cfg_.clustering()) return forward_vanilla(image);

    TokenSequence z = vit::patchify_embed(image, encoder_, cfg_);
    z = vit::encode_prefix(z, encoder_, cfg_);

    ForwardResult r;
    r.cluster_logits = cluster::cluster_logits(z, cluster_);
    if (merge_assignment) {
        if (merge_assignment->size() != cfg_.num_patches())
            throw ShapeError("forward: merge assignment has " + std::to_string(merge_assignment->size()) +
                             " entries, expected " + std::to_string(cfg_.num_patches()));
        r.assignment.assign(merge_assignment->begin(), merge_assignment->end());
    } else {
        r.assignment = cluster::assign(r.cluster_logits);
    }

    Aggregation agg = cluster::aggregate(z, r.assignment, cfg_.clusters);
    z = cluster::reduce(z, agg);
    r.tokens_after_ip = z.length();
    z = vit::encode_suffix(z, encoder_, cfg_);
    z = regen::regenerate(z, agg.index, regen_);
    r.seg_logits = vit::seg_head(z, encoder_, cfg_);
    r.final_tokens = std::move(z);
    return r;
}

}  // namespace clustvit
