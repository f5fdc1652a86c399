#pragma once

// Analytic FLOPs model with a dynamic token count after the injection point.
//
// Counting rule: FLOPs = 2 * MACs, matmuls only. LayerNorm, softmax, GELU,
// residual adds, gathers, means and the bilinear upsampling count as zero.
// Per transformer block on n tokens with width D and FFN width F:
//   QKV 3nD^2 + scores n^2 D + attn*V n^2 D + proj nD^2 + FFN 2nDF
// which with F = 4D is 12 n D^2 + 2 n^2 D MACs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clustvit/data_synth.hpp"
#include "clustvit/model.hpp"

namespace clustvit {

struct FlopBreakdown {
    std::uint64_t embed = 0;
    std::uint64_t prefix = 0;
    std::uint64_t cluster = 0;
    std::uint64_t suffix = 0;
    std::uint64_t regenerator = 0;
    std::uint64_t head = 0;

    std::uint64_t total() const { return embed + prefix + cluster + suffix + regenerator + head; }
    bool operator==(const FlopBreakdown&) const = default;
};

struct CostReport {
    std::vector<std::string> ids;
    std::vector<std::uint64_t> per_image_flops;
    std::vector<std::size_t> tokens_after_ip;
    std::vector<FlopBreakdown> breakdowns;
    double mean = 0.0;
    double std = 0.0;  // population
    // Component means over the dataset, in FLOPs.
    double mean_embed = 0, mean_prefix = 0, mean_cluster = 0, mean_suffix = 0, mean_regenerator = 0, mean_head = 0;
};

struct HistogramBin {
    std::size_t low;   // inclusive
    std::size_t high;  // exclusive
    std::size_t count;
};

namespace flops {

// One transformer block on n tokens (FFN width defaults to 4D).
std::uint64_t block_flops(std::size_t n, std::size_t dim, std::size_t heads, std::size_t ffn = 0);

// Full model on one image whose reduced sequence has tokens_after_ip tokens,
// active_clusters of them representatives. Throws ConfigError for
// inconsistent counts.
FlopBreakdown model_flops(const EncoderConfig& cfg, std::size_t tokens_after_ip, std::size_t active_clusters);
// Assumes all k clusters are active whenever tokens_after_ip < 1 + N.
FlopBreakdown model_flops(const EncoderConfig& cfg, std::size_t tokens_after_ip);
FlopBreakdown vanilla_flops(const EncoderConfig& cfg);

// Largest tokens_after_ip (with all k clusters active) at which the clustered
// model is cheaper than the vanilla ViT; nullopt if there is none.
std::optional<std::size_t> break_even_tokens(const EncoderConfig& cfg);

// Runs the forward pass with a MAC counter installed and converts to FLOPs.
FlopBreakdown instrumented_flops(const ClustViT& model, const Image& image,
                                 std::optional<std::span<const int>> merge_assignment = std::nullopt);

CostReport summarize(std::vector<std::string> ids, std::vector<std::size_t> tokens, std::vector<FlopBreakdown> breakdowns);

// Inference over every sample; analytic cost from the observed token counts.
CostReport dataset_cost(const ClustViT& model, const std::vector<Sample>& samples);

// Bins [low, low + width) covering [1, 1 + N].
std::vector<HistogramBin> token_histogram(const std::vector<std::size_t>& tokens, std::size_t max_tokens,
                                          std::size_t bin_width);

// Single-threaded single-image forwards per second after `warmup` discarded runs.
double throughput(const ClustViT& model, const std::vector<Image>& images, std::size_t warmup, std::size_t iters);

void write_cost_csv(const std::filesystem::path& path, const CostReport& r);
void write_cost_summary_csv(const std::filesystem::path& path, const CostReport& r);
void write_histogram_csv(const std::filesystem::path& path, const std::vector<HistogramBin>& bins);

}  // namespace flops

}  // namespace clustvit
