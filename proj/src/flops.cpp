#include "clustvit/flops.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "clustvit/errors.hpp"
#include "clustvit/kernels.hpp"
#include "clustvit/ops.hpp"

namespace clustvit::flops {

std::uint64_t block_flops(std::size_t n, std::size_t dim, std::size_t /*heads*/, std::size_t ffn) {
    if (n == 0) throw ConfigError("block_flops: token count must be positive");
    const std::uint64_t N = n, D = dim, F = ffn ? ffn : 4 * dim;
    const std::uint64_t macs = 4 * N * D * D + 2 * N * D * F + 2 * N * N * D;
    return 2 * macs;
}

namespace {

FlopBreakdown common(const EncoderConfig& cfg) {
    FlopBreakdown b;
    const std::uint64_t N = cfg.num_patches(), D = cfg.embed_dim;
    b.embed = 2 * N * cfg.patch_dim() * D;
    b.head = 2 * N * D * cfg.num_classes;
    return b;
}

}  // namespace

FlopBreakdown vanilla_flops(const EncoderConfig& cfg) {
    FlopBreakdown b = common(cfg);
    b.prefix = cfg.num_layers * block_flops(1 + cfg.num_patches(), cfg.embed_dim, cfg.num_heads, cfg.ffn_dim());
    return b;
}

FlopBreakdown model_flops(const EncoderConfig& cfg, std::size_t tokens_after_ip, std::size_t active_clusters) {
    if (!cfg.clustering()) {
        if (tokens_after_ip != 1 + cfg.num_patches())
            throw ConfigError("model_flops: a vanilla model never reduces its sequence");
        return vanilla_flops(cfg);
    }
    const std::size_t N = cfg.num_patches();
    if (tokens_after_ip < 1 + active_clusters || tokens_after_ip > 1 + N)
        throw ConfigError("model_flops: tokens_after_ip " + std::to_string(tokens_after_ip) + " outside [" +
                          std::to_string(1 + active_clusters) + ", " + std::to_string(1 + N) + "]");
    if (active_clusters > cfg.clusters) throw ConfigError("model_flops: more active clusters than k");
    const std::size_t unclustered = tokens_after_ip - 1 - active_clusters;
    const std::size_t clustered = N - unclustered;
    if (clustered < active_clusters || (clustered > 0 && active_clusters == 0))
        throw ConfigError("model_flops: " + std::to_string(clustered) + " clustered tokens cannot form " +
                          std::to_string(active_clusters) + " non-empty clusters");

    FlopBreakdown b = common(cfg);
    const std::uint64_t D = cfg.embed_dim, H = cfg.cluster_mlp_hidden(), K1 = cfg.clusters + 1;
    b.prefix = cfg.injection_point * block_flops(1 + N, D, cfg.num_heads, cfg.ffn_dim());
    b.cluster = 2 * static_cast<std::uint64_t>(N) * (D * H + H * K1);
    if (cfg.num_layers > cfg.injection_point)
        b.suffix = (cfg.num_layers - cfg.injection_point) * block_flops(tokens_after_ip, D, cfg.num_heads, cfg.ffn_dim());
    b.regenerator = 2 * static_cast<std::uint64_t>(clustered) * (2 * D * D + D * D);
    return b;
}

FlopBreakdown model_flops(const EncoderConfig& cfg, std::size_t tokens_after_ip) {
    const bool reduced = tokens_after_ip < 1 + cfg.num_patches();
    return model_flops(cfg, tokens_after_ip, reduced ? cfg.clusters : 0);
}

std::optional<std::size_t> break_even_tokens(const EncoderConfig& cfg) {
    if (!cfg.clustering()) return std::nullopt;
    const std::uint64_t vanilla = vanilla_flops(cfg).total();
    std::optional<std::size_t> best;
    for (std::size_t t = 1 + cfg.clusters; t < 1 + cfg.num_patches(); ++t)
        if (model_flops(cfg, t, cfg.clusters).total() < vanilla) best = t;
    return best;
}

FlopBreakdown instrumented_flops(const ClustViT& model, const Image& image,
                                 std::optional<std::span<const int>> merge_assignment) {
    NoGradGuard no_grad;
    ops::MacCounter counter;
    model.forward(image, merge_assignment);
    FlopBreakdown b;
    b.embed = 2 * counter.at("embed");
    b.prefix = 2 * counter.at("prefix");
    b.cluster = 2 * counter.at("cluster");
    b.suffix = 2 * counter.at("suffix");
    b.regenerator = 2 * counter.at("regenerator");
    b.head = 2 * counter.at("head");
    if (b.total() != 2 * counter.total()) throw Error("instrumented_flops: untagged matmuls in the forward pass");
    return b;
}

CostReport summarize(std::vector<std::string> ids, std::vector<std::size_t> tokens, std::vector<FlopBreakdown> breakdowns) {
    if (breakdowns.empty()) throw DataError("cost report: empty dataset");
    CostReport r;
    r.ids = std::move(ids);
    r.tokens_after_ip = std::move(tokens);
    r.breakdowns = std::move(breakdowns);
    const double n = static_cast<double>(r.breakdowns.size());
    for (const auto& b : r.breakdowns) {
        r.per_image_flops.push_back(b.total());
        r.mean += static_cast<double>(b.total());
        r.mean_embed += static_cast<double>(b.embed);
        r.mean_prefix += static_cast<double>(b.prefix);
        r.mean_cluster += static_cast<double>(b.cluster);
        r.mean_suffix += static_cast<double>(b.suffix);
        r.mean_regenerator += static_cast<double>(b.regenerator);
        r.mean_head += static_cast<double>(b.head);
    }
    r.mean /= n;
    r.mean_embed /= n, r.mean_prefix /= n, r.mean_cluster /= n;
    r.mean_suffix /= n, r.mean_regenerator /= n, r.mean_head /= n;
    double var = 0.0;
    for (auto f : r.per_image_flops) {
        const double d = static_cast<double>(f) - r.mean;
        var += d * d;
    }
    r.std = std::sqrt(var / n);
    return r;
}

CostReport dataset_cost(const ClustViT& model, const std::vector<Sample>& samples) {
    if (samples.empty()) throw DataError("dataset_cost: empty dataset");
    NoGradGuard no_grad;
    std::vector<std::string> ids;
    std::vector<std::size_t> tokens;
    std::vector<FlopBreakdown> bds;
    for (const auto& s : samples) {
        ForwardResult fr = model.forward(s.image);
        std::size_t active = 0;
        if (model.config().clustering()) {
            std::vector<char> seen(model.config().clusters + 1, 0);
            for (int c : fr.assignment)
                if (c > 0 && !seen[static_cast<std::size_t>(c)]) seen[static_cast<std::size_t>(c)] = 1, ++active;
        }
        ids.push_back(s.id);
        tokens.push_back(fr.tokens_after_ip);
        bds.push_back(model_flops(model.config(), fr.tokens_after_ip, active));
    }
    return summarize(std::move(ids), std::move(tokens), std::move(bds));
}

std::vector<HistogramBin> token_histogram(const std::vector<std::size_t>& tokens, std::size_t max_tokens,
                                          std::size_t bin_width) {
    if (bin_width == 0) throw ConfigError("histogram bin width must be positive");
    std::vector<HistogramBin> bins;
    for (std::size_t lo = 1; lo <= max_tokens; lo += bin_width) bins.push_back({lo, lo + bin_width, 0});
    for (auto t : tokens) {
        if (t < 1 || t > max_tokens) throw ConfigError("token count " + std::to_string(t) + " outside histogram range");
        ++bins[(t - 1) / bin_width].count;
    }
    return bins;
}

double throughput(const ClustViT& model, const std::vector<Image>& images, std::size_t warmup, std::size_t iters) {
    if (images.empty()) throw DataError("throughput: no images");
    if (warmup < 1 || iters < 1) throw ConfigError("throughput: warmup and iters must be >= 1");
    NoGradGuard no_grad;
    const int saved = kernels::max_threads();
    kernels::set_max_threads(1);
    for (std::size_t i = 0; i < warmup; ++i) model.forward(images[i % images.size()]);
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < iters; ++i) model.forward(images[i % images.size()]);
    const auto t1 = std::chrono::steady_clock::now();
    kernels::set_max_threads(saved);
    const double secs = std::chrono::duration<double>(t1 - t0).count();
    return static_cast<double>(iters) / secs;
}

void write_cost_csv(const std::filesystem::path& path, const CostReport& r) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path.string());
    os << "image_id,tokens_after_ip,flops\n";
    for (std::size_t i = 0; i < r.per_image_flops.size(); ++i)
        os << r.ids[i] << ',' << r.tokens_after_ip[i] << ',' << r.per_image_flops[i] << '\n';
}

void write_cost_summary_csv(const std::filesystem::path& path, const CostReport& r) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path.string());
    os << "images,mean,std,embed,prefix,cluster,suffix,regenerator,head\n";
    os << std::setprecision(17) << r.per_image_flops.size() << ',' << r.mean << ',' << r.std << ',' << r.mean_embed
       << ',' << r.mean_prefix << ',' << r.mean_cluster << ',' << r.mean_suffix << ',' << r.mean_regenerator << ','
       << r.mean_head << '\n';
}

void write_histogram_csv(const std::filesystem::path& path, const std::vector<HistogramBin>& bins) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path.string());
    os << "bin_low,bin_high,count\n";
    for (const auto& b : bins) os << b.low << ',' << b.high << ',' << b.count << '\n';
}

}  // namespace clustvit::flops
