#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "clustvit/optim.hpp"
#include "clustvit/vit.hpp"

namespace clustvit {

// Everything one train/eval run needs. Serialized as a flat JSON object whose
// keys double as `--key=value` CLI overrides.
struct RunConfig {
    EncoderConfig model;
    double lambda = 0.1;
    LrSchedule schedule{0.001, 0.0001, 0.9, 2000};
    SgdOptions sgd;
    std::size_t batch_size = 8;
    std::uint64_t seed = 0;
    std::string data_root = "data/sparse";
    std::string preset = "sparse";
    bool teacher_forcing = false;
    bool freeze_cluster = false;
    std::string out_dir = "runs/default";
    std::size_t log_every = 50;
    std::size_t checkpoint_every = 500;
    std::size_t warmup = 10;
    std::size_t timing_iters = 100;

    void validate() const;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    // Applies "key=value" overrides. Unknown keys throw ConfigError.
    void apply_overrides(const std::vector<std::string>& assignments);

    // 12 hex digits derived from the serialized config.
    std::string run_id() const;
};

// Names of model fields that differ, e.g. {"clusters: 3 vs 2"}.
std::vector<std::string> diff_model_fields(const RunConfig& a, const RunConfig& b);

}  // namespace clustvit
