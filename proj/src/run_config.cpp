#include "clustvit/run_config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "clustvit/errors.hpp"

namespace clustvit {

using nlohmann::json;

void RunConfig::validate() const {
    model.validate();
    schedule.validate();
    if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (sgd.momentum < 0.0 || sgd.momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
    if (sgd.weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
    if (log_every == 0) throw ConfigError("log_every must be positive");
    if (warmup == 0 || timing_iters == 0) throw ConfigError("warmup and timing_iters must be positive");
}

json RunConfig::to_json() const {
    return json{
        {"image_size", model.image_height},
        {"patch_size", model.patch_size},
        {"embed_dim", model.embed_dim},
        {"layers", model.num_layers},
        {"heads", model.num_heads},
        {"ffn_hidden", model.ffn_dim()},
        {"num_classes", model.num_classes},
        {"clusters", model.clusters},
        {"injection_point", model.injection_point},
        {"cluster_hidden", model.cluster_mlp_hidden()},
        {"refine_skip", model.refine_skip},
        {"scale", model.scale},
        {"lambda", lambda},
        {"base_lr", schedule.base_lr},
        {"min_lr", schedule.min_lr},
        {"lr_power", schedule.power},
        {"iters", schedule.total_iters},
        {"momentum", sgd.momentum},
        {"weight_decay", sgd.weight_decay},
        {"batch_size", batch_size},
        {"seed", seed},
        {"data_root", data_root},
        {"preset", preset},
        {"teacher_forcing", teacher_forcing},
        {"freeze_cluster", freeze_cluster},
        {"out_dir", out_dir},
        {"log_every", log_every},
        {"checkpoint_every", checkpoint_every},
        {"warmup", warmup},
        {"timing_iters", timing_iters},
    };
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& dst) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        dst = it->get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const char* kKnown[] = {"image_size", "patch_size", "embed_dim", "layers", "heads", "ffn_hidden",
                                   "num_classes", "clusters", "injection_point", "cluster_hidden", "refine_skip",
                                   "scale", "lambda", "base_lr", "min_lr", "lr_power", "iters", "momentum",
                                   "weight_decay", "batch_size", "seed", "data_root", "preset", "teacher_forcing",
                                   "freeze_cluster", "out_dir", "log_every", "checkpoint_every", "warmup",
                                   "timing_iters"};
    for (const auto& [key, _] : j.items())
        if (std::find_if(std::begin(kKnown), std::end(kKnown), [&](const char* k) { return key == k; }) == std::end(kKnown))
            throw ConfigError("unknown config field '" + key + "'");

    RunConfig c;
    std::size_t image = c.model.image_height;
    read(j, "image_size", image);
    c.model.image_height = c.model.image_width = image;
    read(j, "patch_size", c.model.patch_size);
    read(j, "embed_dim", c.model.embed_dim);
    read(j, "layers", c.model.num_layers);
    read(j, "heads", c.model.num_heads);
    read(j, "ffn_hidden", c.model.ffn_hidden);
    read(j, "num_classes", c.model.num_classes);
    read(j, "clusters", c.model.clusters);
    read(j, "injection_point", c.model.injection_point);
    read(j, "cluster_hidden", c.model.cluster_hidden);
    read(j, "refine_skip", c.model.refine_skip);
    read(j, "scale", c.model.scale);
    read(j, "lambda", c.lambda);
    read(j, "base_lr", c.schedule.base_lr);
    read(j, "min_lr", c.schedule.min_lr);
    read(j, "lr_power", c.schedule.power);
    read(j, "iters", c.schedule.total_iters);
    read(j, "momentum", c.sgd.momentum);
    read(j, "weight_decay", c.sgd.weight_decay);
    read(j, "batch_size", c.batch_size);
    read(j, "seed", c.seed);
    read(j, "data_root", c.data_root);
    read(j, "preset", c.preset);
    read(j, "teacher_forcing", c.teacher_forcing);
    read(j, "freeze_cluster", c.freeze_cluster);
    read(j, "out_dir", c.out_dir);
    read(j, "log_every", c.log_every);
    read(j, "checkpoint_every", c.checkpoint_every);
    read(j, "warmup", c.warmup);
    read(j, "timing_iters", c.timing_iters);
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path.string());
    try {
        return from_json(json::parse(is));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void RunConfig::save(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write config " + path.string());
    os << to_json().dump(2) << '\n';
}

void RunConfig::apply_overrides(const std::vector<std::string>& assignments) {
    json j = to_json();
    for (const auto& a : assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + a + "' is not key=value");
        const std::string key = a.substr(0, eq), value = a.substr(eq + 1);
        if (!j.contains(key)) throw ConfigError("unknown config field '" + key + "'");
        json v = json::parse(value, nullptr, false);
        if (v.is_discarded()) v = value;  // bare strings
        if (j[key].is_string() && !v.is_string()) v = value;
        j[key] = v;
    }
    *this = from_json(j);
}

std::string RunConfig::run_id() const {
    const std::string s = to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char ch : s) h = (h ^ ch) * 0x100000001b3ULL;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf, 12);
}

std::vector<std::string> diff_model_fields(const RunConfig& a, const RunConfig& b) {
    static const char* kModelKeys[] = {"image_size", "patch_size", "embed_dim", "layers", "heads", "ffn_hidden",
                                       "num_classes", "clusters", "injection_point", "cluster_hidden", "refine_skip"};
    const json ja = a.to_json(), jb = b.to_json();
    std::vector<std::string> out;
    for (const char* k : kModelKeys)
        if (ja[k] != jb[k]) out.push_back(std::string(k) + ": " + ja[k].dump() + " vs " + jb[k].dump());
    return out;
}

}  // namespace clustvit
