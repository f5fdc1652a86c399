// clustvit: dataset generation, training, evaluation, ablation and profiling.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "clustvit/data_synth.hpp"
#include "clustvit/errors.hpp"
#include "clustvit/flops.hpp"
#include "clustvit/kernels.hpp"
#include "clustvit/trainer.hpp"

namespace fs = std::filesystem;
using namespace clustvit;

namespace {

// Leftover "--key=value" arguments become config overrides.
std::vector<std::string> overrides_from(const std::vector<std::string>& extras) {
    std::vector<std::string> out;
    for (const auto& e : extras) {
        if (e.rfind("--", 0) != 0 || e.find('=') == std::string::npos)
            throw ConfigError("unexpected argument '" + e + "' (config overrides use --key=value)");
        out.push_back(e.substr(2));
    }
    return out;
}

RunConfig build_config(const std::string& path, const std::vector<std::string>& extras) {
    RunConfig cfg = path.empty() ? RunConfig{} : RunConfig::load(path);
    cfg.apply_overrides(overrides_from(extras));
    cfg.validate();
    return cfg;
}

std::vector<std::size_t> parse_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto dash = item.find('-');
        if (dash != std::string::npos) {
            const auto lo = std::stoul(item.substr(0, dash)), hi = std::stoul(item.substr(dash + 1));
            for (auto v = lo; v <= hi; ++v) out.push_back(v);
        } else if (!item.empty()) {
            out.push_back(std::stoul(item));
        }
    }
    if (out.empty()) throw ConfigError("empty list '" + s + "'");
    return out;
}

void print_breakdown(const FlopBreakdown& b) {
    std::cout << "  embed " << b.embed << "\n  prefix " << b.prefix << "\n  cluster " << b.cluster << "\n  suffix "
              << b.suffix << "\n  regenerator " << b.regenerator << "\n  head " << b.head << "\n  total " << b.total()
              << " (" << std::setprecision(4) << static_cast<double>(b.total()) * 1e-9 << " GFLOPs)\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ClustViT desk-scale pipeline: token clustering ViT for semantic segmentation"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset with cached pseudo-clusters");
    std::string preset = "sparse", out;
    std::uint64_t seed = 0;
    std::size_t count = 200, gen_k = 3, gen_patch = 8;
    bool force = false;
    gen->add_option("--preset", preset, "sparse | diverse")->capture_default_str();
    gen->add_option("--seed", seed, "Master seed")->capture_default_str();
    gen->add_option("--out", out, "Dataset root")->required();
    gen->add_option("--count", count, "Images per split (train, val, test)")->capture_default_str();
    gen->add_option("--k", gen_k, "Clusters for the pseudo-cluster cache")->capture_default_str();
    gen->add_option("--patch", gen_patch, "Patch size for the pseudo-cluster cache")->capture_default_str();
    gen->add_flag("--force", force, "Overwrite a non-empty output directory");

    // train
    auto* train = app.add_subcommand("train", "Train a model; extra --key=value flags override the config");
    train->allow_extras();
    std::string config_path;
    train->add_option("--config", config_path, "JSON run config");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a trained run");
    std::string run_dir, data_root, split = "val", eval_out, eval_config;
    bool visualize = false, no_timing = false;
    eval->add_option("--run", run_dir, "Run directory holding config.json and model.cvt")->required();
    eval->add_option("--data", data_root, "Dataset root (defaults to the run's data_root)");
    eval->add_option("--split", split, "train | val | test")->capture_default_str();
    eval->add_option("--out", eval_out, "Output directory (defaults to <run>/eval_<split>)");
    eval->add_option("--config", eval_config, "Expected config; model fields must match the run");
    eval->add_flag("--visualize", visualize, "Write prediction / cluster images");
    eval->add_flag("--no-timing", no_timing, "Skip the throughput measurement");

    // ablate
    auto* abl = app.add_subcommand("ablate", "Sweep cluster count k and injection point ip");
    abl->allow_extras();
    std::string k_list = "1-5", ip_list = "4", abl_out = "runs/ablation", abl_config;
    abl->add_option("--config", abl_config, "Base JSON run config");
    abl->add_option("--k", k_list, "Comma list or range of k values")->capture_default_str();
    abl->add_option("--ip", ip_list, "Comma list or range of ip values")->capture_default_str();
    abl->add_option("--out", abl_out, "Sweep output directory")->capture_default_str();

    // profile
    auto* prof = app.add_subcommand("profile", "Analytic FLOPs, break-even point, dataset cost and throughput");
    prof->allow_extras();
    std::string model_preset, prof_run, prof_data, prof_split = "val", prof_config;
    std::vector<std::size_t> token_counts;
    prof->add_option("--model-preset", model_preset, "tiny-desk | tiny | small | base | large");
    prof->add_option("--config", prof_config, "JSON run config for the model shape");
    prof->add_option("--tokens", token_counts, "tokens_after_ip values to tabulate");
    prof->add_option("--run", prof_run, "Trained run to measure on a dataset");
    prof->add_option("--data", prof_data, "Dataset root for --run");
    prof->add_option("--split", prof_split, "Split for --run")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*gen) {
            if (fs::exists(out) && !fs::is_empty(out) && !force) {
                std::cerr << "refusing to write into non-empty " << out << " (use --force)\n";
                return 1;
            }
            std::vector<SceneSpec> specs;
            for (const char* s : {"train", "val", "test"}) specs.push_back(SceneSpec::preset(preset, seed, count, s));
            Manifest m = dataset::write_dataset(out, preset, seed, specs);
            dataset::cache_pseudo_clusters(out, m, gen_k, gen_patch);
            std::cout << "wrote " << m.entries.size() << " samples to " << out << "\n";
        } else if (*train) {
            RunConfig cfg = build_config(config_path, train->remaining());
            TrainLogRow last = train_run(cfg, &std::cout);
            std::cout << "done: " << cfg.out_dir << " final loss " << last.total << "\n";
        } else if (*eval) {
            RunConfig cfg;
            ClustViT model = load_run(run_dir, &cfg);
            if (!eval_config.empty()) {
                auto diffs = diff_model_fields(RunConfig::load(eval_config), cfg);
                if (!diffs.empty()) {
                    std::string msg = "config/checkpoint mismatch:";
                    for (const auto& d : diffs) msg += "\n  " + d;
                    throw DataError(msg);
                }
            }
            EvalOptions eo;
            eo.split = split;
            eo.visualize = visualize;
            eo.timing = !no_timing;
            const fs::path root = data_root.empty() ? fs::path(cfg.data_root) : fs::path(data_root);
            const fs::path dst = eval_out.empty() ? fs::path(run_dir) / ("eval_" + split) : fs::path(eval_out);
            EvalResult r = eval_run(model, cfg, root, dst, eo);
            std::cout << std::setprecision(6) << "mIoU " << r.miou.miou << "  cluster_acc " << r.cluster_acc
                      << "  GFLOPs " << r.cost.mean * 1e-9 << " +- " << r.cost.std * 1e-9 << "  img/s "
                      << r.images_per_second << "\nwrote " << dst << "\n";
        } else if (*abl) {
            RunConfig cfg = build_config(abl_config, abl->remaining());
            auto rows = ablate(cfg, parse_list(k_list), parse_list(ip_list), abl_out, true, &std::cout);
            std::cout << "wrote " << (fs::path(abl_out) / "ablation.csv") << " (" << rows.size() << " cells)\n";
        } else if (*prof) {
            if (!prof_run.empty()) {
                RunConfig cfg;
                ClustViT model = load_run(prof_run, &cfg);
                const fs::path root = prof_data.empty() ? fs::path(cfg.data_root) : fs::path(prof_data);
                EvalOptions eo;
                eo.split = prof_split;
                EvalResult r = eval_run(model, cfg, root, fs::path(prof_run) / ("profile_" + prof_split), eo);
                std::cout << std::setprecision(6) << "GFLOPs " << r.cost.mean * 1e-9 << " +- " << r.cost.std * 1e-9
                          << "  img/s " << r.images_per_second << "\n";
            } else {
                EncoderConfig mc = model_preset.empty() ? build_config(prof_config, prof->remaining()).model
                                                        : EncoderConfig::preset(model_preset);
                mc.validate();
                std::cout << "vanilla ViT (" << mc.scale << ", N=" << mc.num_patches() << "):\n";
                print_breakdown(flops::vanilla_flops(mc));
                if (mc.clustering()) {
                    const auto be = flops::break_even_tokens(mc);
                    std::cout << "break-even tokens_after_ip (k=" << mc.clusters << ", ip=" << mc.injection_point
                              << "): " << (be ? std::to_string(*be) : std::string("none")) << "\n";
                    for (auto t : token_counts) {
                        std::cout << "clustered, tokens_after_ip=" << t << ":\n";
                        print_breakdown(flops::model_flops(mc, t));
                    }
                }
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
