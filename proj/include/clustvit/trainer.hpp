#pragma once

// Training, evaluation and ablation drivers shared by the CLI and the
// acceptance suite.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "clustvit/data_synth.hpp"
#include "clustvit/flops.hpp"
#include "clustvit/metrics.hpp"
#include "clustvit/model.hpp"
#include "clustvit/run_config.hpp"

namespace clustvit {

struct TrainLogRow {
    std::size_t iter = 0;
    double seg_loss = 0.0;
    double clust_loss = 0.0;
    double total = 0.0;
    double cluster_acc = 0.0;
    double miou = 0.0;
    double tokens_after_ip = 0.0;  // window mean
    double lr = 0.0;
};

struct LabeledSet {
    std::vector<Sample> samples;
    std::vector<PseudoClusterMask> pseudo;  // parallel to samples; empty for vanilla runs
};

struct EvalResult {
    ConfusionMatrix confusion{1};
    MiouResult miou;
    double cluster_acc = 0.0;  // NaN without pseudo labels or on the vanilla path
    CostReport cost;
    double images_per_second = 0.0;  // 0 when timing is skipped
};

// Pseudo-clusters computed in memory for every sample.
LabeledSet label_samples(std::vector<Sample> samples, std::size_t k, std::size_t patch);

class Trainer {
public:
    using LogFn = std::function<void(const TrainLogRow&)>;

    Trainer(ClustViT& model, const RunConfig& cfg);

    // One SGD step on a batch. Throws NumericError on a non-finite loss.
    TrainLogRow step(const LabeledSet& data, const std::vector<std::size_t>& batch);

    // Runs cfg.schedule.total_iters steps with seeded batch sampling. Calls
    // `log` every cfg.log_every iterations (and at the last one) with window
    // averages; `checkpoint` every cfg.checkpoint_every iterations.
    std::vector<TrainLogRow> run(const LabeledSet& data, const LogFn& log = {},
                                 const std::function<void(std::size_t)>& checkpoint = {});

    std::size_t iteration() const { return iter_; }

private:
    ClustViT& model_;
    RunConfig cfg_;
    std::size_t iter_ = 0;
};

// Per-image inference, confusion accumulation and analytic cost; timing when
// time_iters > 0.
EvalResult evaluate(const ClustViT& model, const LabeledSet& data, std::size_t warmup = 0, std::size_t time_iters = 0);

// Run-directory helpers.
void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const TrainLogRow& row);

// Trains from a dataset on disk into cfg.out_dir: config.json, run_id.txt,
// metrics.csv, model.cvt. Returns the final log row.
TrainLogRow train_run(const RunConfig& cfg, std::ostream* progress = nullptr);

// Loads out_dir/config.json + model.cvt.
ClustViT load_run(const std::filesystem::path& run_dir, RunConfig* cfg_out = nullptr);

struct EvalOptions {
    std::string split = "val";
    bool visualize = false;
    std::size_t max_visualize = 8;
    bool timing = true;
};

// Writes eval.csv, cost.csv, cost_summary.csv, token_histogram.csv into out_dir.
EvalResult eval_run(const ClustViT& model, const RunConfig& cfg, const std::filesystem::path& data_root,
                    const std::filesystem::path& out_dir, const EvalOptions& opts);

struct AblationRow {
    std::size_t k = 0;
    std::size_t ip = 0;
    double miou = 0.0;
    double images_per_second = 0.0;
    double flops_mean = 0.0;
    double flops_std = 0.0;
    double tokens_mean = 0.0;
    std::string status = "ok";
};

// Retrains and evaluates every (k, ip) cell with the shared seed and dataset;
// writes <out_dir>/ablation.csv. Cell failures are recorded, not thrown.
std::vector<AblationRow> ablate(const RunConfig& base, const std::vector<std::size_t>& ks,
                                const std::vector<std::size_t>& ips, const std::filesystem::path& out_dir,
                                bool timing = true, std::ostream* progress = nullptr);

}  // namespace clustvit
