#include "clustvit/trainer.hpp"

#include <omp.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

#include "clustvit/checkpoint.hpp"
#include "clustvit/errors.hpp"
#include "clustvit/kernels.hpp"
#include "clustvit/netpbm.hpp"
#include "clustvit/ops.hpp"

namespace clustvit {

namespace fs = std::filesystem;

LabeledSet label_samples(std::vector<Sample> samples, std::size_t k, std::size_t patch) {
    LabeledSet out;
    out.samples = std::move(samples);
    if (k > 0)
        for (const auto& s : out.samples) out.pseudo.push_back(pseudo::generate(s.mask, patch, k));
    return out;
}

namespace {

struct Window {
    std::size_t steps = 0;
    double seg = 0, clust = 0, total = 0, acc = 0, tokens = 0;
    std::size_t acc_count = 0;
    ConfusionMatrix conf{1};
    double lr = 0;

    explicit Window(std::size_t classes) : conf(classes) {}
};

}  // namespace

Trainer::Trainer(ClustViT& model, const RunConfig& cfg) : model_(model), cfg_(cfg) {
    cfg_.validate();
    for (auto& p : model_.parameters().items())
        if (cfg_.freeze_cluster && p.name.rfind("cluster.", 0) == 0) p.frozen = true;
}

TrainLogRow Trainer::step(const LabeledSet& data, const std::vector<std::size_t>& batch) {
    const auto& mcfg = model_.config();
    const bool clustering = mcfg.clustering();
    if (clustering && data.pseudo.size() != data.samples.size())
        throw ConfigError("training a clustered model needs pseudo-clusters for every sample");
    const double inv = 1.0 / static_cast<double>(batch.size());
    TrainLogRow row;
    row.iter = iter_;
    ConfusionMatrix conf(mcfg.num_classes);
    double tokens = 0.0, acc = 0.0;
    static const PseudoClusterMask kNone;
    for (std::size_t idx : batch) {
        const Sample& s = data.samples.at(idx);
        const PseudoClusterMask& pc = clustering ? data.pseudo.at(idx) : kNone;
        std::optional<std::span<const int>> force;
        if (clustering && cfg_.teacher_forcing) force = std::span<const int>(pc.labels);
        ForwardResult fr = model_.forward(s.image, force);
        CombinedLoss loss = metrics::combined_loss(fr.seg_logits, s.mask, fr.cluster_logits, pc, cfg_.lambda);
        if (!std::isfinite(loss.report.total))
            throw NumericError("non-finite loss at iteration " + std::to_string(iter_) + " (lr " +
                               std::to_string(cfg_.schedule.lr(iter_)) + ")");
        backward(ops::scale(loss.total, inv));
        row.seg_loss += loss.report.seg_loss * inv;
        row.clust_loss += loss.report.clust_loss * inv;
        row.total += loss.report.total * inv;
        tokens += static_cast<double>(fr.tokens_after_ip) * inv;
        conf.accumulate(metrics::mask_indices(s.mask), metrics::argmax_rows(fr.seg_logits));
        if (clustering) acc += pseudo::cluster_accuracy(cluster::assign(fr.cluster_logits), pc) * inv;
    }
    row.lr = sgd_step(model_.parameters(), cfg_.schedule, iter_, cfg_.sgd);
    row.tokens_after_ip = tokens;
    row.cluster_acc = clustering ? acc : std::numeric_limits<double>::quiet_NaN();
    row.miou = metrics::miou(conf).miou;
    ++iter_;
    return row;
}

std::vector<TrainLogRow> Trainer::run(const LabeledSet& data, const LogFn& log,
                                      const std::function<void(std::size_t)>& checkpoint) {
    if (data.samples.empty()) throw DataError("training set is empty");
    const std::size_t n = data.samples.size(), total = cfg_.schedule.total_iters;
    Rng rng(Rng::derive(cfg_.seed, 0xba7c4));
    std::vector<std::size_t> order(n);
    std::size_t cursor = n;
    auto next_batch = [&] {
        std::vector<std::size_t> batch;
        while (batch.size() < cfg_.batch_size) {
            if (cursor == n) {
                std::iota(order.begin(), order.end(), 0);
                for (std::size_t i = n; i > 1; --i)
                    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
                cursor = 0;
            }
            batch.push_back(order[cursor++]);
        }
        return batch;
    };

    std::vector<TrainLogRow> logged;
    TrainLogRow acc;
    std::size_t steps = 0;
    while (iter_ < total) {
        TrainLogRow r = step(data, next_batch());
        acc.seg_loss += r.seg_loss;
        acc.clust_loss += r.clust_loss;
        acc.total += r.total;
        acc.cluster_acc += r.cluster_acc;
        acc.miou += r.miou;
        acc.tokens_after_ip += r.tokens_after_ip;
        acc.lr = r.lr;
        ++steps;
        if (iter_ % cfg_.log_every == 0 || iter_ == total) {
            const double s = static_cast<double>(steps);
            TrainLogRow w{iter_,         acc.seg_loss / s, acc.clust_loss / s, acc.total / s,
                          acc.cluster_acc / s, acc.miou / s, acc.tokens_after_ip / s, acc.lr};
            logged.push_back(w);
            if (log) log(w);
            acc = {};
            steps = 0;
        }
        if (checkpoint && cfg_.checkpoint_every && (iter_ % cfg_.checkpoint_every == 0 || iter_ == total))
            checkpoint(iter_);
    }
    return logged;
}

EvalResult evaluate(const ClustViT& model, const LabeledSet& data, std::size_t warmup, std::size_t time_iters) {
    if (data.samples.empty()) throw DataError("evaluation set is empty");
    const auto& cfg = model.config();
    const std::size_t n = data.samples.size();
    const bool with_pseudo = cfg.clustering() && data.pseudo.size() == n;

    std::vector<std::vector<int>> preds(n);
    std::vector<std::size_t> tokens(n);
    std::vector<std::size_t> active(n);
    std::vector<double> accs(n, 0.0);
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic) num_threads(kernels::max_threads())
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        NoGradGuard no_grad;
        const auto u = static_cast<std::size_t>(i);
        ForwardResult fr = model.forward(data.samples[u].image);
        preds[u] = metrics::argmax_rows(fr.seg_logits);
        tokens[u] = fr.tokens_after_ip;
        std::vector<char> seen(cfg.clusters + 1, 0);
        for (int c : fr.assignment)
            if (c > 0 && !seen[static_cast<std::size_t>(c)]) seen[static_cast<std::size_t>(c)] = 1, ++active[u];
        if (with_pseudo) accs[u] = pseudo::cluster_accuracy(fr.assignment, data.pseudo[u]);
    }

    EvalResult r;
    r.confusion = ConfusionMatrix(cfg.num_classes);
    std::vector<std::string> ids;
    std::vector<FlopBreakdown> bds;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        r.confusion.accumulate(metrics::mask_indices(data.samples[i].mask), preds[i]);
        ids.push_back(data.samples[i].id);
        bds.push_back(flops::model_flops(cfg, tokens[i], active[i]));
        acc += accs[i];
    }
    r.miou = metrics::miou(r.confusion);
    r.cluster_acc = with_pseudo ? acc / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
    r.cost = flops::summarize(std::move(ids), std::move(tokens), std::move(bds));
    if (time_iters > 0) {
        std::vector<Image> images;
        for (const auto& s : data.samples) images.push_back(s.image);
        r.images_per_second = flops::throughput(model, images, std::max<std::size_t>(1, warmup), time_iters);
    }
    return r;
}

void write_metrics_header(std::ostream& os) { os << "iter,seg_loss,clust_loss,total,cluster_acc,miou,tokens_after_ip\n"; }

void write_metrics_row(std::ostream& os, const TrainLogRow& r) {
    os << std::setprecision(10) << r.iter << ',' << r.seg_loss << ',' << r.clust_loss << ',' << r.total << ','
       << r.cluster_acc << ',' << r.miou << ',' << r.tokens_after_ip << '\n';
}

namespace {

RunConfig resolve_dataset(RunConfig cfg, Manifest& manifest) {
    manifest = dataset::read_manifest(cfg.data_root);
    if (!manifest.preset.empty()) {
        const auto classes = SceneSpec::preset(manifest.preset, 0, 0).num_classes;
        cfg.model.num_classes = classes;
        cfg.preset = manifest.preset;
    }
    cfg.validate();
    return cfg;
}

LabeledSet load_labeled(const RunConfig& cfg, Manifest& manifest, const std::string& split) {
    LabeledSet set;
    set.samples = dataset::load_split(cfg.data_root, manifest, split);
    if (cfg.model.clustering()) {
        dataset::cache_pseudo_clusters(cfg.data_root, manifest, cfg.model.clusters, cfg.model.patch_size);
        for (const auto& e : manifest.split(split)) {
            PseudoClusterMask pc;
            pc.labels = dataset::read_pseudo_file(fs::path(cfg.data_root) / dataset::pseudo_path(e, cfg.model.clusters, cfg.model.patch_size));
            if (pc.labels.size() != cfg.model.num_patches())
                throw DataError("pseudo-cluster file for " + e.id + " has " + std::to_string(pc.labels.size()) +
                                " entries, expected " + std::to_string(cfg.model.num_patches()));
            set.pseudo.push_back(std::move(pc));
        }
    }
    return set;
}

ClustViT train_model(const RunConfig& requested, std::ostream* progress, RunConfig* resolved_out) {
    Manifest manifest;
    RunConfig cfg = resolve_dataset(requested, manifest);
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    cfg.save(out / "config.json");
    netpbm::write_file(out / "run_id.txt", cfg.run_id() + "\n");

    LabeledSet train = load_labeled(cfg, manifest, "train");
    ClustViT model(cfg.model, cfg.seed);
    Trainer trainer(model, cfg);
    std::ofstream metrics(out / "metrics.csv");
    write_metrics_header(metrics);
    trainer.run(
        train,
        [&](const TrainLogRow& r) {
            write_metrics_row(metrics, r);
            metrics.flush();
            if (progress)
                *progress << "iter " << r.iter << " lr " << r.lr << " loss " << r.total << " (seg " << r.seg_loss
                          << ", clust " << r.clust_loss << ") cluster_acc " << r.cluster_acc << " miou " << r.miou
                          << " tokens " << r.tokens_after_ip << std::endl;
        },
        [&](std::size_t) { save_checkpoint(out / "model.cvt", model.parameters()); });
    if (resolved_out) *resolved_out = cfg;
    return model;
}

void write_visualizations(const ClustViT& model, const LabeledSet& data, const fs::path& dir, std::size_t limit) {
    fs::create_directories(dir);
    const auto& cfg = model.config();
    NoGradGuard no_grad;
    for (std::size_t i = 0; i < std::min(limit, data.samples.size()); ++i) {
        const Sample& s = data.samples[i];
        ForwardResult fr = model.forward(s.image);
        auto pred = metrics::argmax_rows(fr.seg_logits);
        for (auto& v : pred) ++v;
        netpbm::write_label_ppm(dir / (s.id + "_pred.ppm"), pred, cfg.image_height, cfg.image_width, 1);
        netpbm::write_label_ppm(dir / (s.id + "_gt.ppm"), s.mask.labels, cfg.image_height, cfg.image_width, 1);
        if (cfg.clustering()) {
            netpbm::write_label_ppm(dir / (s.id + "_cluster.ppm"), fr.assignment, cfg.grid_rows(), cfg.grid_cols(),
                                    cfg.patch_size);
            if (i < data.pseudo.size())
                netpbm::write_label_ppm(dir / (s.id + "_pseudo.ppm"), data.pseudo[i].labels, cfg.grid_rows(),
                                        cfg.grid_cols(), cfg.patch_size);
        }
    }
}

}  // namespace

TrainLogRow train_run(const RunConfig& cfg, std::ostream* progress) {
    RunConfig resolved;
    ClustViT model = train_model(cfg, progress, &resolved);
    // The last metrics row is the final window.
    std::ifstream is(fs::path(resolved.out_dir) / "metrics.csv");
    std::string line, last;
    while (std::getline(is, line))
        if (!line.empty()) last = line;
    TrainLogRow row;
    std::sscanf(last.c_str(), "%zu,%lf,%lf,%lf,%lf,%lf,%lf", &row.iter, &row.seg_loss, &row.clust_loss, &row.total,
                &row.cluster_acc, &row.miou, &row.tokens_after_ip);
    return row;
}

ClustViT load_run(const fs::path& run_dir, RunConfig* cfg_out) {
    RunConfig cfg = RunConfig::load(run_dir / "config.json");
    ClustViT model(cfg.model, cfg.seed);
    load_checkpoint(run_dir / "model.cvt", model.parameters());
    if (cfg_out) *cfg_out = cfg;
    return model;
}

EvalResult eval_run(const ClustViT& model, const RunConfig& cfg, const fs::path& data_root, const fs::path& out_dir,
                    const EvalOptions& opts) {
    RunConfig c = cfg;
    c.data_root = data_root.string();
    Manifest manifest = dataset::read_manifest(data_root);
    LabeledSet data = load_labeled(c, manifest, opts.split);
    if (data.samples.empty()) throw DataError("split '" + opts.split + "' is empty in " + data_root.string());
    EvalResult r = evaluate(model, data, c.warmup, opts.timing ? c.timing_iters : 0);

    fs::create_directories(out_dir);
    {
        std::ofstream os(out_dir / "eval.csv");
        os << "split,images,miou,cluster_acc,img_per_s,flops_mean,flops_std,tokens_mean";
        for (std::size_t i = 0; i < r.miou.iou.size(); ++i) os << ",iou_" << (i + 1);
        os << '\n' << std::setprecision(10);
        const double tokens_mean =
            std::accumulate(r.cost.tokens_after_ip.begin(), r.cost.tokens_after_ip.end(), 0.0) /
            static_cast<double>(r.cost.tokens_after_ip.size());
        os << opts.split << ',' << data.samples.size() << ',' << r.miou.miou << ',' << r.cluster_acc << ','
           << r.images_per_second << ',' << r.cost.mean << ',' << r.cost.std << ',' << tokens_mean;
        for (double v : r.miou.iou) os << ',' << v;
        os << '\n';
    }
    flops::write_cost_csv(out_dir / "cost.csv", r.cost);
    flops::write_cost_summary_csv(out_dir / "cost_summary.csv", r.cost);
    const std::size_t max_tokens = model.config().num_patches() + 1;
    flops::write_histogram_csv(out_dir / "token_histogram.csv",
                               flops::token_histogram(r.cost.tokens_after_ip, max_tokens, std::max<std::size_t>(1, max_tokens / 16)));
    if (opts.visualize) write_visualizations(model, data, out_dir / "vis", opts.max_visualize);
    return r;
}

std::vector<AblationRow> ablate(const RunConfig& base, const std::vector<std::size_t>& ks,
                                const std::vector<std::size_t>& ips, const fs::path& out_dir, bool timing,
                                std::ostream* progress) {
    if (ks.empty() || ips.empty()) throw ConfigError("ablate: k and ip lists must be non-empty");
    fs::create_directories(out_dir);
    std::vector<AblationRow> rows;
    std::ofstream csv(out_dir / "ablation.csv");
    csv << "k,ip,miou,img_per_s,flops_mean,flops_std,tokens_mean,status\n";
    for (std::size_t k : ks)
        for (std::size_t ip : ips) {
            AblationRow row;
            row.k = k;
            row.ip = ip;
            try {
                RunConfig cfg = base;
                cfg.model.clusters = k;
                cfg.model.injection_point = ip;
                cfg.out_dir = (out_dir / ("k" + std::to_string(k) + "_ip" + std::to_string(ip))).string();
                if (progress) *progress << "== cell k=" << k << " ip=" << ip << std::endl;
                RunConfig resolved;
                ClustViT model = train_model(cfg, nullptr, &resolved);
                EvalOptions eo;
                eo.timing = timing;
                EvalResult r = eval_run(model, resolved, resolved.data_root, resolved.out_dir, eo);
                row.miou = r.miou.miou;
                row.images_per_second = r.images_per_second;
                row.flops_mean = r.cost.mean;
                row.flops_std = r.cost.std;
                row.tokens_mean = std::accumulate(r.cost.tokens_after_ip.begin(), r.cost.tokens_after_ip.end(), 0.0) /
                                  static_cast<double>(r.cost.tokens_after_ip.size());
            } catch (const std::exception& e) {
                row.status = std::string("error: ") + e.what();
                for (auto& ch : row.status)
                    if (ch == ',' || ch == '\n') ch = ';';
            }
            csv << std::setprecision(10) << row.k << ',' << row.ip << ',' << row.miou << ',' << row.images_per_second
                << ',' << row.flops_mean << ',' << row.flops_std << ',' << row.tokens_mean << ',' << row.status << '\n';
            csv.flush();
            if (progress)
                *progress << "   miou " << row.miou << " flops " << row.flops_mean << " +- " << row.flops_std << " tokens "
                          << row.tokens_mean << " " << row.status << std::endl;
            rows.push_back(row);
        }
    return rows;
}

}  // namespace clustvit
