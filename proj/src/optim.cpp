#include "clustvit/optim.hpp"

#include <cmath>

#include "clustvit/errors.hpp"

namespace clustvit {

Tensor ParameterSet::add(std::string name, Tensor tensor) {
    if (find(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    tensor.set_requires_grad(true);
    std::vector<double> velocity(tensor.numel(), 0.0);
    params_.push_back({std::move(name), std::move(tensor), std::move(velocity)});
    return params_.back().tensor;
}

Tensor ParameterSet::add_glorot(std::string name, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_in * fan_out);
    for (auto& v : w) v = rng.uniform(-limit, limit);
    return add(std::move(name), Tensor::from({fan_in, fan_out}, std::move(w)));
}

Tensor ParameterSet::add_zeros(std::string name, Shape shape) {
    return add(std::move(name), Tensor::zeros(std::move(shape)));
}

Tensor ParameterSet::add_full(std::string name, Shape shape, double value) {
    return add(std::move(name), Tensor::full(std::move(shape), value));
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.numel();
    return n;
}

const Parameter* ParameterSet::find(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

Parameter* ParameterSet::find(const std::string& name) {
    for (auto& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

void ParameterSet::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

void LrSchedule::validate() const {
    if (!(base_lr > min_lr) || min_lr < 0.0) throw ConfigError("lr schedule requires base_lr > min_lr >= 0");
    if (!(power > 0.0)) throw ConfigError("lr schedule requires power > 0");
    if (total_iters == 0) throw ConfigError("lr schedule requires total_iters > 0");
}

double LrSchedule::lr(std::size_t iter) const {
    if (iter >= total_iters) return min_lr;
    const double frac = 1.0 - static_cast<double>(iter) / static_cast<double>(total_iters);
    return (base_lr - min_lr) * std::pow(frac, power) + min_lr;
}

double sgd_step(ParameterSet& params, const LrSchedule& schedule, std::size_t iter, const SgdOptions& opts) {
    const double lr = schedule.lr(iter);
    for (auto& p : params.items()) {
        if (!p.tensor.has_grad()) continue;
        if (p.frozen) {
            p.tensor.zero_grad();
            continue;
        }
        auto w = p.tensor.data();
        auto g = p.tensor.grad();
        for (std::size_t i = 0; i < w.size(); ++i) {
            p.velocity[i] = opts.momentum * p.velocity[i] + g[i] + opts.weight_decay * w[i];
            w[i] -= lr * p.velocity[i];
        }
        p.tensor.zero_grad();
    }
    return lr;
}

}  // namespace clustvit
