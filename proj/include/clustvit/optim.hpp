#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "clustvit/rng.hpp"
#include "clustvit/tensor.hpp"

namespace clustvit {

struct Parameter {
    std::string name;
    Tensor tensor;
    std::vector<double> velocity;
    bool frozen = false;  // skipped by sgd_step
};

// Named, ordered parameter registry. Registration order is the checkpoint order.
class ParameterSet {
public:
    // Registers a new trainable tensor; throws ConfigError on a duplicate name.
    // The returned handle aliases the registered storage.
    Tensor add(std::string name, Tensor tensor);

    // Glorot-uniform weight in [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
    Tensor add_glorot(std::string name, std::size_t fan_in, std::size_t fan_out, Rng& rng);
    Tensor add_zeros(std::string name, Shape shape);
    Tensor add_full(std::string name, Shape shape, double value);

    std::vector<Parameter>& items() { return params_; }
    const std::vector<Parameter>& items() const { return params_; }
    std::size_t size() const { return params_.size(); }
    std::size_t scalar_count() const;

    const Parameter* find(const std::string& name) const;
    Parameter* find(const std::string& name);

    void zero_grad();

private:
    std::vector<Parameter> params_;
};

// Polynomial decay from base_lr to min_lr over total_iters.
struct LrSchedule {
    double base_lr = 0.001;
    double min_lr = 0.0001;
    double power = 0.9;
    std::size_t total_iters = 1;

    void validate() const;
    // (base - min) * (1 - t/T)^power + min, clamped to min for t >= T.
    double lr(std::size_t iter) const;
};

struct SgdOptions {
    double momentum = 0.9;
    double weight_decay = 0.0005;
};

// velocity = momentum * velocity + grad + weight_decay * param
// param   -= lr * velocity
// Grads are zeroed afterwards. Returns the lr used.
double sgd_step(ParameterSet& params, const LrSchedule& schedule, std::size_t iter, const SgdOptions& opts);

}  // namespace clustvit
