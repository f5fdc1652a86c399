#pragma once

// Dense f64 tensor with reverse-mode gradients.
//
// A Tensor is a shared handle to a node: copying a Tensor aliases the same
// storage. Ops that see at least one input with requires_grad() record their
// inputs and a backward closure on the result; backward() walks that graph in
// reverse topological order. Grad buffers are allocated on first use and
// accumulate additively until zero_grad().

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace clustvit {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until the first accumulation
    bool requires_grad = false;
    std::uint64_t id = 0;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(std::span<const double>)> backward_fn;

    // Grad buffer, allocated (zeroed) on demand.
    std::span<double> grad_buffer();
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t rows() const { return node_->shape.at(0); }
    std::size_t cols() const { return node_->shape.back(); }
    std::size_t numel() const { return node_->data.size(); }
    std::uint64_t id() const { return node_->id; }

    std::span<double> data() { return node_->data; }
    std::span<const double> data() const { return node_->data; }
    const std::vector<double>& values() const { return node_->data; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const { return node_->grad; }
    std::span<double> grad_buffer() { return node_->grad_buffer(); }
    void zero_grad();

    double item() const;
    double at(std::size_t i) const { return node_->data[i]; }
    double at(std::size_t r, std::size_t c) const { return node_->data[r * cols() + c]; }

    // Copy of the values without graph history.
    Tensor detach() const;

    TensorNode* node() const { return node_.get(); }
    const std::shared_ptr<TensorNode>& shared() const { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

// Populates grad on every participating tensor with d(loss)/d(tensor).
// Throws ShapeError unless loss has exactly one element. The recorded graph is
// released afterwards; leaf grads remain.
void backward(const Tensor& loss);

bool grad_enabled();

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

namespace detail {

// Builds an op result. The backward closure is attached only when recording
// is on and some input requires grad.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                   std::function<void(std::span<const double>)> backward_fn);

}  // namespace detail

}  // namespace clustvit
