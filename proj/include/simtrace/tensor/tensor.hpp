// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace simtrace::nn {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

std::size_t shape_numel(const Shape& s);
std::string shape_string(const Shape& s);

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first touched by backward
    bool requires_grad = false;

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

// Dense f64 row-major tensor with shared storage. Copies alias.
class Tensor {
public:
    Tensor() : impl_(std::make_shared<TensorImpl>()) {}
    explicit Tensor(Shape shape);  // zeros
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

    const Shape& shape() const { return impl_->shape; }
    std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t numel() const { return impl_->data.size(); }

    std::span<double> data() { return impl_->data; }
    std::span<const double> data() const { return impl_->data; }
    std::vector<double>& vec() { return impl_->data; }
    const std::vector<double>& vec() const { return impl_->data; }
    // Gradient buffer; zeros if backward never reached this tensor.
    std::span<const double> grad() const;
    bool has_grad() const { return !impl_->grad.empty(); }
    void zero_grad() { impl_->grad.clear(); }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool r) { impl_->requires_grad = r; }

    double item() const;
    double operator[](std::size_t i) const { return impl_->data[i]; }

    TensorImpl* get() const { return impl_.get(); }
    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

// Ordered record of differentiable operations.
class Tape {
public:
    struct Op {
        const char* name;
        std::shared_ptr<TensorImpl> output;
        std::function<void()> backward;  // reads output->grad, accumulates into inputs
    };

    void record(const char* name, const Tensor& output, std::function<void()> backward);
    std::size_t size() const { return ops_.size(); }
    const std::vector<Op>& ops() const { return ops_; }
    void clear() { ops_.clear(); }

    // Tape that ops on this thread record into, or nullptr.
    static Tape* active();

private:
    friend class TapeScope;
    std::vector<Op> ops_;
};

// Makes `tape` the active tape on this thread for the scope's lifetime.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

// Populates gradients of every requires_grad tensor reachable from `loss`.
// Throws ShapeError unless loss has exactly one element.
void backward(Tape& tape, const Tensor& loss);

// Same values, cut from the tape.
Tensor detach(const Tensor& t);

// True when `t` requires grad and a tape is active, i.e. ops on it must record.
bool tracking(std::initializer_list<const Tensor*> inputs);

}  // namespace simtrace::nn
