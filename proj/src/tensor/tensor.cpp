// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/tensor/tensor.hpp"

namespace simtrace::nn {

namespace {
thread_local Tape* g_active = nullptr;
}  // namespace

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

std::string shape_string(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

Tensor::Tensor(Shape shape) : impl_(std::make_shared<TensorImpl>()) {
    impl_->data.assign(shape_numel(shape), 0.0);
    impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) : impl_(std::make_shared<TensorImpl>()) {
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                         shape_string(shape));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
}

std::span<const double> Tensor::grad() const {
    impl_->ensure_grad();
    return impl_->grad;
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
    return impl_->data[0];
}

void Tape::record(const char* name, const Tensor& output, std::function<void()> backward) {
    ops_.push_back({name, output.impl(), std::move(backward)});
}

Tape* Tape::active() { return g_active; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active) { g_active = &tape; }
TapeScope::~TapeScope() { g_active = previous_; }

void backward(Tape& tape, const Tensor& loss) {
    if (loss.numel() != 1) throw ShapeError("backward needs a scalar loss, got " + shape_string(loss.shape()));
    loss.get()->ensure_grad();
    loss.get()->grad[0] += 1.0;
    const auto& ops = tape.ops();
    for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
        if (it->output->grad.empty()) continue;  // not on a path to the loss
        it->backward();
    }
}

Tensor detach(const Tensor& t) { return Tensor(t.shape(), t.vec(), false); }

bool tracking(std::initializer_list<const Tensor*> inputs) {
    if (!g_active) return false;
    for (const auto* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

}  // namespace simtrace::nn
