// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "simtrace/tensor/archive.hpp"
#include "simtrace/tensor/tensor.hpp"

namespace simtrace::nn {

enum class OptimizerKind : std::uint8_t { Adam = 0, AdamLARC = 1 };

std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& s);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double larc_eta = 1e-3;
};

// Layer learning rate under LARC clipping: min(lr, eta * |w| / |g|).
// Falls back to lr when either norm is zero.
double larc_learning_rate(double lr, double eta, double w_norm, double g_norm);

// Adam with bias correction. Each named tensor is one layer for LARC.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg = {}) : cfg_(cfg) {}

    // grads[i] belongs to params[i]; both in the same canonical order.
    void step(const std::vector<std::pair<std::string, Tensor>>& params, const std::vector<std::vector<double>>& grads,
              double lr);

    std::uint64_t steps() const { return t_; }
    const OptimizerConfig& config() const { return cfg_; }
    // Effective learning rate used for each layer in the last step.
    const std::map<std::string, double>& last_layer_lr() const { return last_lr_; }

    void save_state(Archive& a) const;
    void load_state(const Archive& a);

private:
    struct Moments {
        std::vector<double> m, v;
    };
    OptimizerConfig cfg_;
    std::uint64_t t_ = 0;
    std::map<std::string, Moments> state_;
    std::map<std::string, double> last_lr_;
};

enum class ScheduleKind : std::uint8_t { Constant = 0, Multistep = 1, Poly = 2 };

std::string to_string(ScheduleKind k);
ScheduleKind parse_schedule(const std::string& s);

struct ScheduleConfig {
    ScheduleKind kind = ScheduleKind::Constant;
    double lr0 = 1e-3;
    double lr_final = 0.0;
    std::uint64_t total = 1;  // T for poly
    double power = 2.0;
    std::vector<std::uint64_t> milestones;  // multistep
    double gamma = 0.1;
};

// Learning rate at iteration t; poly requires 0 <= t <= T.
double learning_rate(const ScheduleConfig& cfg, std::uint64_t t);

// lr1 * N^alpha with alpha in (0, 0.5].
double scaled_learning_rate(double lr1, std::size_t workers, double alpha = 0.5);

}  // namespace simtrace::nn
