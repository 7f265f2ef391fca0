// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace simtrace::nn {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::AdamLARC ? "adam-larc" : "adam"; }

OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "adam") return OptimizerKind::Adam;
    if (s == "adam-larc") return OptimizerKind::AdamLARC;
    throw std::invalid_argument("unknown optimizer '" + s + "' (expected adam or adam-larc)");
}

double larc_learning_rate(double lr, double eta, double w_norm, double g_norm) {
    if (w_norm <= 0.0 || g_norm <= 0.0) return lr;
    return std::min(lr, eta * w_norm / g_norm);
}

void Optimizer::step(const std::vector<std::pair<std::string, Tensor>>& params,
                     const std::vector<std::vector<double>>& grads, double lr) {
    if (params.size() != grads.size()) throw std::invalid_argument("optimizer: one gradient per parameter required");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& name = params[i].first;
        Tensor p = params[i].second;  // aliases the parameter storage
        const auto& g = grads[i];
        auto data = p.data();
        if (g.size() != data.size()) throw ShapeError("optimizer: gradient shape mismatch for " + name);
        auto& st = state_[name];
        if (st.m.size() != g.size()) {
            st.m.assign(g.size(), 0.0);
            st.v.assign(g.size(), 0.0);
        }
        double layer_lr = lr;
        if (cfg_.kind == OptimizerKind::AdamLARC) {
            double wn = 0, gn = 0;
            for (std::size_t j = 0; j < g.size(); ++j) {
                wn += data[j] * data[j];
                gn += g[j] * g[j];
            }
            layer_lr = larc_learning_rate(lr, cfg_.larc_eta, std::sqrt(wn), std::sqrt(gn));
        }
        last_lr_[name] = layer_lr;
        for (std::size_t j = 0; j < g.size(); ++j) {
            st.m[j] = cfg_.beta1 * st.m[j] + (1.0 - cfg_.beta1) * g[j];
            st.v[j] = cfg_.beta2 * st.v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
            const double mhat = st.m[j] / c1, vhat = st.v[j] / c2;
            data[j] -= layer_lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void Optimizer::save_state(Archive& a) const {
    a.metadata["optimizer"] = to_string(cfg_.kind);
    a.metadata["optimizer.t"] = std::to_string(t_);
    for (const auto& [name, st] : state_) {
        a.tensors.emplace_back("adam.m/" + name, Tensor({st.m.size()}, st.m));
        a.tensors.emplace_back("adam.v/" + name, Tensor({st.v.size()}, st.v));
    }
}

void Optimizer::load_state(const Archive& a) {
    auto it = a.metadata.find("optimizer.t");
    if (it == a.metadata.end()) return;
    t_ = std::stoull(it->second);
    state_.clear();
    for (const auto& [name, t] : a.tensors) {
        if (name.rfind("adam.m/", 0) == 0) state_[name.substr(7)].m = t.vec();
        if (name.rfind("adam.v/", 0) == 0) state_[name.substr(7)].v = t.vec();
    }
}

std::string to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::Constant: return "constant";
        case ScheduleKind::Multistep: return "multistep";
        case ScheduleKind::Poly: return "poly";
    }
    return "unknown";
}

ScheduleKind parse_schedule(const std::string& s) {
    if (s == "constant") return ScheduleKind::Constant;
    if (s == "multistep") return ScheduleKind::Multistep;
    if (s == "poly") return ScheduleKind::Poly;
    throw std::invalid_argument("unknown schedule '" + s + "' (expected constant, multistep or poly)");
}

double learning_rate(const ScheduleConfig& cfg, std::uint64_t t) {
    switch (cfg.kind) {
        case ScheduleKind::Constant: return cfg.lr0;
        case ScheduleKind::Multistep: {
            double lr = cfg.lr0;
            for (auto m : cfg.milestones) {
                if (t >= m) lr *= cfg.gamma;
            }
            return lr;
        }
        case ScheduleKind::Poly: {
            if (cfg.total == 0) throw std::invalid_argument("poly schedule needs total > 0");
            if (t > cfg.total) throw std::out_of_range("poly schedule iteration beyond total");
            const double frac = 1.0 - static_cast<double>(t) / static_cast<double>(cfg.total);
            return cfg.lr_final + (cfg.lr0 - cfg.lr_final) * std::pow(frac, cfg.power);
        }
    }
    return cfg.lr0;
}

double scaled_learning_rate(double lr1, std::size_t workers, double alpha) {
    if (!(alpha > 0.0 && alpha <= 0.5)) throw std::invalid_argument("scaling exponent must be in (0, 0.5]");
    if (workers == 0) throw std::invalid_argument("worker count must be positive");
    return lr1 * std::pow(static_cast<double>(workers), alpha);
}

}  // namespace simtrace::nn
