// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/models/toy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "simtrace/models/registry.hpp"

namespace simtrace::models {

using sim::FrameScope;

Value ConjugateModel::run(sim::ModelContext& ctx) {
    FrameScope top(ctx, "conjugate::model()");
    const double x = ctx.sample(Distribution::normal(cfg_.prior_mean, cfg_.prior_std), "x").as_f64();
    {
        FrameScope lik(ctx, "conjugate::likelihood()");
        ctx.observe(Distribution::normal(x, cfg_.noise_std), x);
    }
    return x;
}

std::string ConjugateModel::latent_address() { return "conjugate::model()/Normal"; }

Value DiscreteModel::run(sim::ModelContext& ctx) {
    FrameScope top(ctx, "discrete::model()");
    std::int64_t a, b;
    {
        FrameScope s(ctx, "discrete::draw_a()");
        a = ctx.sample(Distribution::categorical({cfg_.pa[0], cfg_.pa[1]}), "a").as_i64();
    }
    {
        FrameScope s(ctx, "discrete::draw_b()");
        b = ctx.sample(Distribution::categorical({cfg_.pb[0], cfg_.pb[1]}), "b").as_i64();
    }
    const auto& row = cfg_.likelihood[a][b];
    const auto mode = static_cast<std::int64_t>(std::max_element(row.begin(), row.end()) - row.begin());
    {
        FrameScope s(ctx, "discrete::detector()");
        ctx.observe(Distribution::categorical({row[0], row[1], row[2]}), Value(mode));
    }
    return static_cast<std::int64_t>(2 * a + b);
}

void CascadeConfig::validate() const {
    if (Distribution::categorical(channel_probs).valid() == false) throw std::invalid_argument("channel_probs not a simplex");
    if (Distribution::categorical(soft_count_probs).valid() == false) throw std::invalid_argument("soft_count_probs not a simplex");
    if (energy_bounds.size() != channel_probs.size()) throw std::invalid_argument("one energy bound per channel");
    if (particle_positions.size() < channel_probs.size()) throw std::invalid_argument("not enough particle positions");
    if (soft_positions.size() + 1 < soft_count_probs.size()) throw std::invalid_argument("not enough soft positions");
    for (const auto& b : energy_bounds) {
        if (!(b[0] < b[1])) throw std::invalid_argument("energy bounds must be ordered");
    }
    if (!(noise_std > 0) || !(soft_std > 0) || !(lateral_width > 0)) throw std::invalid_argument("widths must be positive");
    if (!(rejection_threshold > 0 && rejection_threshold < decay_max)) throw std::invalid_argument("bad rejection threshold");
    if (longitudinal.size() != grid[0]) throw std::invalid_argument("one longitudinal fraction per depth layer");
}

CascadeModel::CascadeModel(CascadeConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

TensorValue CascadeModel::deposit(const CascadeLatents& l) const {
    const auto [D, H, W] = cfg_.grid;
    TensorValue out{{D, H, W}, std::vector<double>(std::size_t{D} * H * W, 0.0)};
    const double inv2s2 = 1.0 / (2 * cfg_.lateral_width * cfg_.lateral_width);
    std::vector<double> lateral(std::size_t{H} * W);
    for (std::size_t k = 0; k < l.energies.size(); ++k) {
        const auto [px, py] = cfg_.particle_positions[k];
        double total = 0;
        for (std::uint32_t y = 0; y < H; ++y) {
            for (std::uint32_t x = 0; x < W; ++x) {
                const double d2 = (x - px) * (x - px) + (y - py) * (y - py);
                total += lateral[y * W + x] = std::exp(-d2 * inv2s2);
            }
        }
        for (std::uint32_t z = 0; z < D; ++z) {
            const double e = l.energies[k] * cfg_.longitudinal[z] / total;
            for (std::size_t i = 0; i < lateral.size(); ++i) out.data[z * H * W + i] += e * lateral[i];
        }
    }
    for (std::size_t j = 0; j < l.soft.size(); ++j) {
        const auto [sx, sy] = cfg_.soft_positions[j];
        out.data[static_cast<std::size_t>(sy) * W + static_cast<std::size_t>(sx)] += l.soft[j];
    }
    return out;
}

Distribution CascadeModel::likelihood(const CascadeLatents& l) const {
    const auto mean = deposit(l);
    const std::vector<double> stds(mean.data.size(), cfg_.noise_std);
    return Distribution::mvn_diag(mean.data, stds);
}

Value CascadeModel::run(sim::ModelContext& ctx) {
    FrameScope top(ctx, "cascade::simulate_event()");
    CascadeLatents l;
    {
        FrameScope s(ctx, "cascade::choose_channel()");
        l.channel = ctx.sample(Distribution::categorical(cfg_.channel_probs), "channel").as_i64();
    }
    const auto& bounds = cfg_.energy_bounds[static_cast<std::size_t>(l.channel)];
    for (std::int64_t k = 0; k <= l.channel; ++k) {
        FrameScope s(ctx, "cascade::emit_particle(int)");
        l.energies.push_back(ctx.sample(Distribution::uniform(bounds[0], bounds[1]), "energy").as_f64());
    }
    std::int64_t n_soft;
    {
        FrameScope s(ctx, "cascade::soft_radiation()");
        n_soft = ctx.sample(Distribution::categorical(cfg_.soft_count_probs), "n_soft").as_i64();
        for (std::int64_t j = 0; j < n_soft; ++j) {
            FrameScope e(ctx, "cascade::soft_emission(int)");
            l.soft.push_back(ctx.sample(Distribution::normal(cfg_.soft_mean, cfg_.soft_std), "soft_energy").as_f64());
        }
    }
    double decay_length;
    {
        FrameScope s(ctx, "cascade::sample_decay_length()");
        do {
            decay_length = ctx.sample(Distribution::uniform(0.0, cfg_.decay_max), "decay_length", false, true).as_f64();
        } while (decay_length > cfg_.rejection_threshold);
    }
    {
        FrameScope s(ctx, "cascade::calorimeter_response()");
        const auto lik = likelihood(l);
        ctx.observe(lik, deposit(l));
    }
    const double total = std::accumulate(l.energies.begin(), l.energies.end(), 0.0) +
                         std::accumulate(l.soft.begin(), l.soft.end(), 0.0);
    return Value::tensor({3}, {static_cast<double>(l.channel), total, decay_length});
}

Value CrashingModel::run(sim::ModelContext& ctx) {
    FrameScope top(ctx, "crashing::model()");
    const double x = ctx.sample(Distribution::normal(0, 1), "x").as_f64();
    if (++runs_ % crash_every_ == 0) throw std::runtime_error("simulated crash");
    ctx.observe(Distribution::normal(x, 1), x);
    return x;
}

std::unique_ptr<sim::Model> make_model(const std::string& name) {
    if (name == "conjugate") return std::make_unique<ConjugateModel>();
    if (name == "discrete") return std::make_unique<DiscreteModel>();
    if (name == "cascade") return std::make_unique<CascadeModel>();
    if (name == "crashing") return std::make_unique<CrashingModel>();
    throw std::invalid_argument("unknown model: " + name);
}

std::vector<std::string> model_names() { return {"conjugate", "discrete", "cascade", "crashing"}; }

}  // namespace simtrace::models
