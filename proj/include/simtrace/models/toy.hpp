// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <vector>

#include "simtrace/sim/model.hpp"

namespace simtrace::models {

// x ~ N(prior_mean, prior_std); y ~ N(x, noise_std).
struct ConjugateConfig {
    double prior_mean = 0.0;
    double prior_std = 1.0;
    double noise_std = 1.0;
};

class ConjugateModel : public sim::Model {
public:
    explicit ConjugateModel(ConjugateConfig cfg = {}) : cfg_(cfg) {}
    std::string name() const override { return "conjugate"; }
    Value run(sim::ModelContext& ctx) override;
    const ConjugateConfig& config() const { return cfg_; }

    static std::string latent_address();

private:
    ConjugateConfig cfg_;
};

// a ~ Cat(pa), b ~ Cat(pb), y ~ Cat(likelihood[a][b]) over three classes.
struct DiscreteConfig {
    std::array<double, 2> pa{0.3, 0.7};
    std::array<double, 2> pb{0.6, 0.4};
    std::array<std::array<std::array<double, 3>, 2>, 2> likelihood{{
        {{{0.7, 0.2, 0.1}, {0.2, 0.6, 0.2}}},
        {{{0.1, 0.3, 0.6}, {0.3, 0.3, 0.4}}},
    }};
};

class DiscreteModel : public sim::Model {
public:
    explicit DiscreteModel(DiscreteConfig cfg = {}) : cfg_(cfg) {}
    std::string name() const override { return "discrete"; }
    Value run(sim::ModelContext& ctx) override;
    const DiscreteConfig& config() const { return cfg_; }

private:
    DiscreteConfig cfg_;
};

// Decay channel c picks c+1 particles at fixed lateral positions, each with an
// energy drawn from a channel-dependent uniform. A few soft deposits follow.
// A decay length is drawn in a rejection loop (uncontrolled, replace) and only
// enters the result. Energies are spread over a depth x height x width grid.
struct CascadeConfig {
    std::vector<double> channel_probs{0.35, 0.30, 0.20, 0.15};
    std::vector<std::array<double, 2>> energy_bounds{{0.5, 5.0}, {0.5, 4.5}, {1.0, 4.0}, {1.0, 3.5}};
    std::vector<std::array<double, 2>> particle_positions{{2, 2}, {6, 6}, {2, 6}, {6, 2}};
    std::vector<double> soft_count_probs{0.4, 0.3, 0.2, 0.1};
    std::vector<std::array<double, 2>> soft_positions{{3, 4}, {4, 3}, {4, 4}};
    double soft_mean = 0.8;
    double soft_std = 0.2;
    double decay_max = 3.0;
    double rejection_threshold = 2.0;
    std::array<std::uint32_t, 3> grid{4, 8, 8};  // depth, height, width
    std::vector<double> longitudinal{0.4, 0.3, 0.2, 0.1};
    double lateral_width = 0.7;
    double noise_std = 0.05;

    void validate() const;
};

struct CascadeLatents {
    std::int64_t channel = 0;
    std::vector<double> energies;
    std::vector<double> soft;
};

class CascadeModel : public sim::Model {
public:
    explicit CascadeModel(CascadeConfig cfg = {});
    std::string name() const override { return "cascade"; }
    Value run(sim::ModelContext& ctx) override;
    const CascadeConfig& config() const { return cfg_; }

    // Noise-free detector response, shape grid.
    TensorValue deposit(const CascadeLatents& l) const;
    Distribution likelihood(const CascadeLatents& l) const;

private:
    CascadeConfig cfg_;
};

// Always throws from run(); used to exercise aborted-run handling.
class CrashingModel : public sim::Model {
public:
    explicit CrashingModel(int crash_every = 1) : crash_every_(crash_every) {}
    std::string name() const override { return "crashing"; }
    Value run(sim::ModelContext& ctx) override;

private:
    int crash_every_;
    int runs_ = 0;
};

}  // namespace simtrace::models
