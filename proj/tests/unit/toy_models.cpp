// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "simtrace/models/toy.hpp"
#include "simtrace/sim/gateway.hpp"

using namespace simtrace;
using namespace simtrace::sim;

namespace {

// Independent re-scoring of a cascade trace from the model's written-down
// generative process.
double cascade_log_joint_oracle(const Trace& t, const models::CascadeConfig& cfg) {
    std::int64_t channel = -1, n_soft = -1;
    std::vector<double> energies, soft;
    for (const auto& e : t.entries) {
        if (!e.is_latent()) continue;
        if (e.name == "channel") channel = e.value.as_i64();
        if (e.name == "energy") energies.push_back(e.value.as_f64());
        if (e.name == "n_soft") n_soft = e.value.as_i64();
        if (e.name == "soft_energy") soft.push_back(e.value.as_f64());
    }
    double lp = std::log(cfg.channel_probs[channel]) + std::log(cfg.soft_count_probs[n_soft]);
    const auto b = cfg.energy_bounds[channel];
    lp += -static_cast<double>(energies.size()) * std::log(b[1] - b[0]);
    for (double s : soft) {
        const double z = (s - cfg.soft_mean) / cfg.soft_std;
        lp += -0.5 * z * z - std::log(cfg.soft_std) - 0.5 * std::log(2 * M_PI);
    }
    lp += -std::log(cfg.decay_max);  // accepted decay length, Uniform(0, max)

    // Detector mean, recomputed voxel by voxel.
    const auto& y = t.observation->as_tensor().data;
    double ll = 0;
    for (std::uint32_t z = 0; z < cfg.grid[0]; ++z) {
        for (std::uint32_t r = 0; r < cfg.grid[1]; ++r) {
            for (std::uint32_t c = 0; c < cfg.grid[2]; ++c) {
                double mu = 0;
                for (std::size_t k = 0; k < energies.size(); ++k) {
                    double norm = 0;
                    for (std::uint32_t rr = 0; rr < cfg.grid[1]; ++rr) {
                        for (std::uint32_t cc = 0; cc < cfg.grid[2]; ++cc) {
                            norm += std::exp(-(std::pow(cc - cfg.particle_positions[k][0], 2) +
                                               std::pow(rr - cfg.particle_positions[k][1], 2)) /
                                             (2 * cfg.lateral_width * cfg.lateral_width));
                        }
                    }
                    const double w = std::exp(-(std::pow(c - cfg.particle_positions[k][0], 2) +
                                                std::pow(r - cfg.particle_positions[k][1], 2)) /
                                              (2 * cfg.lateral_width * cfg.lateral_width));
                    mu += energies[k] * cfg.longitudinal[z] * w / norm;
                }
                for (std::size_t j = 0; j < soft.size(); ++j) {
                    if (z == 0 && c == cfg.soft_positions[j][0] && r == cfg.soft_positions[j][1]) mu += soft[j];
                }
                const double v = y[(z * cfg.grid[1] + r) * cfg.grid[2] + c];
                const double e = (v - mu) / cfg.noise_std;
                ll += -0.5 * e * e - std::log(cfg.noise_std) - 0.5 * std::log(2 * M_PI);
            }
        }
    }
    return lp + ll;
}

}  // namespace

TEST_SUITE("toy_models") {
    TEST_CASE("conjugate has one latent address") {
        SimulatorEndpoint ep("inproc:conjugate");
        std::set<std::string> addrs;
        for (const auto& t : sample_prior(ep, 200, 1)) {
            CHECK(t.latent_count() == 1);
            addrs.insert(t.entries[0].address.full);
        }
        CHECK(addrs == std::set<std::string>{models::ConjugateModel::latent_address()});
    }

    TEST_CASE("discrete prior marginals within 3 sigma") {
        SimulatorEndpoint ep("inproc:discrete");
        const std::size_t n = 100000;
        std::size_t a1 = 0, b1 = 0;
        for (const auto& t : sample_prior(ep, n, 2)) {
            a1 += t.entries[0].value.as_i64();
            b1 += t.entries[1].value.as_i64();
        }
        const double sa = std::sqrt(0.7 * 0.3 / n), sb = std::sqrt(0.4 * 0.6 / n);
        CHECK(std::abs(a1 / double(n) - 0.7) < 3 * sa);
        CHECK(std::abs(b1 / double(n) - 0.4) < 3 * sb);
    }

    TEST_CASE("cascade trace types, channel frequencies, rejection loop") {
        SimulatorEndpoint ep("inproc:cascade");
        const models::CascadeConfig cfg;
        const std::size_t n = 10000;
        std::map<std::uint64_t, std::size_t> types;
        std::vector<std::size_t> channels(4, 0);
        std::size_t replaced_total = 0;
        for (const auto& t : sample_prior(ep, n, 3)) {
            ++types[t.type_id];
            ++channels[t.entries[0].value.as_i64()];
            std::size_t decay_latents = 0;
            for (const auto& e : t.entries) {
                replaced_total += e.kind == EntryKind::Replaced;
                if (e.name == "decay_length" && e.is_latent()) {
                    ++decay_latents;
                    CHECK(e.value.as_f64() <= cfg.rejection_threshold);
                    CHECK_FALSE(e.control);
                    CHECK(e.replace);
                }
            }
            CHECK(decay_latents == 1);
        }
        CHECK(types.size() >= 3);
        CHECK(replaced_total > 0);
        for (std::size_t c = 0; c < 4; ++c) {
            const double p = cfg.channel_probs[c];
            CHECK(std::abs(channels[c] / double(n) - p) < 3 * std::sqrt(p * (1 - p) / n));
        }
    }

    TEST_CASE("cascade log joint matches independent re-scoring") {
        SimulatorEndpoint ep("inproc:cascade");
        const models::CascadeConfig cfg;
        for (const auto& t : sample_prior(ep, 50, 8)) {
            CHECK(t.log_joint() == doctest::Approx(cascade_log_joint_oracle(t, cfg)).epsilon(1e-10));
        }
    }

    TEST_CASE("zero-noise replay reproduces the deposit") {
        SimulatorEndpoint ep("inproc:cascade");
        Gateway noisy(ep);
        PriorPolicy prior;
        const models::CascadeModel model;
        for (int r = 0; r < 10; ++r) {
            const auto t = noisy.execute(std::nullopt, prior, 21, r);
            Gateway clean(ep, GatewayOptions{false});
            auto replay = ReplayPolicy::from_trace(t, true);
            const auto u = clean.execute(std::nullopt, replay, 22, r);
            models::CascadeLatents l;
            for (const auto& e : t.entries) {
                if (e.name == "channel") l.channel = e.value.as_i64();
                if (e.name == "energy") l.energies.push_back(e.value.as_f64());
                if (e.name == "soft_energy") l.soft.push_back(e.value.as_f64());
            }
            CHECK(*u.observation == Value(model.deposit(l)));
            CHECK(u.observation->as_tensor().shape == std::vector<std::uint32_t>{4, 8, 8});
            CHECK(t.observation->as_tensor().shape == std::vector<std::uint32_t>{4, 8, 8});
        }
    }
}
