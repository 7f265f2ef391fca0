// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "simtrace/sim/gateway.hpp"

namespace simtrace::infer {

struct RmhOptions {
    std::size_t iterations = 10000;
    std::uint64_t seed = 0;
    // Defaults to 10% of iterations when unset.
    std::optional<std::size_t> burn_in;
    std::size_t thinning = 1;
    enum class Kernel { Prior, RandomWalk };
    Kernel kernel = Kernel::Prior;
    // Random-walk step in units of the site's prior scale. Discrete sites
    // always use the prior kernel.
    double random_walk_scale = 0.5;
    sim::GatewayOptions gateway;
};

struct SiteStats {
    std::size_t proposed = 0;
    std::size_t accepted = 0;
};

// Distinct states are stored once; iteration i is at states[state_of[i]].
struct MarkovChain {
    std::vector<std::shared_ptr<const Trace>> states;
    std::vector<std::uint32_t> state_of;
    std::size_t accepted = 0;
    std::size_t proposals = 0;
    std::size_t skipped = 0;
    std::size_t burn_in = 0;
    std::size_t thinning = 1;
    std::map<std::string, SiteStats> site_stats;  // by full address

    std::size_t size() const { return state_of.size(); }
    const Trace& at(std::size_t i) const { return *states[state_of[i]]; }
    double acceptance_rate() const { return proposals ? static_cast<double>(accepted) / proposals : 0.0; }
    // Post-burn-in, thinned iteration indices.
    std::vector<std::size_t> kept() const;
    // Scalar trace of the latent at `key`; NaN where absent.
    std::vector<double> series(const std::string& key, bool after_burn_in = true) const;
};

// Single-site lightweight Metropolis-Hastings; see docs/rmh.md.
MarkovChain rmh_run(sim::SimulatorEndpoint& endpoint, const Value& observation, const RmhOptions& opts,
                    std::optional<Trace> init = std::nullopt);

}  // namespace simtrace::infer
