// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "simtrace/sim/endpoint.hpp"
#include "simtrace/sim/policy.hpp"

namespace simtrace::sim {

struct GatewayOptions {
    // Without a run observation the controller draws y from each observe
    // distribution; with observe_noise off it keeps the simulator's value.
    bool observe_noise = true;
};

// Drives runs on one endpoint and assembles traces. The controller owns all
// randomness: draw k of run r uses CounterRng(seed, r, k).
class Gateway {
public:
    explicit Gateway(SimulatorEndpoint& endpoint, GatewayOptions options = {})
        : endpoint_(endpoint), options_(options) {}

    // Throws RunTimeout, RunAborted or wire::SessionError; the endpoint is
    // closed on failure and reconnected by the next call.
    Trace execute(const std::optional<Value>& observation, SamplingPolicy& policy, std::uint64_t seed,
                  std::uint64_t run_index);

    SimulatorEndpoint& endpoint() { return endpoint_; }
    const GatewayOptions& options() const { return options_; }

private:
    Trace run_once(const std::optional<Value>& observation, SamplingPolicy& policy, std::uint64_t seed,
                   std::uint64_t run_index);

    SimulatorEndpoint& endpoint_;
    GatewayOptions options_;
};

// n prior traces with run indices 0..n-1.
std::vector<Trace> sample_prior(SimulatorEndpoint& endpoint, std::size_t n, std::uint64_t seed,
                                GatewayOptions options = {});

}  // namespace simtrace::sim
