// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "simtrace/sim/gateway.hpp"

namespace simtrace::infer {

class DegenerateWeights : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct WeightedTraceSet {
    std::vector<Trace> traces;
    std::vector<double> log_weights;
    std::size_t aborted = 0;  // runs discarded after simulator failure

    std::size_t size() const { return traces.size(); }
    // Self-normalised weights; throws DegenerateWeights when no weight is finite.
    std::vector<double> normalized_weights() const;
    double ess() const;
    // Self-normalised expectation of f over the traces.
    double expectation(const std::function<double(const Trace&)>& f) const;
};

// log(mean(exp(w))) evaluated stably; -inf for an all -inf input.
double log_mean_exp(const std::vector<double>& w);
double effective_sample_size(const std::vector<double>& log_weights);
double estimate_log_evidence(const WeightedTraceSet& ws);

using ProposalFactory = std::function<std::unique_ptr<sim::ProposalSource>()>;

struct ImportanceOptions {
    std::size_t n = 1000;
    std::uint64_t seed = 0;
    sim::GatewayOptions gateway;
    // Drop observed values from stored traces (they equal the observation).
    bool strip_observed = true;
};

// Runs n guided (or prior, when proposal is null) executions with run indices
// 0..n-1. Failed runs are discarded and counted.
WeightedTraceSet importance_sample(sim::SimulatorEndpoint& endpoint, const Value& observation,
                                   const ImportanceOptions& opts, sim::ProposalSource* proposal = nullptr);

// Same estimator fanned out over `workers` endpoints built from `spec`. Run
// indices are split into contiguous blocks, so the result does not depend on
// the worker count.
WeightedTraceSet parallel_importance_sample(const std::string& spec, const Value& observation,
                                            const ImportanceOptions& opts, std::size_t workers,
                                            const ProposalFactory& proposal = {});

// Latent value at `key` ("full#instance") as a double, if present and scalar.
std::optional<double> latent_value(const Trace& t, const std::string& key);

// Drops per-entry observed payloads, keeping their log_prob.
void strip_observed(Trace& t);

}  // namespace simtrace::infer
