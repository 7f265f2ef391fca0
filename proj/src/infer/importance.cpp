// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/infer/importance.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <thread>

namespace simtrace::infer {

namespace {

double max_finite(const std::vector<double>& w) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : w) {
        if (std::isfinite(x)) m = std::max(m, x);
    }
    return m;
}

}  // namespace

double log_mean_exp(const std::vector<double>& w) {
    if (w.empty()) throw std::invalid_argument("log_mean_exp of an empty set");
    const double m = max_finite(w);
    if (!std::isfinite(m)) return -std::numeric_limits<double>::infinity();
    double s = 0;
    for (double x : w) s += std::exp(x - m);
    return m + std::log(s) - std::log(static_cast<double>(w.size()));
}

double effective_sample_size(const std::vector<double>& log_weights) {
    const double m = max_finite(log_weights);
    if (!std::isfinite(m)) return 0.0;
    double s = 0, s2 = 0;
    for (double x : log_weights) {
        const double w = std::exp(x - m);
        s += w;
        s2 += w * w;
    }
    return s * s / s2;
}

std::vector<double> WeightedTraceSet::normalized_weights() const {
    const double m = max_finite(log_weights);
    if (!std::isfinite(m)) throw DegenerateWeights("no finite importance weight");
    std::vector<double> w(log_weights.size());
    double s = 0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] = std::exp(log_weights[i] - m);
    for (auto& x : w) x /= s;
    return w;
}

double WeightedTraceSet::ess() const { return effective_sample_size(log_weights); }

double WeightedTraceSet::expectation(const std::function<double(const Trace&)>& f) const {
    const auto w = normalized_weights();
    double acc = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] > 0) acc += w[i] * f(traces[i]);
    }
    return acc;
}

double estimate_log_evidence(const WeightedTraceSet& ws) { return log_mean_exp(ws.log_weights); }

void strip_observed(Trace& t) {
    for (auto& e : t.entries) {
        if (e.is_observed()) {
            e.value = Value();
            e.distribution.params.clear();
            e.distribution.params.shrink_to_fit();
        }
    }
}

std::optional<double> latent_value(const Trace& t, const std::string& key) {
    for (const auto& e : t.entries) {
        if (e.is_latent() && e.address.key() == key) {
            if (e.value.is_tensor() || e.value.is_string()) return std::nullopt;
            return e.value.to_double();
        }
    }
    return std::nullopt;
}

namespace {

void run_block(sim::SimulatorEndpoint& endpoint, const Value& observation, const ImportanceOptions& opts,
               sim::ProposalSource* proposal, std::size_t begin, std::size_t end, WeightedTraceSet& out) {
    sim::Gateway gw(endpoint, opts.gateway);
    sim::PriorPolicy prior;
    std::optional<sim::GuidedPolicy> guided;
    if (proposal) guided.emplace(*proposal);
    sim::SamplingPolicy& policy = guided ? static_cast<sim::SamplingPolicy&>(*guided) : prior;
    for (std::size_t i = begin; i < end; ++i) {
        try {
            auto t = gw.execute(observation, policy, opts.seed, i);
            if (opts.strip_observed) strip_observed(t);
            out.log_weights.push_back(t.log_weight);
            out.traces.push_back(std::move(t));
        } catch (const sim::RunAborted& e) {
            ++out.aborted;
            std::cerr << "warning: run " << i << " aborted and discarded: " << e.what() << "\n";
        } catch (const sim::RunTimeout& e) {
            ++out.aborted;
            std::cerr << "warning: run " << i << " timed out and was discarded: " << e.what() << "\n";
        }
    }
}

void check(const WeightedTraceSet& ws) {
    if (ws.traces.empty()) throw DegenerateWeights("every run failed");
    ws.normalized_weights();
}

}  // namespace

WeightedTraceSet importance_sample(sim::SimulatorEndpoint& endpoint, const Value& observation,
                                   const ImportanceOptions& opts, sim::ProposalSource* proposal) {
    if (opts.n == 0) throw std::invalid_argument("importance sampling needs n >= 1");
    WeightedTraceSet out;
    out.traces.reserve(opts.n);
    run_block(endpoint, observation, opts, proposal, 0, opts.n, out);
    check(out);
    return out;
}

WeightedTraceSet parallel_importance_sample(const std::string& spec, const Value& observation,
                                            const ImportanceOptions& opts, std::size_t workers,
                                            const ProposalFactory& proposal) {
    if (opts.n == 0) throw std::invalid_argument("importance sampling needs n >= 1");
    workers = std::clamp<std::size_t>(workers, 1, opts.n);
    std::vector<WeightedTraceSet> parts(workers);
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            try {
                sim::SimulatorEndpoint ep(spec);
                auto src = proposal ? proposal() : nullptr;
                const std::size_t begin = opts.n * w / workers, end = opts.n * (w + 1) / workers;
                run_block(ep, observation, opts, src.get(), begin, end, parts[w]);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    WeightedTraceSet out;
    for (auto& p : parts) {
        std::move(p.traces.begin(), p.traces.end(), std::back_inserter(out.traces));
        out.log_weights.insert(out.log_weights.end(), p.log_weights.begin(), p.log_weights.end());
        out.aborted += p.aborted;
    }
    check(out);
    return out;
}

}  // namespace simtrace::infer
