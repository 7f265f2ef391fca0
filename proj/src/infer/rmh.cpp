// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/infer/rmh.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <unordered_set>

#include "simtrace/infer/importance.hpp"

namespace simtrace::infer {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::uint64_t kSelectStream = 0x5E1EC7ull;

std::vector<const TraceEntry*> control_sites(const Trace& t) {
    std::vector<const TraceEntry*> out;
    for (const auto& e : t.entries) {
        if (e.is_latent() && e.control) out.push_back(&e);
    }
    return out;
}

struct Proposal {
    Value value;
    double log_forward = 0;  // log K(v'|v)
    double log_reverse = 0;  // log K(v|v')
};

Proposal propose(const TraceEntry& site, const RmhOptions& opts, CounterRng& rng) {
    const auto& d = site.distribution;
    Proposal p;
    if (opts.kernel == RmhOptions::Kernel::RandomWalk && d.is_continuous_scalar()) {
        p.value = site.value.as_f64() + opts.random_walk_scale * d.scale() * rng.standard_normal();
        return p;  // symmetric: forward and reverse cancel
    }
    p.value = d.sample(rng);
    p.log_forward = d.log_density(p.value);
    p.log_reverse = d.log_density(site.value);
    return p;
}

}  // namespace

std::vector<std::size_t> MarkovChain::kept() const {
    std::vector<std::size_t> out;
    for (std::size_t i = burn_in; i < size(); i += std::max<std::size_t>(thinning, 1)) out.push_back(i);
    return out;
}

std::vector<double> MarkovChain::series(const std::string& key, bool after_burn_in) const {
    std::vector<double> cache(states.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t s = 0; s < states.size(); ++s) {
        if (auto v = latent_value(*states[s], key)) cache[s] = *v;
    }
    std::vector<double> out;
    if (after_burn_in) {
        for (auto i : kept()) out.push_back(cache[state_of[i]]);
    } else {
        for (auto s : state_of) out.push_back(cache[s]);
    }
    return out;
}

MarkovChain rmh_run(sim::SimulatorEndpoint& endpoint, const Value& observation, const RmhOptions& opts,
                    std::optional<Trace> init) {
    if (opts.iterations == 0) throw std::invalid_argument("rmh needs at least one iteration");
    sim::Gateway gw(endpoint, opts.gateway);
    const std::optional<Value> obs = observation;
    const std::uint64_t run_seed = mix64(opts.seed ^ 0xA5A5A5A5ull);

    // Run with one retry after the endpoint is reset; nullopt when both fail.
    auto attempt = [&](sim::SamplingPolicy& policy, std::uint64_t run) -> std::optional<Trace> {
        for (int tries = 0; tries < 2; ++tries) {
            try {
                auto t = gw.execute(obs, policy, run_seed, run * 2 + tries);
                strip_observed(t);
                return t;
            } catch (const std::exception& e) {
                std::cerr << "warning: rmh run " << run << " failed (" << e.what() << ")"
                          << (tries == 0 ? "; retrying\n" : "; skipping iteration\n");
            }
        }
        return std::nullopt;
    };

    MarkovChain chain;
    chain.burn_in = opts.burn_in.value_or(opts.iterations / 10);
    chain.thinning = std::max<std::size_t>(opts.thinning, 1);
    chain.state_of.reserve(opts.iterations);

    std::shared_ptr<const Trace> current;
    if (init) {
        strip_observed(*init);
        current = std::make_shared<const Trace>(std::move(*init));
    } else {
        sim::PriorPolicy prior;
        for (std::uint64_t k = 0; !current; ++k) {
            if (k > 100) throw std::runtime_error("rmh could not obtain an initial trace");
            if (auto t = attempt(prior, (std::uint64_t{1} << 40) + k)) current = std::make_shared<const Trace>(std::move(*t));
        }
    }
    chain.states.push_back(current);

    for (std::size_t it = 0; it < opts.iterations; ++it) {
        CounterRng rng(opts.seed, it, kSelectStream);
        const auto sites = control_sites(*current);
        if (!sites.empty()) {
            const TraceEntry& site = *sites[rng.below(sites.size())];
            auto prop = propose(site, opts, rng);
            auto& stats = chain.site_stats[site.address.full];
            ++stats.proposed;
            ++chain.proposals;
            bool accept = false;
            std::optional<Trace> next;
            if (std::isfinite(site.distribution.log_density(prop.value))) {
                sim::ReplayPolicy::ValueMap values;
                for (const auto& e : current->entries) {
                    if (e.is_latent()) values.emplace(e.address, e.value);
                }
                values[site.address] = prop.value;
                sim::ReplayPolicy replay(std::move(values), false);
                next = attempt(replay, it);
                if (!next) ++chain.skipped;
            }
            if (next) {
                // Reused (address, value) pairs; everything else in x is stale.
                std::unordered_set<Address, AddressHash> reused;
                double fresh_new = 0;
                for (const auto& e : next->entries) {
                    if (!e.is_latent()) continue;
                    if (e.reused) reused.insert(e.address);
                    else fresh_new += e.log_prob;
                }
                double stale_old = 0;
                for (const auto& e : current->entries) {
                    if (e.is_latent() && !reused.count(e.address)) stale_old += e.log_prob;
                }
                const auto next_sites = control_sites(*next).size();
                const double log_alpha = next->log_joint() - current->log_joint() - fresh_new + stale_old +
                                         std::log(static_cast<double>(sites.size())) -
                                         std::log(static_cast<double>(next_sites)) + prop.log_reverse -
                                         prop.log_forward;
                const double u = rng.uniform();
                accept = std::isfinite(next->log_joint()) && (log_alpha >= 0 || std::log(u) < log_alpha);
            }
            if (accept) {
                ++chain.accepted;
                ++stats.accepted;
                current = std::make_shared<const Trace>(std::move(*next));
                chain.states.push_back(current);
            }
        }
        chain.state_of.push_back(static_cast<std::uint32_t>(chain.states.size() - 1));
    }
    return chain;
}

}  // namespace simtrace::infer
