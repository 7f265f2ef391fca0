// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/sim/policy.hpp"

#include <cmath>

namespace simtrace::sim {

Draw PriorPolicy::draw(const SiteInfo& site, CounterRng& rng) {
    Draw d;
    d.value = site.prior.sample(rng);
    return d;
}

ReplayPolicy ReplayPolicy::from_trace(const Trace& t, bool replay_uncontrolled) {
    ValueMap values;
    for (const auto& e : t.entries) {
        if (e.is_latent()) values.emplace(e.address, e.value);
    }
    return ReplayPolicy(std::move(values), replay_uncontrolled);
}

void ReplayPolicy::begin_run(const std::optional<Value>&) { consumed_.clear(); }

Draw ReplayPolicy::draw(const SiteInfo& site, CounterRng& rng) {
    Draw d;
    if (site.control || replay_uncontrolled_) {
        if (auto it = values_.find(site.address); it != values_.end()) {
            const bool fresh_slot = !site.replace || consumed_.insert(site.address).second;
            if (fresh_slot && it->second.tag() == site.prior.sample_tag() && std::isfinite(site.prior.log_density(it->second))) {
                d.value = it->second;
                d.reused = true;
                return d;
            }
        }
    }
    d.value = site.prior.sample(rng);
    return d;
}

Draw GuidedPolicy::draw(const SiteInfo& site, CounterRng& rng) {
    Draw d;
    if (site.control && !site.replace) {
        if (auto q = source_.propose(site)) {
            d.value = q->sample(rng);
            d.log_q = q->log_prob(d.value);
            d.proposed = true;
        }
    }
    if (!d.proposed) d.value = site.prior.sample(rng);
    source_.record(site, d.value);
    return d;
}

std::unique_ptr<ProposalDistribution> FixedProposalSource::propose(const SiteInfo& site) {
    auto it = by_full_.find(site.address.full);
    if (it == by_full_.end()) return nullptr;
    return std::make_unique<DistributionProposal>(it->second);
}

}  // namespace simtrace::sim
