// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "simtrace/trace/trace.hpp"

namespace simtrace::sim {

// A sample request as seen by a policy, with the instance already assigned.
struct SiteInfo {
    const Address& address;
    const std::string& name;
    const Distribution& prior;
    bool control;
    bool replace;
};

class ProposalDistribution {
public:
    virtual ~ProposalDistribution() = default;
    virtual Value sample(CounterRng& rng) const = 0;
    virtual double log_prob(const Value& v) const = 0;
};

class DistributionProposal : public ProposalDistribution {
public:
    explicit DistributionProposal(Distribution d) : dist_(std::move(d)) {}
    Value sample(CounterRng& rng) const override { return dist_.sample(rng); }
    double log_prob(const Value& v) const override { return dist_.log_density(v); }

private:
    Distribution dist_;
};

// Supplies per-site proposals during a guided run, e.g. a trained network.
class ProposalSource {
public:
    virtual ~ProposalSource() = default;
    virtual void begin_run(const std::optional<Value>& observation) = 0;
    // nullptr means "use the prior" for this site.
    virtual std::unique_ptr<ProposalDistribution> propose(const SiteInfo& site) = 0;
    // Called with every value returned to the simulator, in order.
    virtual void record(const SiteInfo& site, const Value& value) { (void)site, (void)value; }
};

struct Draw {
    Value value;
    bool proposed = false;
    double log_q = 0.0;
    bool reused = false;
};

class SamplingPolicy {
public:
    virtual ~SamplingPolicy() = default;
    virtual void begin_run(const std::optional<Value>& observation) { (void)observation; }
    virtual Draw draw(const SiteInfo& site, CounterRng& rng) = 0;
};

class PriorPolicy : public SamplingPolicy {
public:
    Draw draw(const SiteInfo& site, CounterRng& rng) override;
};

// Reuses stored values keyed by address. Missing addresses, values outside the
// new distribution's support, and (unless replay_uncontrolled) uncontrolled
// sites get fresh prior draws. A stored value at a replace site is handed out
// once per run so rejection loops can continue with fresh draws.
class ReplayPolicy : public SamplingPolicy {
public:
    using ValueMap = std::unordered_map<Address, Value, AddressHash>;

    explicit ReplayPolicy(ValueMap values, bool replay_uncontrolled = false)
        : values_(std::move(values)), replay_uncontrolled_(replay_uncontrolled) {}
    static ReplayPolicy from_trace(const Trace& t, bool replay_uncontrolled = false);

    void set(const Address& a, Value v) { values_[a] = std::move(v); }
    void erase(const Address& a) { values_.erase(a); }
    const ValueMap& values() const { return values_; }

    void begin_run(const std::optional<Value>& observation) override;
    Draw draw(const SiteInfo& site, CounterRng& rng) override;

private:
    ValueMap values_;
    bool replay_uncontrolled_;
    std::unordered_set<Address, AddressHash> consumed_;
};

// Proposes control, non-replace sites from a ProposalSource; everything else
// from the prior (so those sites cancel in the weight).
class GuidedPolicy : public SamplingPolicy {
public:
    explicit GuidedPolicy(ProposalSource& source) : source_(source) {}
    void begin_run(const std::optional<Value>& observation) override { source_.begin_run(observation); }
    Draw draw(const SiteInfo& site, CounterRng& rng) override;

private:
    ProposalSource& source_;
};

// Proposes every control site whose address is in the map from a fixed
// distribution; handy as an analytic plug-in proposal.
class FixedProposalSource : public ProposalSource {
public:
    explicit FixedProposalSource(std::unordered_map<std::string, Distribution> by_full)
        : by_full_(std::move(by_full)) {}
    void begin_run(const std::optional<Value>&) override {}
    std::unique_ptr<ProposalDistribution> propose(const SiteInfo& site) override;

private:
    std::unordered_map<std::string, Distribution> by_full_;
};

}  // namespace simtrace::sim
