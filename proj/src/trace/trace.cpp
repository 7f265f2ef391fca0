// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/trace/trace.hpp"

#include <stdexcept>

namespace simtrace {

std::string to_string(EntryKind k) {
    switch (k) {
        case EntryKind::Latent: return "Latent";
        case EntryKind::Observed: return "Observed";
        case EntryKind::Replaced: return "Replaced";
    }
    return "Unknown";
}

std::uint64_t type_hash(std::span<const Address> latent_addresses) {
    std::uint64_t h = kFnvOffset;
    for (const auto& a : latent_addresses) {
        h = fnv1a64(a.full, h);
        h = fnv1a64(std::string_view("\0", 1), h);
        const char le[4] = {static_cast<char>(a.instance), static_cast<char>(a.instance >> 8),
                            static_cast<char>(a.instance >> 16), static_cast<char>(a.instance >> 24)};
        h = fnv1a64(std::string_view(le, 4), h);
    }
    return h;
}

void Trace::finalize() {
    log_prior = 0.0;
    log_likelihood = 0.0;
    log_proposal = 0.0;
    for (const auto& e : entries) {
        if (e.kind == EntryKind::Latent) {
            log_prior += e.log_prob;
            log_proposal += e.proposal_log_prob();
        } else if (e.kind == EntryKind::Observed) {
            log_likelihood += e.log_prob;
        }
    }
    log_weight = log_prior + log_likelihood - log_proposal;
    type_id = trace_type(*this);
}

std::vector<Address> Trace::latent_addresses() const {
    std::vector<Address> out;
    for (const auto& e : entries) {
        if (e.is_latent()) out.push_back(e.address);
    }
    return out;
}

std::size_t Trace::latent_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.is_latent();
    return n;
}

const TraceEntry* Trace::find_latent(const Address& a) const {
    for (const auto& e : entries) {
        if (e.is_latent() && e.address == a) return &e;
    }
    return nullptr;
}

std::vector<Value> Trace::observed_values() const {
    std::vector<Value> out;
    for (const auto& e : entries) {
        if (e.is_observed()) out.push_back(e.value);
    }
    return out;
}

std::optional<Value> derive_observation(const std::vector<TraceEntry>& entries) {
    std::vector<const Value*> obs;
    for (const auto& e : entries) {
        if (e.is_observed()) obs.push_back(&e.value);
    }
    if (obs.empty()) return std::nullopt;
    if (obs.size() == 1) return *obs.front();
    std::vector<double> flat;
    for (const auto* v : obs) {
        auto f = v->flatten();
        flat.insert(flat.end(), f.begin(), f.end());
    }
    const auto n = static_cast<std::uint32_t>(flat.size());
    return Value::tensor({n}, std::move(flat));
}

double log_joint(const Trace& t) { return t.log_joint(); }

std::uint64_t trace_type(const Trace& t) {
    const auto addrs = t.latent_addresses();
    return type_hash(addrs);
}

bool same_type(const Trace& a, const Trace& b) { return a.latent_addresses() == b.latent_addresses(); }

std::uint32_t TraceBuilder::peek_instance(const std::string& full, bool replace) const {
    if (replace) {
        if (auto it = open_replace_.find(full); it != open_replace_.end()) return entries_[it->second].address.instance;
    }
    auto it = counters_.find(full);
    return it == counters_.end() ? 1 : it->second + 1;
}

const TraceEntry& TraceBuilder::add_sample(const std::string& full, std::string name, Distribution dist, Value value,
                                           bool control, bool replace) {
    if (full.empty()) throw std::invalid_argument("empty sample address");
    std::uint32_t instance;
    auto open = open_replace_.find(full);
    if (replace && open != open_replace_.end()) {
        instance = entries_[open->second].address.instance;
        entries_[open->second].kind = EntryKind::Replaced;
    } else {
        instance = ++counters_[full];
    }
    if (replace) {
        open_replace_[full] = entries_.size();
    } else if (open != open_replace_.end()) {
        open_replace_.erase(open);
    }
    TraceEntry e;
    e.address = {full, instance};
    e.name = std::move(name);
    e.log_prob = dist.log_density(value);
    e.distribution = std::move(dist);
    e.value = std::move(value);
    e.kind = EntryKind::Latent;
    e.control = control;
    e.replace = replace;
    entries_.push_back(std::move(e));
    return entries_.back();
}

const TraceEntry& TraceBuilder::add_observe(const std::string& full, Distribution dist, Value value) {
    if (full.empty()) throw std::invalid_argument("empty observe address");
    TraceEntry e;
    e.address = {full, ++counters_[full]};
    e.log_prob = dist.log_density(value);
    e.distribution = std::move(dist);
    e.value = std::move(value);
    e.kind = EntryKind::Observed;
    e.control = false;
    entries_.push_back(std::move(e));
    return entries_.back();
}

Trace TraceBuilder::finish(Value result, std::optional<Value> observation) {
    Trace t;
    t.entries = std::move(entries_);
    t.result = std::move(result);
    t.observation = observation ? std::move(observation) : derive_observation(t.entries);
    t.finalize();
    entries_.clear();
    counters_.clear();
    open_replace_.clear();
    return t;
}

}  // namespace simtrace
