// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "simtrace/trace/address.hpp"
#include "simtrace/wire/distribution.hpp"
#include "simtrace/wire/value.hpp"

namespace simtrace {

enum class EntryKind : std::uint8_t { Latent = 0, Observed = 1, Replaced = 2 };

std::string to_string(EntryKind k);

struct TraceEntry {
    Address address;
    std::string name;
    Distribution distribution;
    Value value;
    double log_prob = 0.0;
    EntryKind kind = EntryKind::Latent;
    bool control = true;
    bool replace = false;
    // Set by the gateway: value came from a proposal (log_q is its density)
    // or was reused from a replayed trace.
    bool proposed = false;
    bool reused = false;
    double log_q = 0.0;

    // Proposal log density; equals log_prob for prior draws.
    double proposal_log_prob() const { return proposed ? log_q : log_prob; }

    bool is_latent() const { return kind == EntryKind::Latent; }
    bool is_observed() const { return kind == EntryKind::Observed; }
};

inline constexpr std::uint64_t kFnvOffset = 0xCBF29CE484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001B3ull;

constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = kFnvOffset) {
    for (char c : bytes) {
        h ^= static_cast<std::uint8_t>(c);
        h *= kFnvPrime;
    }
    return h;
}

// FNV-1a over the Latent address sequence: for each entry, full bytes, a 0x00
// separator, then the instance as u32 LE. The empty sequence hashes to the offset basis.
std::uint64_t type_hash(std::span<const Address> latent_addresses);

struct Trace {
    std::vector<TraceEntry> entries;
    std::optional<Value> observation;
    Value result;
    double log_prior = 0.0;
    double log_likelihood = 0.0;
    // Sum of log q over latents; zero under the prior.
    double log_proposal = 0.0;
    double log_weight = 0.0;
    std::uint64_t type_id = kFnvOffset;

    double log_joint() const { return log_prior + log_likelihood; }

    // Recomputes log_prior, log_likelihood, log_proposal, log_weight and type_id
    // from the entries.
    void finalize();

    std::vector<Address> latent_addresses() const;
    std::size_t latent_count() const;
    const TraceEntry* find_latent(const Address& a) const;
    // Observed values in order of appearance.
    std::vector<Value> observed_values() const;
};

// Observation implied by the observed entries: the single observed value, or
// all observed values flattened into one {n} tensor; empty when there are none.
std::optional<Value> derive_observation(const std::vector<TraceEntry>& entries);

double log_joint(const Trace& t);
std::uint64_t trace_type(const Trace& t);

// True when both traces have the same Latent address sequence.
bool same_type(const Trace& a, const Trace& b);

// Records sample/observe events in order, assigning instance counters and
// applying replace semantics: a replace draw at an address whose previous draw
// was also a replace draw reuses that instance and marks the earlier entry Replaced.
class TraceBuilder {
public:
    const TraceEntry& add_sample(const std::string& full, std::string name, Distribution dist, Value value,
                                 bool control, bool replace);
    const TraceEntry& add_observe(const std::string& full, Distribution dist, Value value);
    // Instance the next sample at `full` would receive.
    std::uint32_t peek_instance(const std::string& full, bool replace) const;

    Trace finish(Value result, std::optional<Value> observation);

    const std::vector<TraceEntry>& entries() const { return entries_; }
    TraceEntry& last() { return entries_.back(); }

private:
    std::vector<TraceEntry> entries_;
    std::unordered_map<std::string, std::uint32_t> counters_;
    // Index of the live replace entry per address, if any.
    std::unordered_map<std::string, std::size_t> open_replace_;
};

}  // namespace simtrace
