// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <compare>
#include <cstdint>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "simtrace/wire/distribution.hpp"

namespace simtrace {

// Site identifier: "<frame1>/<frame2>/.../<DistTag>" plus a per-trace occurrence
// counter starting at 1.
struct Address {
    std::string full;
    std::uint32_t instance = 1;

    // "full#instance", used as the proposal layer registry key.
    std::string key() const { return full + "#" + std::to_string(instance); }

    friend bool operator==(const Address&, const Address&) = default;
    friend auto operator<=>(const Address&, const Address&) = default;
};

struct AddressHash {
    std::size_t operator()(const Address& a) const noexcept {
        return std::hash<std::string>{}(a.full) ^ (std::size_t{a.instance} * 0x9E3779B97F4A7C15ull);
    }
};

std::string join_address(std::span<const std::string> frames, DistTag tag);

// Caches frame-list -> address string resolutions. Lookups take a shared
// lock; insertion takes an exclusive lock.
class AddressCache {
public:
    std::string resolve(std::span<const std::string> frames, DistTag tag);

    std::uint64_t hits() const { return hits_.load(); }
    std::uint64_t misses() const { return misses_.load(); }
    std::size_t size() const;

private:
    struct Entry {
        std::vector<std::string> frames;
        DistTag tag;
        std::string full;
    };
    mutable std::shared_mutex mu_;
    std::unordered_map<std::uint64_t, std::vector<Entry>> table_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
};

std::string resolve_address(std::span<const std::string> frames, DistTag tag, AddressCache& cache);

// Bidirectional full-address <-> dense u32 shorthand id, first-encounter order.
class AddressDictionary {
public:
    std::uint32_t intern(const std::string& full);
    std::optional<std::uint32_t> find(std::string_view full) const;
    const std::string& lookup(std::uint32_t id) const;
    std::size_t size() const { return by_id_.size(); }
    const std::vector<std::string>& entries() const { return by_id_; }

    friend bool operator==(const AddressDictionary& a, const AddressDictionary& b) { return a.by_id_ == b.by_id_; }

private:
    std::vector<std::string> by_id_;
    std::unordered_map<std::string, std::uint32_t> by_name_;
};

}  // namespace simtrace
