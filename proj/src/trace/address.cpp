// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/trace/address.hpp"

#include <algorithm>
#include <mutex>
#include <stdexcept>

#include "simtrace/trace/trace.hpp"

namespace simtrace {

std::string join_address(std::span<const std::string> frames, DistTag tag) {
    if (frames.empty()) throw std::invalid_argument("address needs at least one frame");
    std::string out;
    for (const auto& f : frames) {
        out += f;
        out += '/';
    }
    out += to_string(tag);
    return out;
}

namespace {

std::uint64_t frames_key(std::span<const std::string> frames, DistTag tag) {
    std::uint64_t h = kFnvOffset;
    for (const auto& f : frames) {
        h = fnv1a64(f, h);
        h = fnv1a64(std::string_view("\0", 1), h);
    }
    const char t = static_cast<char>(tag);
    return fnv1a64(std::string_view(&t, 1), h);
}

bool same_frames(const std::vector<std::string>& a, std::span<const std::string> b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

}  // namespace

std::string AddressCache::resolve(std::span<const std::string> frames, DistTag tag) {
    if (frames.empty()) throw std::invalid_argument("address needs at least one frame");
    const auto key = frames_key(frames, tag);
    {
        std::shared_lock lock(mu_);
        if (auto it = table_.find(key); it != table_.end()) {
            for (const auto& e : it->second) {
                if (e.tag == tag && same_frames(e.frames, frames)) {
                    ++hits_;
                    return e.full;
                }
            }
        }
    }
    std::unique_lock lock(mu_);
    auto& bucket = table_[key];
    for (const auto& e : bucket) {
        if (e.tag == tag && same_frames(e.frames, frames)) {
            ++hits_;
            return e.full;
        }
    }
    ++misses_;
    bucket.push_back({std::vector<std::string>(frames.begin(), frames.end()), tag, join_address(frames, tag)});
    return bucket.back().full;
}

std::size_t AddressCache::size() const {
    std::shared_lock lock(mu_);
    std::size_t n = 0;
    for (const auto& [k, v] : table_) n += v.size();
    return n;
}

std::string resolve_address(std::span<const std::string> frames, DistTag tag, AddressCache& cache) {
    return cache.resolve(frames, tag);
}

std::uint32_t AddressDictionary::intern(const std::string& full) {
    if (auto it = by_name_.find(full); it != by_name_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(by_id_.size());
    by_id_.push_back(full);
    by_name_.emplace(full, id);
    return id;
}

std::optional<std::uint32_t> AddressDictionary::find(std::string_view full) const {
    if (auto it = by_name_.find(std::string(full)); it != by_name_.end()) return it->second;
    return std::nullopt;
}

const std::string& AddressDictionary::lookup(std::uint32_t id) const {
    if (id >= by_id_.size()) throw std::out_of_range("unknown shorthand id " + std::to_string(id));
    return by_id_[id];
}

}  // namespace simtrace
