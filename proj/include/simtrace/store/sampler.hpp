// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "simtrace/store/dataset.hpp"

namespace simtrace::store {

struct Chunk {
    std::size_t begin = 0;  // dataset positions [begin, end)
    std::size_t end = 0;
    double mean_length = 0.0;
    std::size_t bucket = 0;
    std::size_t size() const { return end - begin; }
};

struct MinibatchPlan {
    std::vector<Chunk> chunks;                      // in shuffled order
    std::vector<std::vector<std::size_t>> workers;  // chunk ids per worker, in step order

    // Every dataset position exactly once.
    std::vector<std::size_t> epoch_positions() const;
};

// Splits positions into contiguous chunks of B, shuffles them with epoch_seed,
// optionally groups them into `buckets` by mean trace length, and deals them
// round-robin to workers.
MinibatchPlan plan_minibatches(std::span<const std::uint32_t> lengths, std::size_t B, std::size_t workers,
                               std::uint64_t epoch_seed, std::size_t buckets = 1);
MinibatchPlan plan_minibatches(const TraceDataset& ds, std::size_t B, std::size_t workers, std::uint64_t epoch_seed,
                               std::size_t buckets = 1);

// Number of distinct trace types per chunk, averaged over the plan.
double mean_sub_minibatches(const MinibatchPlan& plan, std::span<const std::uint64_t> type_ids);

// Fisher-Yates driven by the counter RNG, identical on every platform.
void seeded_shuffle(std::span<std::size_t> items, std::uint64_t seed);

}  // namespace simtrace::store
