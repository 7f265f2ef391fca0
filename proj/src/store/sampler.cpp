// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/store/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "simtrace/sim/rng.hpp"

namespace simtrace::store {

void seeded_shuffle(std::span<std::size_t> items, std::uint64_t seed) {
    CounterRng rng(seed, 0x5A3B1E, 0);
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng.below(i)]);
}

std::vector<std::size_t> MinibatchPlan::epoch_positions() const {
    std::vector<std::size_t> out;
    for (const auto& w : workers) {
        for (auto c : w) {
            for (std::size_t i = chunks[c].begin; i < chunks[c].end; ++i) out.push_back(i);
        }
    }
    return out;
}

MinibatchPlan plan_minibatches(std::span<const std::uint32_t> lengths, std::size_t B, std::size_t workers,
                               std::uint64_t epoch_seed, std::size_t buckets) {
    if (B == 0) throw std::invalid_argument("minibatch size must be at least 1");
    if (workers == 0) throw std::invalid_argument("worker count must be at least 1");
    if (buckets == 0) throw std::invalid_argument("bucket count must be at least 1");
    const std::size_t n = lengths.size();
    std::vector<Chunk> base;
    for (std::size_t lo = 0; lo < n; lo += B) {
        Chunk c{lo, std::min(n, lo + B)};
        double s = 0;
        for (std::size_t i = c.begin; i < c.end; ++i) s += lengths[i];
        c.mean_length = s / static_cast<double>(c.size());
        base.push_back(c);
    }
    std::vector<std::size_t> order(base.size());
    std::iota(order.begin(), order.end(), 0);
    seeded_shuffle(order, epoch_seed);

    MinibatchPlan plan;
    for (auto i : order) plan.chunks.push_back(base[i]);
    const std::size_t m = plan.chunks.size();
    std::vector<std::size_t> deal(m);
    std::iota(deal.begin(), deal.end(), 0);
    if (buckets > 1 && m > 0) {
        // rank by length (ties keep the shuffled order), then equal-count buckets
        std::stable_sort(deal.begin(), deal.end(), [&](std::size_t a, std::size_t b) {
            return plan.chunks[a].mean_length < plan.chunks[b].mean_length;
        });
        for (std::size_t r = 0; r < m; ++r) plan.chunks[deal[r]].bucket = r * buckets / m;
        // deal bucket by bucket, keeping the shuffled order inside each
        std::stable_sort(deal.begin(), deal.end(), [&](std::size_t a, std::size_t b) {
            return std::tie(plan.chunks[a].bucket, a) < std::tie(plan.chunks[b].bucket, b);
        });
    }
    plan.workers.assign(workers, {});
    for (std::size_t r = 0; r < m; ++r) plan.workers[r % workers].push_back(deal[r]);
    return plan;
}

MinibatchPlan plan_minibatches(const TraceDataset& ds, std::size_t B, std::size_t workers, std::uint64_t epoch_seed,
                               std::size_t buckets) {
    std::vector<std::uint32_t> lengths(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) lengths[i] = ds.entry(i).latent_count;
    return plan_minibatches(lengths, B, workers, epoch_seed, buckets);
}

double mean_sub_minibatches(const MinibatchPlan& plan, std::span<const std::uint64_t> type_ids) {
    if (plan.chunks.empty()) return 0.0;
    double total = 0;
    for (const auto& c : plan.chunks) {
        std::unordered_set<std::uint64_t> types(type_ids.begin() + static_cast<std::ptrdiff_t>(c.begin),
                                                type_ids.begin() + static_cast<std::ptrdiff_t>(c.end));
        total += static_cast<double>(types.size());
    }
    return total / static_cast<double>(plan.chunks.size());
}

}  // namespace simtrace::store
