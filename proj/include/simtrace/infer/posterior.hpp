// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "simtrace/infer/importance.hpp"
#include "simtrace/infer/rmh.hpp"

namespace simtrace::infer {

// Columnar posterior sample set. Columns are latent keys ("full#instance");
// cells are empty where a sample lacks that latent.
struct PosteriorSamples {
    std::vector<std::string> keys;
    std::vector<std::uint64_t> type_ids;
    std::vector<double> log_weights;
    std::vector<std::vector<std::optional<double>>> rows;  // rows[i][k]

    std::size_t size() const { return rows.size(); }
    std::optional<std::size_t> column(const std::string& key) const;
    std::vector<double> normalized_weights() const;
    // Present values of one column with their renormalised weights.
    void marginal(std::size_t column, std::vector<double>& values, std::vector<double>& weights) const;
};

PosteriorSamples from_weighted(const WeightedTraceSet& ws);
// Post-burn-in, thinned chain iterations with zero log-weight.
PosteriorSamples from_chain(const MarkovChain& chain);

// CSV: "# <id> <key>" header lines map shorthand ids to keys, then a header
// row "type_id,log_weight,a0,a1,..." and one row per sample.
void write_posterior(std::ostream& os, const PosteriorSamples& ps);
void write_posterior(const std::string& path, const PosteriorSamples& ps);
PosteriorSamples read_posterior(std::istream& is);
PosteriorSamples read_posterior(const std::string& path);

// Wasserstein-1 distance between two weighted empirical distributions.
double wasserstein1(std::vector<double> xa, std::vector<double> wa, std::vector<double> xb, std::vector<double> wb);

struct Histogram {
    double low = 0, high = 0;
    std::vector<double> mass;  // normalised
};
Histogram histogram(const std::vector<double>& xs, const std::vector<double>& ws, double low, double high,
                    std::size_t bins);

struct MarginalComparison {
    std::string key;
    double w1 = 0;
    double mean_a = 0, mean_b = 0;
    double presence_a = 0, presence_b = 0;  // weighted fraction of samples carrying the key
    Histogram hist_a, hist_b;
};

std::vector<MarginalComparison> compare_posteriors(const PosteriorSamples& a, const PosteriorSamples& b,
                                                   std::size_t bins = 20);

}  // namespace simtrace::infer
