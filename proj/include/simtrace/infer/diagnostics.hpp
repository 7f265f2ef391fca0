// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

namespace simtrace::infer {

// Normalised autocorrelation rho_0..rho_max_lag (biased estimator; rho_0 = 1).
// A constant series has rho_k = 0 for k >= 1. Requires size > max_lag.
std::vector<double> autocorrelation(std::span<const double> xs, std::size_t max_lag);

// n / (1 + 2 sum rho_k), summing k >= 1 until the first negative rho.
double autocorrelation_ess(std::span<const double> xs, std::size_t max_lag);

// Potential scale reduction sqrt(((n-1)/n W + B/n) / W) for >= 2 chains of
// equal length >= 10. Returns 1 when all chains are constant and equal.
double gelman_rubin(const std::vector<std::vector<double>>& chains);

struct Moments {
    double mean = 0;
    double variance = 0;
};
// Weighted mean and variance with normalised weights (empty weights = uniform).
Moments weighted_moments(std::span<const double> xs, std::span<const double> weights = {});

}  // namespace simtrace::infer
