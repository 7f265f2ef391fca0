// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/infer/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace simtrace::infer {

std::vector<double> autocorrelation(std::span<const double> xs, std::size_t max_lag) {
    const std::size_t n = xs.size();
    if (n <= max_lag) throw std::invalid_argument("series must be longer than max_lag");
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(n);
    double c0 = 0;
    for (double x : xs) c0 += (x - mean) * (x - mean);
    std::vector<double> rho(max_lag + 1, 0.0);
    rho[0] = 1.0;
    if (c0 == 0) return rho;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        double ck = 0;
        for (std::size_t i = 0; i + k < n; ++i) ck += (xs[i] - mean) * (xs[i + k] - mean);
        rho[k] = ck / c0;
    }
    return rho;
}

double autocorrelation_ess(std::span<const double> xs, std::size_t max_lag) {
    const auto rho = autocorrelation(xs, max_lag);
    double sum = 0;
    for (std::size_t k = 1; k < rho.size(); ++k) {
        if (rho[k] < 0) break;
        sum += rho[k];
    }
    return static_cast<double>(xs.size()) / (1 + 2 * sum);
}

double gelman_rubin(const std::vector<std::vector<double>>& chains) {
    const std::size_t m = chains.size();
    if (m < 2) throw std::invalid_argument("gelman_rubin needs at least two chains");
    const std::size_t n = chains[0].size();
    if (n < 10) throw std::invalid_argument("gelman_rubin needs chains of length >= 10");
    for (const auto& c : chains) {
        if (c.size() != n) throw std::invalid_argument("gelman_rubin needs equal-length chains");
    }
    std::vector<double> means(m);
    double W = 0;
    for (std::size_t j = 0; j < m; ++j) {
        double mu = 0;
        for (double x : chains[j]) mu += x;
        mu /= static_cast<double>(n);
        means[j] = mu;
        double s2 = 0;
        for (double x : chains[j]) s2 += (x - mu) * (x - mu);
        W += s2 / static_cast<double>(n - 1);
    }
    W /= static_cast<double>(m);
    double grand = 0;
    for (double mu : means) grand += mu;
    grand /= static_cast<double>(m);
    double B = 0;
    for (double mu : means) B += (mu - grand) * (mu - grand);
    B *= static_cast<double>(n) / static_cast<double>(m - 1);
    if (W == 0) return B == 0 ? 1.0 : std::numeric_limits<double>::infinity();
    const double nd = static_cast<double>(n);
    const double V = (nd - 1) / nd * W + B / nd;
    return std::sqrt(V / W);
}

Moments weighted_moments(std::span<const double> xs, std::span<const double> weights) {
    if (xs.empty()) throw std::invalid_argument("moments of an empty sample");
    if (!weights.empty() && weights.size() != xs.size()) throw std::invalid_argument("weight count mismatch");
    double wsum = 0, mean = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        wsum += w;
        mean += w * xs[i];
    }
    mean /= wsum;
    double var = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        var += w * (xs[i] - mean) * (xs[i] - mean);
    }
    return {mean, var / wsum};
}

}  // namespace simtrace::infer
