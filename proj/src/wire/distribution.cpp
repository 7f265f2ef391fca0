// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/wire/distribution.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/erf.hpp>

namespace simtrace {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt2 = 1.41421356237309504880;

[[noreturn]] void invalid(const std::string& field, const std::string& msg) {
    throw InvalidDistribution(field, msg);
}

bool finite_all(std::span<const double> xs) {
    return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

// Integer view of a discrete value; nullopt-like signalled by returning -1 for
// values that are not non-negative integers.
std::int64_t as_count(const Value& v) {
    if (v.is_i64()) return v.as_i64();
    if (v.is_bool()) return v.as_bool() ? 1 : 0;
    if (v.is_f64()) {
        const double x = v.as_f64();
        if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9.0e15) return static_cast<std::int64_t>(x);
    }
    return -1;
}

std::int64_t sample_poisson(double rate, CounterRng& rng) {
    if (rate < 30.0) {
        const double u = rng.uniform();
        std::int64_t k = 0;
        double p = std::exp(-rate);
        double cdf = p;
        while (u > cdf && k < 100000) {
            ++k;
            p *= rate / static_cast<double>(k);
            cdf += p;
            if (p == 0.0) break;
        }
        return k;
    }
    // Transformed rejection with squeeze (Hoermann 1993).
    const double slam = std::sqrt(rate);
    const double loglam = std::log(rate);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = rng.uniform() - 0.5;
        const double v = rng.uniform();
        const double us = 0.5 - std::abs(u);
        const auto k = static_cast<std::int64_t>(std::floor((2.0 * a / us + b) * u + rate + 0.43));
        if (us >= 0.07 && v <= vr) return k;
        if (k < 0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
            -rate + static_cast<double>(k) * loglam - std::lgamma(static_cast<double>(k) + 1.0)) {
            return k;
        }
    }
}

}  // namespace

double CounterRng::standard_normal() { return math::std_normal_quantile(uniform()); }

std::string to_string(DistTag tag) {
    switch (tag) {
        case DistTag::Uniform: return "Uniform";
        case DistTag::Normal: return "Normal";
        case DistTag::TruncatedNormal: return "TruncatedNormal";
        case DistTag::Categorical: return "Categorical";
        case DistTag::Poisson: return "Poisson";
        case DistTag::MultivariateNormalDiag: return "MultivariateNormalDiag";
    }
    return "Unknown";
}

Distribution Distribution::uniform(double low, double high) { return {DistTag::Uniform, {low, high}}; }
Distribution Distribution::normal(double mean, double std) { return {DistTag::Normal, {mean, std}}; }
Distribution Distribution::truncated_normal(double mean, double std, double low, double high) {
    return {DistTag::TruncatedNormal, {mean, std, low, high}};
}
Distribution Distribution::categorical(std::vector<double> probs) {
    return {DistTag::Categorical, std::move(probs)};
}
Distribution Distribution::poisson(double rate) { return {DistTag::Poisson, {rate}}; }
Distribution Distribution::mvn_diag(std::span<const double> means, std::span<const double> stds) {
    Distribution d{DistTag::MultivariateNormalDiag, {}};
    d.params.reserve(means.size() + stds.size());
    d.params.insert(d.params.end(), means.begin(), means.end());
    d.params.insert(d.params.end(), stds.begin(), stds.end());
    return d;
}

void Distribution::validate() const {
    const auto n = params.size();
    switch (tag) {
        case DistTag::Uniform:
            if (n != 2) invalid("params", "Uniform expects 2 parameters");
            if (!finite_all(params) || !(params[0] < params[1])) invalid("low/high", "Uniform requires low < high");
            return;
        case DistTag::Normal:
            if (n != 2) invalid("params", "Normal expects 2 parameters");
            if (!std::isfinite(params[0])) invalid("mean", "Normal mean must be finite");
            if (!std::isfinite(params[1]) || !(params[1] > 0)) invalid("std", "Normal requires std > 0");
            return;
        case DistTag::TruncatedNormal:
            if (n != 4) invalid("params", "TruncatedNormal expects 4 parameters");
            if (!std::isfinite(params[0])) invalid("mean", "TruncatedNormal mean must be finite");
            if (!std::isfinite(params[1]) || !(params[1] > 0)) invalid("std", "TruncatedNormal requires std > 0");
            if (std::isnan(params[2]) || std::isnan(params[3]) || !(params[2] < params[3])) {
                invalid("low/high", "TruncatedNormal requires low < high");
            }
            return;
        case DistTag::Categorical: {
            if (n < 1) invalid("probabilities", "Categorical needs at least one probability");
            double total = 0.0;
            for (double p : params) {
                if (!std::isfinite(p) || p < 0) invalid("probabilities", "Categorical probabilities must be nonnegative");
                total += p;
            }
            if (std::abs(total - 1.0) > 1e-9) invalid("probabilities", "Categorical probabilities must sum to 1");
            return;
        }
        case DistTag::Poisson:
            if (n != 1) invalid("params", "Poisson expects 1 parameter");
            if (!std::isfinite(params[0]) || !(params[0] > 0)) invalid("rate", "Poisson requires rate > 0");
            return;
        case DistTag::MultivariateNormalDiag: {
            if (n == 0 || n % 2 != 0) invalid("means/stds", "MultivariateNormalDiag needs equal-length means and stds");
            const auto d = n / 2;
            if (!finite_all(std::span(params).first(d))) invalid("means", "MultivariateNormalDiag means must be finite");
            for (std::size_t i = d; i < n; ++i) {
                if (!std::isfinite(params[i]) || !(params[i] > 0)) invalid("stds", "MultivariateNormalDiag requires stds > 0");
            }
            return;
        }
    }
    invalid("tag", "unknown distribution tag");
}

bool Distribution::valid() const noexcept {
    try {
        validate();
        return true;
    } catch (const InvalidDistribution&) {
        return false;
    }
}

double Distribution::support_low() const {
    switch (tag) {
        case DistTag::Uniform: return params[0];
        case DistTag::TruncatedNormal: return params[2];
        case DistTag::Categorical:
        case DistTag::Poisson: return 0.0;
        default: return -kInf;
    }
}

double Distribution::support_high() const {
    switch (tag) {
        case DistTag::Uniform: return params[1];
        case DistTag::TruncatedNormal: return params[3];
        case DistTag::Categorical: return static_cast<double>(params.size() - 1);
        default: return kInf;
    }
}

double Distribution::location() const {
    switch (tag) {
        case DistTag::Uniform: return 0.5 * (params[0] + params[1]);
        case DistTag::Normal:
        case DistTag::TruncatedNormal:
        case DistTag::Poisson: return params[0];
        default: return 0.0;
    }
}

double Distribution::scale() const {
    switch (tag) {
        case DistTag::Uniform: return params[1] - params[0];
        case DistTag::Normal: return params[1];
        case DistTag::TruncatedNormal: {
            const double width = params[3] - params[2];
            return std::isfinite(width) ? width : params[1];
        }
        case DistTag::Poisson: return std::sqrt(params[0]);
        default: return 1.0;
    }
}

std::size_t Distribution::dimension() const {
    return tag == DistTag::MultivariateNormalDiag ? params.size() / 2 : 1;
}

double Distribution::log_density(const Value& v) const {
    switch (tag) {
        case DistTag::Uniform: {
            if (!(v.is_f64() || v.is_i64())) return -kInf;
            const double x = v.to_double();
            if (x < params[0] || x > params[1]) return -kInf;
            return -std::log(params[1] - params[0]);
        }
        case DistTag::Normal:
            if (!(v.is_f64() || v.is_i64())) return -kInf;
            return math::normal_log_pdf(v.to_double(), params[0], params[1]);
        case DistTag::TruncatedNormal:
            if (!(v.is_f64() || v.is_i64())) return -kInf;
            return math::truncated_normal_log_pdf(v.to_double(), params[0], params[1], params[2], params[3]);
        case DistTag::Categorical: {
            const auto k = as_count(v);
            if (k < 0 || static_cast<std::size_t>(k) >= params.size()) return -kInf;
            return std::log(params[static_cast<std::size_t>(k)]);
        }
        case DistTag::Poisson: {
            const auto k = as_count(v);
            if (k < 0) return -kInf;
            const double kd = static_cast<double>(k);
            return kd * std::log(params[0]) - params[0] - std::lgamma(kd + 1.0);
        }
        case DistTag::MultivariateNormalDiag: {
            const auto d = params.size() / 2;
            const double* means = params.data();
            const double* stds = params.data() + d;
            const double* xs = nullptr;
            double scalar = 0.0;
            if (v.is_tensor()) {
                if (v.as_tensor().data.size() != d) return -kInf;
                xs = v.as_tensor().data.data();
            } else if (d == 1 && (v.is_f64() || v.is_i64())) {
                scalar = v.to_double();
                xs = &scalar;
            } else {
                return -kInf;
            }
            // Scalar loop over the diagonal; no covariance algebra needed.
            double acc = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double z = (xs[i] - means[i]) / stds[i];
                acc += -0.5 * z * z - std::log(stds[i]);
            }
            return acc - static_cast<double>(d) * math::kLogSqrt2Pi;
        }
    }
    return -kInf;
}

Value Distribution::sample(CounterRng& rng) const {
    switch (tag) {
        case DistTag::Uniform: return params[0] + (params[1] - params[0]) * rng.uniform();
        case DistTag::Normal: return params[0] + params[1] * rng.standard_normal();
        case DistTag::TruncatedNormal: {
            const double alpha = (params[2] - params[0]) / params[1];
            const double beta = (params[3] - params[0]) / params[1];
            const double z = math::sample_std_truncated_normal(alpha, beta, rng.uniform());
            return std::clamp(params[0] + params[1] * z, params[2], params[3]);
        }
        case DistTag::Categorical: {
            const double total = std::accumulate(params.begin(), params.end(), 0.0);
            const double u = rng.uniform() * total;
            double cdf = 0.0;
            for (std::size_t k = 0; k < params.size(); ++k) {
                cdf += params[k];
                if (u < cdf && params[k] > 0) return static_cast<std::int64_t>(k);
            }
            for (std::size_t k = params.size(); k-- > 0;) {
                if (params[k] > 0) return static_cast<std::int64_t>(k);
            }
            return std::int64_t{0};
        }
        case DistTag::Poisson: return sample_poisson(params[0], rng);
        case DistTag::MultivariateNormalDiag: {
            const auto d = params.size() / 2;
            std::vector<double> out(d);
            for (std::size_t i = 0; i < d; ++i) out[i] = params[i] + params[d + i] * rng.standard_normal();
            return Value::tensor({static_cast<std::uint32_t>(d)}, std::move(out));
        }
    }
    throw std::logic_error("unknown distribution tag");
}

bool operator==(const Distribution& a, const Distribution& b) {
    if (a.tag != b.tag || a.params.size() != b.params.size()) return false;
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(a.params[i]) != std::bit_cast<std::uint64_t>(b.params[i])) return false;
    }
    return true;
}

namespace math {

double normal_log_pdf(double x, double mean, double std) {
    const double z = (x - mean) / std;
    return -0.5 * z * z - std::log(std) - kLogSqrt2Pi;
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }
double std_normal_sf(double z) { return 0.5 * std::erfc(z / kSqrt2); }

double std_normal_quantile(double p) {
    if (p <= 0.0) return -kInf;
    if (p >= 1.0) return kInf;
    return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
}

namespace {

// log P(Z > z), valid far into the upper tail.
double log_sf(double z) {
    if (z < 35.0) return std::log(std_normal_sf(z));
    const double z2 = z * z;
    return -0.5 * z2 - std::log(z) - kLogSqrt2Pi + std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

// Inverse of log_sf.
double inv_log_sf(double log_s) {
    if (log_s > -700.0) return kSqrt2 * boost::math::erfc_inv(2.0 * std::exp(log_s));
    double z = std::sqrt(-2.0 * log_s);
    for (int i = 0; i < 8; ++i) {
        // d/dz log_sf(z) ~= -phi(z)/sf(z) ~= -(z + 1/z) in the far tail.
        const double f = log_sf(z) - log_s;
        z += f / (z + 1.0 / z);
    }
    return z;
}

}  // namespace

double log_normal_mass(double alpha, double beta) {
    if (!(alpha < beta)) return -kInf;
    if (alpha >= 0.0) {
        const double la = log_sf(alpha);
        if (beta == kInf) return la;
        return la + std::log1p(-std::exp(log_sf(beta) - la));
    }
    if (beta <= 0.0) return log_normal_mass(-beta, -alpha);
    const double lower_tail = alpha == -kInf ? 0.0 : std_normal_sf(-alpha);
    const double upper_tail = beta == kInf ? 0.0 : std_normal_sf(beta);
    return std::log1p(-(lower_tail + upper_tail));
}

double sample_std_truncated_normal(double alpha, double beta, double u) {
    if (alpha >= 0.0) {
        const double la = log_sf(alpha);
        const double lb = beta == kInf ? -kInf : log_sf(beta);
        const double log_s = la + std::log((1.0 - u) + u * std::exp(lb - la));
        return std::clamp(inv_log_sf(log_s), alpha, beta);
    }
    if (beta <= 0.0) return -sample_std_truncated_normal(-beta, -alpha, 1.0 - u);
    const double pa = alpha == -kInf ? 0.0 : std_normal_cdf(alpha);
    const double pb = beta == kInf ? 1.0 : std_normal_cdf(beta);
    const double p = pa + u * (pb - pa);
    double z;
    if (p < 0.5) {
        z = std_normal_quantile(p);
    } else {
        // Invert through the upper tail to keep precision near p = 1.
        const double qa = alpha == -kInf ? 1.0 : std_normal_sf(alpha);
        const double qb = beta == kInf ? 0.0 : std_normal_sf(beta);
        const double q = qa - u * (qa - qb);
        z = q <= 0.0 ? beta : kSqrt2 * boost::math::erfc_inv(2.0 * q);
    }
    return std::clamp(z, alpha, beta);
}

double truncated_normal_log_pdf(double x, double mean, double std, double low, double high) {
    if (x < low || x > high) return -kInf;
    const double alpha = (low - mean) / std;
    const double beta = (high - mean) / std;
    return normal_log_pdf(x, mean, std) - log_normal_mass(alpha, beta);
}

}  // namespace math

}  // namespace simtrace
