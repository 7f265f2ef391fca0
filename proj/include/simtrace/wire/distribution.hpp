// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "simtrace/sim/rng.hpp"
#include "simtrace/wire/value.hpp"

namespace simtrace {

enum class DistTag : std::uint8_t {
    Uniform = 1,
    Normal = 2,
    TruncatedNormal = 3,
    Categorical = 4,
    Poisson = 5,
    MultivariateNormalDiag = 6,
};

std::string to_string(DistTag tag);

// Raised when a distribution violates its parameter invariants. `field()` names
// the offending parameter group ("low/high", "std", "probabilities", ...).
class InvalidDistribution : public std::invalid_argument {
public:
    InvalidDistribution(std::string field, const std::string& what)
        : std::invalid_argument(what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

// Parameter layout per tag:
//   Uniform{low, high}; Normal{mean, std}; TruncatedNormal{mean, std, low, high};
//   Categorical{p_0..p_{K-1}}; Poisson{rate}; MultivariateNormalDiag{means..., stds...}
struct Distribution {
    DistTag tag = DistTag::Normal;
    std::vector<double> params;

    static Distribution uniform(double low, double high);
    static Distribution normal(double mean, double std);
    static Distribution truncated_normal(double mean, double std, double low, double high);
    static Distribution categorical(std::vector<double> probs);
    static Distribution poisson(double rate);
    static Distribution mvn_diag(std::span<const double> means, std::span<const double> stds);

    // Throws InvalidDistribution.
    void validate() const;
    bool valid() const noexcept;

    bool is_continuous_scalar() const {
        return tag == DistTag::Uniform || tag == DistTag::Normal || tag == DistTag::TruncatedNormal;
    }
    bool is_discrete() const { return tag == DistTag::Categorical || tag == DistTag::Poisson; }

    // Support bounds for scalar distributions (+-inf where unbounded).
    double support_low() const;
    double support_high() const;
    // Location and scale used to normalise proposal heads.
    double location() const;
    double scale() const;
    std::size_t category_count() const { return params.size(); }
    std::size_t dimension() const;
    // Value tag produced by sample().
    ValueTag sample_tag() const {
        if (is_discrete()) return ValueTag::I64;
        return tag == DistTag::MultivariateNormalDiag ? ValueTag::Tensor : ValueTag::F64;
    }

    double log_density(const Value& v) const;
    Value sample(CounterRng& rng) const;

    friend bool operator==(const Distribution& a, const Distribution& b);
};

namespace math {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double normal_log_pdf(double x, double mean, double std);
// Standard normal CDF and its complement, accurate in both tails.
double std_normal_cdf(double z);
double std_normal_sf(double z);
double std_normal_quantile(double p);
// log(Phi(beta) - Phi(alpha)) for alpha < beta, accurate when the mass sits in a tail.
double log_normal_mass(double alpha, double beta);
// Draws z ~ N(0,1) restricted to [alpha, beta] by inversion.
double sample_std_truncated_normal(double alpha, double beta, double u);
double truncated_normal_log_pdf(double x, double mean, double std, double low, double high);

}  // namespace math

}  // namespace simtrace
