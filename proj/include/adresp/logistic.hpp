#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace adresp {

/// One row of the design: a (possibly grouped) binomial observation with a
/// one-hot feature pattern. The intercept column is implicit.
struct LabeledVector {
  std::uint32_t response = 0;  // successes y
  std::uint32_t trials = 1;    // m
  std::vector<std::uint32_t> active;  // strictly increasing, all >= 1

  bool operator==(const LabeledVector&) const = default;
};

/// ln(p / (1 - p)). Throws DomainError outside (0, 1).
double logit(double p);

/// 1 / (1 + e^-eta), evaluated without overflow for any finite eta.
inline double inverse_logit(double eta) noexcept {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

/// log(1 + e^x) without overflow.
inline double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// Linear predictor of one row: beta[0] + sum of beta[active].
inline double row_eta(std::span<const double> beta, const LabeledVector& row) noexcept {
  double eta = beta[0];
  for (std::uint32_t j : row.active) eta += beta[j];
  return eta;
}

/// Binomial log-likelihood  y'X beta - sum_i m_i log(1 + e^{eta_i}), omitting
/// the constant sum of log binomial coefficients. Rows are accumulated with a
/// correctly rounded sum, so the value is additive over row sets exactly.
/// Throws std::invalid_argument when an active index is outside beta.
double log_likelihood(std::span<const double> beta, std::span<const LabeledVector> rows);

/// Clamps a probability to [1e-12, 1 - 1e-12]. Used for display only.
inline double clamp_probability(double p) noexcept {
  constexpr double kEps = 1e-12;
  return p < kEps ? kEps : (p > 1.0 - kEps ? 1.0 - kEps : p);
}

}  // namespace adresp
