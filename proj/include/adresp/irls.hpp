#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "adresp/logistic.hpp"

namespace adresp {

struct FitConfig {
  int max_iterations = 25;
  double tolerance = 1e-8;  // relative change of the penalized deviance
  double ridge = 1e-6;      // L2 penalty on every coefficient but the intercept
  double separation_eta_bound = 30.0;
  int max_halvings = 10;
  // Factor the unweighted design once and reuse its R as a preconditioner for
  // every reweighted solve instead of refactoring per iteration.
  bool reuse_factorization = false;

  void validate() const;
};

enum class FitWarning {
  separation_detected,
  not_converged,
  step_halving_exhausted,
};

std::string_view warning_name(FitWarning w) noexcept;

struct FitResult {
  std::vector<double> beta;  // beta[0] is the intercept
  bool converged = false;
  int iterations = 0;
  double final_deviance = 0.0;  // unpenalized deviance at beta
  // Penalized deviance after initialization and after every accepted step.
  std::vector<double> deviance_trace;
  std::vector<FitWarning> warnings;
  // sqrt(diag((X'WX + ridge I)^-1)) at beta.
  std::vector<double> standard_errors;

  bool has_warning(FitWarning w) const noexcept;
};

struct DesignMatrix {
  std::vector<LabeledVector> rows;
  std::size_t n_features = 1;  // columns including the intercept

  /// Throws std::invalid_argument on malformed rows and DegenerateData when
  /// there are no successes or no failures.
  void validate() const;
};

/// Maximum (ridge-penalized) likelihood logistic regression by iteratively
/// reweighted least squares. Each step solves the weighted least-squares
/// problem with weights m*pi*(1-pi) through a QR factorization; steps that
/// raise the penalized deviance are halved. Rows with identical patterns are
/// pooled into binomial rows first, which leaves the estimate unchanged.
/// Non-convergence is reported through FitResult, never thrown.
FitResult fit(const DesignMatrix& design, const FitConfig& config = {});

/// Binomial deviance -2 (l(beta) - l_saturated).
double deviance(std::span<const double> beta, const DesignMatrix& design);

/// argmin sum_i w_i (z_i - x_i' beta)^2 + ridge * ||beta without intercept||^2
/// via Householder QR of the row-scaled design. With ridge == 0 a
/// column-pivoting QR is used and RankDeficient is thrown when the effective
/// rank is below the column count.
std::vector<double> weighted_least_squares(const DesignMatrix& design,
                                           std::span<const double> weights,
                                           std::span<const double> working_response,
                                           double ridge = 0.0);

/// Pools rows with identical active patterns into grouped binomial rows,
/// ordered by pattern.
DesignMatrix pool_identical_rows(const DesignMatrix& design);

/// X' (y - m pi(beta)) - ridge * beta (intercept excluded from the penalty).
std::vector<double> score_vector(std::span<const double> beta, const DesignMatrix& design,
                                 double ridge = 0.0);

}  // namespace adresp
