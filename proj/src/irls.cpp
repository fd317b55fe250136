#include "adresp/irls.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "adresp/errors.hpp"
#include "adresp/exact_sum.hpp"
#include "adresp/log.hpp"

namespace adresp {

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

constexpr std::size_t kMaxColumns = 1000;

// Row-by-row orthogonal reduction of the augmented system [sqrt(w) X | sqrt(w) z]
// to an upper-triangular (p+1) x (p+1) factor. Rows are consumed in blocks so
// memory stays O(p^2) whatever the number of observations.
class TriangularReducer {
 public:
  explicit TriangularReducer(std::size_t p) : p_(p), block_rows_(std::max<std::size_t>(256, 4 * p)) {
    pending_.resize(static_cast<Eigen::Index>(block_rows_), static_cast<Eigen::Index>(p + 1));
  }

  // Appends one scaled row: scale * (1, x_active..., z).
  void add_row(double scale, const LabeledVector& row, double z) {
    auto r = pending_.row(static_cast<Eigen::Index>(filled_));
    r.setZero();
    r(0) = scale;
    for (std::uint32_t j : row.active) r(j) += scale;
    r(static_cast<Eigen::Index>(p_)) = scale * z;
    if (++filled_ == block_rows_) flush();
  }

  // Appends sqrt(ridge) e_j with zero response.
  void add_penalty_row(std::size_t j, double scale) {
    auto r = pending_.row(static_cast<Eigen::Index>(filled_));
    r.setZero();
    r(static_cast<Eigen::Index>(j)) = scale;
    if (++filled_ == block_rows_) flush();
  }

  std::size_t rows_seen() const noexcept { return seen_ + filled_; }

  // Upper-triangular factor of everything added so far ((p+1) x (p+1)).
  Matrix finish() {
    flush();
    const auto n = static_cast<Eigen::Index>(p_ + 1);
    if (!have_r_) return Matrix::Zero(n, n);
    return r_;
  }

 private:
  void flush() {
    if (filled_ == 0) return;
    const auto cols = static_cast<Eigen::Index>(p_ + 1);
    const auto top = have_r_ ? cols : 0;
    Matrix stacked(top + static_cast<Eigen::Index>(filled_), cols);
    if (have_r_) stacked.topRows(top) = r_;
    stacked.bottomRows(static_cast<Eigen::Index>(filled_)) =
        pending_.topRows(static_cast<Eigen::Index>(filled_));
    Eigen::HouseholderQR<Matrix> qr(stacked);
    const auto k = std::min(stacked.rows(), cols);
    r_ = Matrix::Zero(cols, cols);
    r_.topRows(k) = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    have_r_ = true;
    seen_ += filled_;
    filled_ = 0;
  }

  std::size_t p_;
  std::size_t block_rows_;
  Matrix pending_;
  std::size_t filled_ = 0;
  std::size_t seen_ = 0;
  Matrix r_;
  bool have_r_ = false;
};

struct LsSolution {
  Vector beta;
  Vector standard_errors;
};

// Solves the reduced system R beta = c. Without a ridge term the factor may be
// singular, so a rank-revealing QR of R (same singular values as the weighted
// design) decides.
LsSolution solve_reduced(const Matrix& augmented, std::size_t p, bool pivoted, bool want_se) {
  const auto n = static_cast<Eigen::Index>(p);
  const Matrix r = augmented.topLeftCorner(n, n);
  const Vector c = augmented.topRightCorner(n, 1);
  LsSolution out;
  if (pivoted) {
    Eigen::ColPivHouseholderQR<Matrix> qr(r);
    qr.setThreshold(1e-10);
    if (qr.rank() < n) {
      throw RankDeficient("weighted design has rank " + std::to_string(qr.rank()) + " < " +
                          std::to_string(p) + " columns");
    }
    out.beta = qr.solve(c);
  } else {
    out.beta = r.triangularView<Eigen::Upper>().solve(c);
  }
  if (want_se) {
    const Matrix r_inv = r.triangularView<Eigen::Upper>().solve(Matrix::Identity(n, n));
    out.standard_errors = r_inv.rowwise().norm();
  }
  return out;
}

double row_deviance(const LabeledVector& row, double eta) {
  const double y = row.response;
  const double m = row.trials;
  double d = 0.0;
  if (row.response > 0) d += y * (std::log(y / m) + softplus(-eta));
  if (row.response < row.trials) d += (m - y) * (std::log((m - y) / m) + softplus(eta));
  return 2.0 * d;
}

double penalty(const Vector& beta, double ridge) {
  if (ridge == 0.0) return 0.0;
  return ridge * beta.tail(beta.size() - 1).squaredNorm();
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

struct Pooled {
  std::vector<LabeledVector> rows;
  std::size_t p = 1;

  Vector etas(const Vector& beta) const {
    Vector eta(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      eta(static_cast<Eigen::Index>(i)) =
          row_eta(std::span<const double>(beta.data(), p), rows[i]);
    }
    return eta;
  }

  double deviance(const Vector& eta) const {
    ExactSum total;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      total += row_deviance(rows[i], eta(static_cast<Eigen::Index>(i)));
    }
    return total.value();
  }
};

double weight_of(const LabeledVector& row, double eta) {
  // m pi (1 - pi) written through e^{-|eta|} so it never cancels.
  const double e = std::exp(-std::abs(eta));
  return row.trials * e / ((1.0 + e) * (1.0 + e));
}

// Weighted solve for one IRLS step through a fresh factorization.
LsSolution exact_step(const Pooled& d, const Vector& eta, double ridge, bool want_se) {
  TriangularReducer reducer(d.p);
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    const auto& row = d.rows[i];
    const double e = eta(static_cast<Eigen::Index>(i));
    const double w = weight_of(row, e);
    if (!(w > 0.0)) continue;
    const double mu = row.trials * inverse_logit(e);
    reducer.add_row(std::sqrt(w), row, e + (row.response - mu) / w);
  }
  if (ridge > 0.0) {
    const double s = std::sqrt(ridge);
    for (std::size_t j = 1; j < d.p; ++j) reducer.add_penalty_row(j, s);
  }
  return solve_reduced(reducer.finish(), d.p, ridge == 0.0, want_se);
}

// Preconditioned CGLS for the weighted step. The unweighted design is
// factored once; its R, applied on the right, leaves a system whose spectrum
// only reflects the spread of the weights.
class ReusedFactorStep {
 public:
  ReusedFactorStep(const Pooled& d, double ridge) : d_(d), ridge_(ridge) {
    TriangularReducer reducer(d.p);
    for (const auto& row : d.rows) reducer.add_row(std::sqrt(double(row.trials)), row, 0.0);
    if (ridge > 0.0) {
      for (std::size_t j = 1; j < d.p; ++j) reducer.add_penalty_row(j, std::sqrt(ridge));
    }
    const auto n = static_cast<Eigen::Index>(d.p);
    r_ = reducer.finish().topLeftCorner(n, n);
    const double scale = r_.diagonal().cwiseAbs().maxCoeff();
    if (r_.diagonal().cwiseAbs().minCoeff() <= 1e-10 * scale) {
      throw RankDeficient("unweighted design is rank deficient; cannot reuse its factor");
    }
  }

  Vector solve(const Vector& eta, const Vector& start) const {
    const auto n = static_cast<Eigen::Index>(d_.rows.size());
    const auto p = static_cast<Eigen::Index>(d_.p);
    Vector sw(n), b(n + p);
    b.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = d_.rows[static_cast<std::size_t>(i)];
      const double w = weight_of(row, eta(i));
      sw(i) = w > 0.0 ? std::sqrt(w) : 0.0;
      if (w > 0.0) {
        const double mu = row.trials * inverse_logit(eta(i));
        b(i) = sw(i) * (eta(i) + (row.response - mu) / w);
      }
    }
    const double sr = std::sqrt(ridge_);
    auto apply = [&](const Vector& u) {  // A R^-1 u
      const Vector v = r_.triangularView<Eigen::Upper>().solve(u);
      Vector out(n + p);
      for (Eigen::Index i = 0; i < n; ++i) {
        out(i) = sw(i) * row_eta(std::span<const double>(v.data(), d_.p),
                                 d_.rows[static_cast<std::size_t>(i)]);
      }
      out(n) = 0.0;
      for (Eigen::Index j = 1; j < p; ++j) out(n + j) = sr * v(j);
      return out;
    };
    auto apply_t = [&](const Vector& r) {  // R^-T A' r
      Vector g = Vector::Zero(p);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double s = sw(i) * r(i);
        if (s == 0.0) continue;
        g(0) += s;
        for (std::uint32_t j : d_.rows[static_cast<std::size_t>(i)].active) g(j) += s;
      }
      for (Eigen::Index j = 1; j < p; ++j) g(j) += sr * r(n + j);
      return Vector(r_.transpose().triangularView<Eigen::Lower>().solve(g));
    };

    Vector x = r_.triangularView<Eigen::Upper>() * start;
    Vector res = b - apply(x);
    Vector s = apply_t(res);
    const double ref = apply_t(b).norm();
    Vector dir = s;
    double gamma = s.squaredNorm();
    const int max_iter = 10 * static_cast<int>(p) + 100;
    for (int k = 0; k < max_iter && std::sqrt(gamma) > 1e-13 * ref; ++k) {
      const Vector q = apply(dir);
      const double qq = q.squaredNorm();
      if (qq == 0.0) break;
      const double alpha = gamma / qq;
      x += alpha * dir;
      res -= alpha * q;
      s = apply_t(res);
      const double gamma_next = s.squaredNorm();
      dir = s + (gamma_next / gamma) * dir;
      gamma = gamma_next;
    }
    return r_.triangularView<Eigen::Upper>().solve(x);
  }

 private:
  const Pooled& d_;
  double ridge_;
  Matrix r_;
};

Vector score_of(const Pooled& d, const Vector& beta, const Vector& eta, double ridge) {
  Vector g = Vector::Zero(static_cast<Eigen::Index>(d.p));
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    const auto& row = d.rows[i];
    const double r = row.response - row.trials * inverse_logit(eta(static_cast<Eigen::Index>(i)));
    g(0) += r;
    for (std::uint32_t j : row.active) g(j) += r;
  }
  if (ridge > 0.0) g.tail(g.size() - 1) -= ridge * beta.tail(beta.size() - 1);
  return g;
}

}  // namespace

std::string_view warning_name(FitWarning w) noexcept {
  switch (w) {
    case FitWarning::separation_detected: return "separation_detected";
    case FitWarning::not_converged: return "not_converged";
    case FitWarning::step_halving_exhausted: return "step_halving_exhausted";
  }
  return "unknown";
}

bool FitResult::has_warning(FitWarning w) const noexcept {
  return std::find(warnings.begin(), warnings.end(), w) != warnings.end();
}

void FitConfig::validate() const {
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be > 0");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw std::invalid_argument("ridge must be >= 0");
  if (!(separation_eta_bound > 0.0)) {
    throw std::invalid_argument("separation_eta_bound must be > 0");
  }
  if (max_halvings < 0) throw std::invalid_argument("max_halvings must be >= 0");
}

void DesignMatrix::validate() const {
  if (n_features < 1) throw std::invalid_argument("design needs at least the intercept column");
  if (n_features > kMaxColumns) {
    throw std::invalid_argument("design has " + std::to_string(n_features) +
                                " columns, limit is " + std::to_string(kMaxColumns));
  }
  std::uint64_t successes = 0;
  std::uint64_t failures = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.trials == 0 || row.response > row.trials) {
      throw std::invalid_argument("row " + std::to_string(i) + ": need 0 <= y <= m, m >= 1");
    }
    std::uint32_t prev = 0;
    for (std::uint32_t j : row.active) {
      if (j <= prev || j >= n_features) {
        throw std::invalid_argument("row " + std::to_string(i) +
                                    ": active indices must be increasing within [1, p)");
      }
      prev = j;
    }
    successes += row.response;
    failures += row.trials - row.response;
  }
  if (successes == 0) throw DegenerateData("design has no positive responses");
  if (failures == 0) throw DegenerateData("design has no negative responses");
}

DesignMatrix pool_identical_rows(const DesignMatrix& design) {
  std::vector<std::size_t> order(design.rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return design.rows[a].active < design.rows[b].active;
  });
  DesignMatrix out;
  out.n_features = design.n_features;
  for (std::size_t i : order) {
    const auto& row = design.rows[i];
    if (!out.rows.empty() && out.rows.back().active == row.active) {
      out.rows.back().response += row.response;
      out.rows.back().trials += row.trials;
    } else {
      out.rows.push_back(row);
    }
  }
  return out;
}

double deviance(std::span<const double> beta, const DesignMatrix& design) {
  if (beta.size() != design.n_features) {
    throw std::invalid_argument("deviance: coefficient vector has " + std::to_string(beta.size()) +
                                " entries, design has " + std::to_string(design.n_features));
  }
  ExactSum total;
  for (const auto& row : design.rows) {
    for (std::uint32_t j : row.active) {
      if (j >= beta.size()) throw std::invalid_argument("deviance: active index out of range");
    }
    total += row_deviance(row, row_eta(beta, row));
  }
  return total.value();
}

std::vector<double> score_vector(std::span<const double> beta, const DesignMatrix& design,
                                 double ridge) {
  if (beta.size() != design.n_features) {
    throw std::invalid_argument("score_vector: dimension mismatch");
  }
  Pooled d{design.rows, design.n_features};
  const Vector b = Eigen::Map<const Vector>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  return to_std(score_of(d, b, d.etas(b), ridge));
}

std::vector<double> weighted_least_squares(const DesignMatrix& design,
                                           std::span<const double> weights,
                                           std::span<const double> working_response,
                                           double ridge) {
  const std::size_t n = design.rows.size();
  if (weights.size() != n || working_response.size() != n) {
    throw std::invalid_argument("weighted_least_squares: weights/response length mismatch");
  }
  if (!(ridge >= 0.0)) throw std::invalid_argument("weighted_least_squares: ridge must be >= 0");
  std::size_t positive = 0;
  TriangularReducer reducer(design.n_features);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights[i];
    if (!std::isfinite(w) || w < 0.0 || !std::isfinite(working_response[i])) {
      throw std::invalid_argument("weighted_least_squares: weights must be finite and >= 0");
    }
    for (std::uint32_t j : design.rows[i].active) {
      if (j == 0 || j >= design.n_features) {
        throw std::invalid_argument("weighted_least_squares: active index out of range");
      }
    }
    if (w == 0.0) continue;
    ++positive;
    reducer.add_row(std::sqrt(w), design.rows[i], working_response[i]);
  }
  if (ridge == 0.0 && positive < design.n_features) {
    throw RankDeficient("only " + std::to_string(positive) + " rows with positive weight for " +
                        std::to_string(design.n_features) + " columns");
  }
  if (ridge > 0.0) {
    for (std::size_t j = 1; j < design.n_features; ++j) {
      reducer.add_penalty_row(j, std::sqrt(ridge));
    }
  }
  return to_std(solve_reduced(reducer.finish(), design.n_features, ridge == 0.0, false).beta);
}

FitResult fit(const DesignMatrix& design, const FitConfig& config) {
  config.validate();
  design.validate();

  const DesignMatrix pooled_design = pool_identical_rows(design);
  const Pooled d{pooled_design.rows, pooled_design.n_features};
  const auto p = static_cast<Eigen::Index>(d.p);

  std::uint64_t successes = 0;
  std::uint64_t trials = 0;
  for (const auto& row : d.rows) {
    successes += row.response;
    trials += row.trials;
  }

  FitResult result;
  Vector beta = Vector::Zero(p);
  beta(0) = logit((successes + 0.5) / (trials + 1.0));
  Vector eta = d.etas(beta);
  double objective = d.deviance(eta) + penalty(beta, config.ridge);
  result.deviance_trace.push_back(objective);

  const double score_at_zero = score_of(d, Vector::Zero(p), Vector::Zero(
      static_cast<Eigen::Index>(d.rows.size())), config.ridge).norm();
  const double score_tolerance = 1e-6 * (1.0 + score_at_zero);

  std::unique_ptr<ReusedFactorStep> reused;
  if (config.reuse_factorization) reused = std::make_unique<ReusedFactorStep>(d, config.ridge);

  auto flag = [&](FitWarning w) {
    if (!result.has_warning(w)) result.warnings.push_back(w);
  };

  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    result.iterations = iter;
    Vector candidate = reused ? reused->solve(eta, beta)
                              : exact_step(d, eta, config.ridge, false).beta;
    Vector candidate_eta = d.etas(candidate);
    double candidate_objective = d.deviance(candidate_eta) + penalty(candidate, config.ridge);

    int halvings = 0;
    while (!(candidate_objective <= objective) && halvings < config.max_halvings) {
      candidate = 0.5 * (candidate + beta);
      candidate_eta = d.etas(candidate);
      candidate_objective = d.deviance(candidate_eta) + penalty(candidate, config.ridge);
      ++halvings;
    }
    if (!(candidate_objective <= objective)) {
      flag(FitWarning::step_halving_exhausted);
      break;
    }

    if (candidate_eta.size() > 0 &&
        candidate_eta.cwiseAbs().maxCoeff() > config.separation_eta_bound) {
      flag(FitWarning::separation_detected);
    }

    const double change = std::abs(objective - candidate_objective) /
                          (std::abs(candidate_objective) + 0.1);
    beta = std::move(candidate);
    eta = std::move(candidate_eta);
    objective = candidate_objective;
    result.deviance_trace.push_back(objective);

    if (change < config.tolerance &&
        score_of(d, beta, eta, config.ridge).norm() <= score_tolerance) {
      result.converged = true;
      break;
    }
  }
  if (!result.converged) flag(FitWarning::not_converged);

  result.beta = to_std(beta);
  result.final_deviance = d.deviance(eta);
  try {
    result.standard_errors = to_std(exact_step(d, eta, config.ridge, true).standard_errors);
  } catch (const RankDeficient&) {
    result.standard_errors.assign(d.p, std::numeric_limits<double>::quiet_NaN());
  }

  if (log::enabled()) {
    nlohmann::json warnings = nlohmann::json::array();
    for (auto w : result.warnings) warnings.push_back(warning_name(w));
    log::emit("irls_fit", {{"rows", design.rows.size()},
                           {"pooled_rows", d.rows.size()},
                           {"columns", d.p},
                           {"iterations", result.iterations},
                           {"converged", result.converged},
                           {"deviance_trace", result.deviance_trace},
                           {"warnings", warnings}});
  }
  return result;
}

}  // namespace adresp
