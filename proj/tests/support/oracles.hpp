#pragma once

// Independent reference computations. Nothing here calls into the solver or
// the ROC code; everything is brute force in long double.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "adresp/irls.hpp"

namespace adresp::testing {

struct PatternCount {
  std::vector<std::uint32_t> active;
  long double y = 0;
  long double m = 0;
};

inline std::vector<PatternCount> patterns_of(const DesignMatrix& d) {
  std::map<std::vector<std::uint32_t>, PatternCount> groups;
  for (const auto& r : d.rows) {
    auto& g = groups[r.active];
    g.active = r.active;
    g.y += r.response;
    g.m += r.trials;
  }
  std::vector<PatternCount> out;
  for (auto& [k, v] : groups) out.push_back(v);
  return out;
}

inline long double softplus_ld(long double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline long double ll_patterns(const std::vector<long double>& beta,
                               const std::vector<PatternCount>& pats) {
  long double total = 0;
  for (const auto& p : pats) {
    long double eta = beta[0];
    for (auto j : p.active) eta += beta[j];
    total += p.y * eta - p.m * softplus_ld(eta);
  }
  return total;
}

inline long double ll_oracle(const std::vector<double>& beta, const DesignMatrix& d) {
  std::vector<long double> b(beta.begin(), beta.end());
  return ll_patterns(b, patterns_of(d));
}

/// Exhaustive lattice search over a box at step x100, then twice more at
/// x10 and x1 within +-5 steps of the previous incumbent.
inline std::vector<double> lattice_maximizer(const DesignMatrix& d, std::vector<double> lo,
                                             std::vector<double> hi, double final_step) {
  const auto pats = patterns_of(d);
  const std::size_t p = lo.size();
  std::vector<long double> best(p, 0.0L);
  for (double step : {final_step * 100.0, final_step * 10.0, final_step}) {
    long double best_ll = -INFINITY;
    std::vector<long double> cur(p), arg = best;
    std::function<void(std::size_t)> walk = [&](std::size_t k) {
      if (k == p) {
        const long double v = ll_patterns(cur, pats);
        if (v > best_ll) {
          best_ll = v;
          arg = cur;
        }
        return;
      }
      for (double x = lo[k]; x <= hi[k] + 1e-12; x += step) {
        cur[k] = x;
        walk(k + 1);
      }
    };
    walk(0);
    best = arg;
    for (std::size_t k = 0; k < p; ++k) {
      lo[k] = static_cast<double>(best[k]) - 5 * step;
      hi[k] = static_cast<double>(best[k]) + 5 * step;
    }
  }
  return {best.begin(), best.end()};
}

/// Cyclic coordinate ascent with an exact one-dimensional maximizer (bisection
/// on the monotone partial derivative). Converges to the unique maximizer of a
/// strictly concave log-likelihood without forming any matrix.
inline std::vector<double> coordinate_maximizer(const DesignMatrix& d, int max_sweeps = 20000) {
  const auto pats = patterns_of(d);
  std::vector<long double> beta(d.n_features, 0.0L);
  auto partial = [&](std::size_t j) {
    long double g = 0;
    for (const auto& p : pats) {
      const bool on = j == 0 || std::binary_search(p.active.begin(), p.active.end(), j);
      if (!on) continue;
      long double eta = beta[0];
      for (auto k : p.active) eta += beta[k];
      g += p.y - p.m / (1.0L + std::exp(-eta));
    }
    return g;
  };
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    long double moved = 0;
    for (std::size_t j = 0; j < beta.size(); ++j) {
      const long double start = beta[j];
      long double a = start - 1, b = start + 1;
      beta[j] = a;
      while (partial(j) < 0) { a -= 2 * (b - a); beta[j] = a; }
      beta[j] = b;
      while (partial(j) > 0) { b += 2 * (b - a); beta[j] = b; }
      for (int it = 0; it < 200 && b - a > 1e-15L; ++it) {
        beta[j] = 0.5L * (a + b);
        if (partial(j) > 0) a = beta[j]; else b = beta[j];
      }
      beta[j] = 0.5L * (a + b);
      moved = std::max(moved, std::abs(beta[j] - start));
    }
    if (moved < 1e-12L) break;
  }
  return {beta.begin(), beta.end()};
}

/// X'(y - m pi) in long double.
inline std::vector<double> score_oracle(const std::vector<double>& beta, const DesignMatrix& d) {
  std::vector<long double> g(beta.size(), 0.0L);
  for (const auto& r : d.rows) {
    long double eta = beta[0];
    for (auto j : r.active) eta += beta[j];
    const long double resid = r.response - r.trials / (1.0L + std::exp(-eta));
    g[0] += resid;
    for (auto j : r.active) g[j] += resid;
  }
  return {g.begin(), g.end()};
}

/// Solves (X'WX + ridge I_{-0}) b = X'Wz by Gaussian elimination in long double.
inline std::vector<long double> normal_equation_solve(const DesignMatrix& d,
                                                      const std::vector<double>& w,
                                                      const std::vector<double>& z, double ridge) {
  const std::size_t p = d.n_features;
  std::vector<std::vector<long double>> a(p, std::vector<long double>(p + 1, 0.0L));
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    std::vector<std::uint32_t> cols{0};
    cols.insert(cols.end(), d.rows[i].active.begin(), d.rows[i].active.end());
    for (auto r : cols) {
      for (auto c : cols) a[r][c] += w[i];
      a[r][p] += static_cast<long double>(w[i]) * z[i];
    }
  }
  for (std::size_t j = 1; j < p; ++j) a[j][j] += ridge;
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const long double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= p; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<long double> out(p);
  for (std::size_t j = 0; j < p; ++j) out[j] = a[j][p] / a[j][j];
  return out;
}

/// P(score+ > score-) + 0.5 P(tie) over all positive/negative pairs.
inline double pairwise_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  long double wins = 0;
  for (double a : pos) {
    for (double b : neg) wins += a > b ? 1.0L : (a == b ? 0.5L : 0.0L);
  }
  return static_cast<double>(wins / (static_cast<long double>(pos.size()) * neg.size()));
}

}  // namespace adresp::testing
