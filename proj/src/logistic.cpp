#include "adresp/logistic.hpp"

#include <stdexcept>
#include <string>

#include "adresp/errors.hpp"
#include "adresp/exact_sum.hpp"

namespace adresp {

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("logit: probability " + std::to_string(p) + " outside (0, 1)");
  }
  // log1p keeps precision near p = 0; the ratio form is exact near p = 1/2.
  return p < 0.25 ? std::log(p) - std::log1p(-p) : std::log(p / (1.0 - p));
}

double log_likelihood(std::span<const double> beta, std::span<const LabeledVector> rows) {
  if (beta.empty()) throw std::invalid_argument("log_likelihood: empty coefficient vector");
  ExactSum total;
  for (const auto& row : rows) {
    for (std::uint32_t j : row.active) {
      if (j == 0 || j >= beta.size()) {
        throw std::invalid_argument("log_likelihood: active index " + std::to_string(j) +
                                    " outside coefficient vector");
      }
    }
    const double eta = row_eta(beta, row);
    total += static_cast<double>(row.response) * eta;
    total += -static_cast<double>(row.trials) * softplus(eta);
  }
  return total.value();
}

}  // namespace adresp
