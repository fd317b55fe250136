#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "adresp/feature_index.hpp"
#include "adresp/impression.hpp"

namespace adresp {

/// One campaign's response model: intercept, sparse betas keyed by dense
/// feature index, and a decision threshold on the linear-predictor scale.
/// An impression is accepted iff intercept + sum of matched betas > threshold.
struct BinaryModel {
  std::string campaign;
  double intercept = 0.0;
  std::map<std::uint32_t, double> betas;
  double threshold = 0.0;
  double auc = 0.5;
  double sampling_ratio = 1.0;  // tau+/tau- applied by the ex-ante correction
  std::shared_ptr<const FeatureIndex> feature_index = std::make_shared<FeatureIndex>();

  /// Throws InvalidModel when a beta key is not in the index, a coefficient
  /// is not finite, the threshold is NaN, auc is outside [0, 1] or the
  /// sampling ratio is not positive. An infinite threshold is allowed: +inf
  /// turns the model off, -inf accepts everything.
  void validate() const;

  /// Beta for a (dimension, level) pair, 0 when the level is unknown.
  double beta_for(Dimension d, std::string_view level) const noexcept;

  /// Number of non-intercept coefficients.
  std::size_t n_features() const noexcept { return betas.size(); }

  /// Canonical "dim=level,dim=level" listing of the model's features, used as
  /// a deterministic tie-break between models.
  std::string feature_set_name() const;
};

/// beta_0 + sum of the betas matched by the impression. Dimensions are visited
/// in canonical order and an unmatched dimension adds 0.0, so the summation
/// sequence is fixed.
double linear_predictor(const BinaryModel& model, const Impression& imp) noexcept;

double predict_probability(const BinaryModel& model, const Impression& imp) noexcept;

/// Strict acceptance rule.
inline bool accepts(const BinaryModel& model, double eta) noexcept {
  return eta > model.threshold;
}

/// Converts a model fitted on a retrospective sample (positives kept with
/// rate tau_pos, negatives with tau_neg) to the prospective population by
/// shifting the intercept by -ln(tau_pos / tau_neg). The threshold moves by
/// the same constant so accept/reject decisions are unchanged; all other
/// betas are copied bit-for-bit.
BinaryModel adjust_intercept_ex_ante(const BinaryModel& model, double tau_pos, double tau_neg);

nlohmann::json to_json(const BinaryModel& model);
BinaryModel model_from_json(const nlohmann::json& doc);

/// Byte-stable serialization (two-space indent, trailing newline).
std::string dump_model(const BinaryModel& model);

}  // namespace adresp
