#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "adresp/binary_model.hpp"
#include "adresp/dataset.hpp"

namespace adresp {

struct RocPoint {
  double fp_rate = 0.0;
  double tp_rate = 0.0;
  double cut = 0.0;  // rows with score >= cut are counted as accepted
  std::size_t tp = 0;
  std::size_t fp = 0;
};

/// Points run from the (0,0) anchor (cut = +inf) through one point per
/// distinct score in descending order; the lowest score yields (1,1).
struct RocCurve {
  std::vector<RocPoint> points;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  double auc = 0.5;
  double area_above_diagonal = 0.0;
};

/// Builds the curve from raw scores. Tied scores collapse into one point and
/// the trapezoid area is accumulated in integer counts, so it equals the
/// pairwise statistic P(s+ > s-) + P(tie)/2 up to one final rounding.
/// Throws DegenerateCalibration when either side is empty.
RocCurve roc_from_scores(std::span<const double> positive_scores,
                         std::span<const double> negative_scores);

/// Curve of a model's linear predictor over a calibration set.
RocCurve roc(const BinaryModel& model, const LabeledSet& calibration);

struct ThresholdChoice {
  double cut = 0.0;
  double tp_rate = 0.0;
  double fp_rate = 0.0;
  double youden = 0.0;
};

/// Point maximizing tp_rate - fp_rate; ties go to the smaller fp_rate.
ThresholdChoice select_threshold(const RocCurve& curve);

/// Threshold for the strict acceptance rule eta > threshold that accepts
/// exactly the rows with eta >= cut: the largest double below the cut.
double threshold_for_cut(double cut) noexcept;

enum class Preference { first, second, equal };

struct ModelRanking {
  double auc = 0.5;
  std::size_t n_features = 0;
  std::string feature_set_name;
};

/// Higher auc wins; then fewer features; then the lexicographically smaller
/// feature-set name.
Preference compare(const ModelRanking& a, const ModelRanking& b) noexcept;
Preference compare(const BinaryModel& m0, const BinaryModel& m1, const LabeledSet& calibration);

/// CSV with header cut,fp_rate,tp_rate; values printed round-trip exact.
void write_curve_csv(const RocCurve& curve, std::ostream& out);
nlohmann::json curve_to_json(const RocCurve& curve);
nlohmann::json threshold_to_json(const ThresholdChoice& choice);

}  // namespace adresp
