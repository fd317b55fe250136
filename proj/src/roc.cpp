#include "adresp/roc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include <nlohmann/json.hpp>

#include "adresp/errors.hpp"

namespace adresp {

namespace {

// JSON has no infinity; the anchor cut is written as null.
nlohmann::json cut_value(double cut) {
  return std::isfinite(cut) ? nlohmann::json(cut) : nlohmann::json(nullptr);
}

std::string exact(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

RocCurve roc_from_scores(std::span<const double> positive_scores,
                         std::span<const double> negative_scores) {
  if (positive_scores.empty() || negative_scores.empty()) {
    throw DegenerateCalibration("calibration set needs both positives and negatives");
  }
  std::vector<std::pair<double, bool>> scored;
  scored.reserve(positive_scores.size() + negative_scores.size());
  for (double s : positive_scores) scored.emplace_back(s, true);
  for (double s : negative_scores) scored.emplace_back(s, false);
  for (const auto& [s, label] : scored) {
    if (std::isnan(s)) throw DegenerateCalibration("NaN score");
  }
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  RocCurve curve;
  curve.positives = positive_scores.size();
  curve.negatives = negative_scores.size();
  const auto n_pos = static_cast<double>(curve.positives);
  const auto n_neg = static_cast<double>(curve.negatives);
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity(), 0, 0});

  // Twice the area in units of one positive-negative pair: each step adds
  // dfp * (tp_prev + tp_new), an exact integer.
  unsigned long long twice_area = 0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < scored.size();) {
    const double cut = scored[i].first;
    const std::size_t tp_prev = tp, fp_prev = fp;
    for (; i < scored.size() && scored[i].first == cut; ++i) (scored[i].second ? tp : fp) += 1;
    twice_area += static_cast<unsigned long long>(fp - fp_prev) * (tp_prev + tp);
    curve.points.push_back({static_cast<double>(fp) / n_neg, static_cast<double>(tp) / n_pos, cut, tp, fp});
  }
  curve.auc = static_cast<double>(static_cast<long double>(twice_area) /
                                  (2.0L * curve.positives * curve.negatives));
  curve.area_above_diagonal = curve.auc - 0.5;
  return curve;
}

RocCurve roc(const BinaryModel& model, const LabeledSet& calibration) {
  std::vector<double> pos, neg;
  for (const auto& row : calibration.rows) {
    (row.positive ? pos : neg).push_back(linear_predictor(model, row.impression));
  }
  return roc_from_scores(pos, neg);
}

ThresholdChoice select_threshold(const RocCurve& curve) {
  if (curve.points.empty()) throw DegenerateCalibration("empty curve");
  // Compare in integer counts, tp/P - fp/N  <=>  tp*N - fp*P, to avoid
  // rounding ties apart.
  const auto score = [&](const RocPoint& p) {
    return static_cast<long double>(p.tp) * curve.negatives -
           static_cast<long double>(p.fp) * curve.positives;
  };
  const RocPoint* best = &curve.points.front();
  for (const auto& p : curve.points) {
    const auto s = score(p), b = score(*best);
    if (s > b || (s == b && p.fp < best->fp)) best = &p;
  }
  return {best->cut, best->tp_rate, best->fp_rate, best->tp_rate - best->fp_rate};
}

double threshold_for_cut(double cut) noexcept {
  return std::nextafter(cut, -std::numeric_limits<double>::infinity());
}

Preference compare(const ModelRanking& a, const ModelRanking& b) noexcept {
  if (a.auc != b.auc) return a.auc > b.auc ? Preference::first : Preference::second;
  if (a.n_features != b.n_features) {
    return a.n_features < b.n_features ? Preference::first : Preference::second;
  }
  if (a.feature_set_name != b.feature_set_name) {
    return a.feature_set_name < b.feature_set_name ? Preference::first : Preference::second;
  }
  return Preference::equal;
}

Preference compare(const BinaryModel& m0, const BinaryModel& m1, const LabeledSet& calibration) {
  return compare(ModelRanking{roc(m0, calibration).auc, m0.n_features(), m0.feature_set_name()},
                 ModelRanking{roc(m1, calibration).auc, m1.n_features(), m1.feature_set_name()});
}

void write_curve_csv(const RocCurve& curve, std::ostream& out) {
  out << "cut,fp_rate,tp_rate\n";
  for (const auto& p : curve.points) {
    out << exact(p.cut) << ',' << exact(p.fp_rate) << ',' << exact(p.tp_rate) << '\n';
  }
}

nlohmann::json curve_to_json(const RocCurve& curve) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : curve.points) {
    points.push_back({{"cut", cut_value(p.cut)}, {"fp_rate", p.fp_rate}, {"tp_rate", p.tp_rate}});
  }
  return {{"auc", curve.auc},
          {"area_above_diagonal", curve.area_above_diagonal},
          {"positives", curve.positives},
          {"negatives", curve.negatives},
          {"points", points}};
}

nlohmann::json threshold_to_json(const ThresholdChoice& choice) {
  return {{"cut", cut_value(choice.cut)},
          {"threshold", threshold_for_cut(choice.cut)},
          {"tp_rate", choice.tp_rate},
          {"fp_rate", choice.fp_rate},
          {"youden", choice.youden}};
}

}  // namespace adresp
