#include "adresp/binary_model.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "adresp/errors.hpp"
#include "adresp/logistic.hpp"

namespace adresp {

namespace {

// An infinite threshold switches a model fully off (+inf) or on (-inf); JSON
// has no infinities, so those are written as strings.
nlohmann::json threshold_json(double t) {
  if (std::isinf(t)) return t > 0 ? "inf" : "-inf";
  return t;
}

double threshold_from(const nlohmann::json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw InvalidModel("bad threshold " + v.dump());
  }
  return v.get<double>();
}

}  // namespace

void BinaryModel::validate() const {
  if (!feature_index) throw InvalidModel(campaign + ": missing feature index");
  if (!std::isfinite(intercept)) throw InvalidModel(campaign + ": intercept not finite");
  if (std::isnan(threshold)) throw InvalidModel(campaign + ": threshold is NaN");
  if (!(auc >= 0.0 && auc <= 1.0)) throw InvalidModel(campaign + ": auc outside [0, 1]");
  if (!(sampling_ratio > 0.0) || !std::isfinite(sampling_ratio)) {
    throw InvalidModel(campaign + ": sampling ratio must be positive");
  }
  for (const auto& [index, value] : betas) {
    if (index == 0 || index > feature_index->size()) {
      throw InvalidModel(campaign + ": beta index " + std::to_string(index) +
                         " not in feature index");
    }
    if (!std::isfinite(value)) throw InvalidModel(campaign + ": beta not finite");
  }
}

double BinaryModel::beta_for(Dimension d, std::string_view level) const noexcept {
  auto idx = feature_index->find(d, level);
  if (!idx) return 0.0;
  auto it = betas.find(*idx);
  return it == betas.end() ? 0.0 : it->second;
}

std::string BinaryModel::feature_set_name() const {
  std::string name;
  for (const auto& [index, value] : betas) {
    const auto& key = feature_index->key(index);
    if (!name.empty()) name += ',';
    name += dimension_name(key.dimension);
    name += '=';
    name += key.level;
  }
  return name;
}

double linear_predictor(const BinaryModel& model, const Impression& imp) noexcept {
  double eta = model.intercept;
  for (Dimension d : kAllDimensions) eta += model.beta_for(d, imp.level(d));
  return eta;
}

double predict_probability(const BinaryModel& model, const Impression& imp) noexcept {
  return inverse_logit(linear_predictor(model, imp));
}

BinaryModel adjust_intercept_ex_ante(const BinaryModel& model, double tau_pos, double tau_neg) {
  if (!(tau_pos > 0.0) || !(tau_neg > 0.0) || !std::isfinite(tau_pos) ||
      !std::isfinite(tau_neg)) {
    throw DomainError("sampling rates must be positive and finite");
  }
  const double shift = std::log(tau_pos / tau_neg);
  BinaryModel out = model;
  out.intercept = model.intercept - shift;
  out.threshold = model.threshold - shift;
  out.sampling_ratio = model.sampling_ratio * (tau_pos / tau_neg);
  return out;
}

nlohmann::json to_json(const BinaryModel& model) {
  // betas is keyed by dense index and the index is in canonical
  // (dimension, level) order, so iteration order is already sorted.
  nlohmann::json betas = nlohmann::json::array();
  for (const auto& [index, value] : model.betas) {
    const auto& key = model.feature_index->key(index);
    betas.push_back({{"dimension", dimension_name(key.dimension)},
                     {"level", key.level},
                     {"value", value}});
  }
  return {{"campaign", model.campaign},
          {"intercept", model.intercept},
          {"threshold", threshold_json(model.threshold)},
          {"auc", model.auc},
          {"sampling_ratio", model.sampling_ratio},
          {"betas", std::move(betas)}};
}

BinaryModel model_from_json(const nlohmann::json& doc) {
  try {
    BinaryModel model;
    model.campaign = doc.at("campaign").get<std::string>();
    model.intercept = doc.at("intercept").get<double>();
    model.threshold = threshold_from(doc.at("threshold"));
    model.auc = doc.at("auc").get<double>();
    model.sampling_ratio = doc.value("sampling_ratio", 1.0);

    std::vector<FeatureKey> keys;
    std::vector<double> values;
    for (const auto& b : doc.at("betas")) {
      auto dim = parse_dimension(b.at("dimension").get<std::string>());
      if (!dim) throw InvalidModel("unknown dimension " + b.at("dimension").dump());
      keys.push_back({*dim, b.at("level").get<std::string>()});
      values.push_back(b.at("value").get<double>());
    }
    auto index = std::make_shared<FeatureIndex>(keys);
    if (index->size() != keys.size()) throw InvalidModel(model.campaign + ": duplicate betas");
    for (std::size_t i = 0; i < keys.size(); ++i) {
      model.betas.emplace(*index->find(keys[i]), values[i]);
    }
    model.feature_index = std::move(index);
    model.validate();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidModel(std::string("malformed model document: ") + e.what());
  }
}

std::string dump_model(const BinaryModel& model) {
  return to_json(model).dump(2) + "\n";
}

}  // namespace adresp
