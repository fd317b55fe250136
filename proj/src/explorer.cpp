#include "adresp/explorer.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "adresp/errors.hpp"
#include "adresp/log.hpp"

namespace adresp {

namespace {

std::vector<std::string> most_frequent(const std::unordered_map<std::string, std::size_t>& counts,
                                       int k) {
  std::vector<std::pair<std::string, std::size_t>> v(counts.begin(), counts.end());
  const auto order = [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  };
  const auto n = std::min(v.size(), static_cast<std::size_t>(k));
  std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n), v.end(), order);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(v[i].first);
  return out;
}

const char* status_name(CandidateStatus s) {
  switch (s) {
    case CandidateStatus::fitted: return "fitted";
    case CandidateStatus::skipped: return "skipped";
    case CandidateStatus::failed: return "failed";
  }
  return "failed";
}

struct Fitted {
  CandidateResult result;
  BinaryModel model;
};

Fitted evaluate(const Split& split, Candidate candidate, const ExploreConfig& config) {
  Fitted out;
  auto& r = out.result;
  auto keys = candidate_features(split.training, candidate);
  r.candidate = std::move(candidate);
  r.n_features = keys.size();
  if (keys.size() > config.feature_cap) {
    r.status = CandidateStatus::skipped;
    r.reason = "feature_cap: " + std::to_string(keys.size()) + " > " +
               std::to_string(config.feature_cap);
    return out;
  }
  try {
    auto index = std::make_shared<const FeatureIndex>(std::move(keys));
    DesignMatrix design;
    design.n_features = index->n_columns();
    design.rows.reserve(split.training.rows.size());
    for (const auto& row : split.training.rows) {
      design.rows.push_back({row.positive ? 1u : 0u, 1u, index->encode(row.impression)});
    }
    const auto fitted = fit(design, config.fit);
    auto& m = out.model;
    m.campaign = split.training.campaign;
    m.feature_index = index;
    m.intercept = fitted.beta[0];
    for (std::uint32_t j = 1; j < fitted.beta.size(); ++j) m.betas[j] = fitted.beta[j];
    m.auc = roc(m, split.calibration).auc;
    r.auc = m.auc;
    r.iterations = fitted.iterations;
    r.converged = fitted.converged;
    for (auto w : fitted.warnings) r.warnings.emplace_back(warning_name(w));
    r.status = CandidateStatus::fitted;
  } catch (const std::exception& e) {
    r.status = CandidateStatus::failed;
    r.reason = e.what();
  }
  return out;
}

}  // namespace

std::vector<std::string> top_k_levels(const LabeledSet& train, Dimension dimension, int k) {
  if (dimension != Dimension::domain && dimension != Dimension::zip) {
    throw std::invalid_argument("top_k_levels applies to domain and zip only");
  }
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  std::unordered_map<std::string, std::size_t> pos, neg;
  for (const auto& row : train.rows) ++(row.positive ? pos : neg)[row.impression.level(dimension)];
  std::set<std::string> merged;
  for (auto& level : most_frequent(pos, k)) merged.insert(std::move(level));
  for (auto& level : most_frequent(neg, k)) merged.insert(std::move(level));
  return {merged.begin(), merged.end()};
}

std::string Candidate::name() const {
  if (!include_domains && !include_zips) return "base";
  const char* what = include_domains && include_zips ? "both" : (include_domains ? "domains" : "zips");
  return std::string(what) + "@" + std::to_string(k);
}

std::vector<Candidate> ladder(std::span<const int> k_values) {
  std::vector<Candidate> out{Candidate{}};
  for (int k : k_values) {
    if (k < 1) throw std::invalid_argument("ladder K values must be >= 1");
    out.push_back({true, false, k, {}});
    out.push_back({false, true, k, {}});
    out.push_back({true, true, k, {}});
  }
  return out;
}

std::vector<FeatureKey> candidate_features(const LabeledSet& train, Candidate& candidate) {
  std::set<FeatureKey> keys;
  for (const auto& row : train.rows) {
    for (Dimension d : kSmallDimensions) keys.insert({d, row.impression.level(d)});
  }
  candidate.selected_levels.clear();
  const auto add = [&](Dimension d) {
    auto levels = top_k_levels(train, d, candidate.k);
    for (const auto& level : levels) keys.insert({d, level});
    candidate.selected_levels[d] = std::move(levels);
  };
  if (candidate.include_domains) add(Dimension::domain);
  if (candidate.include_zips) add(Dimension::zip);
  return {keys.begin(), keys.end()};
}

ExplorationReport explore(const Split& split, const ExploreConfig& config) {
  config.fit.validate();
  const auto candidates = ladder(config.k_values);
  std::vector<Fitted> results(candidates.size());

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < candidates.size();) {
      results[i] = evaluate(split, candidates[i], config);
    }
  };
  const unsigned n_threads =
      std::clamp<unsigned>(config.threads, 1, static_cast<unsigned>(candidates.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  ExplorationReport report;
  report.campaign = split.training.campaign;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i].result;
    report.candidates.push_back(r);
    if (r.status != CandidateStatus::fitted) continue;
    if (!best ||
        compare(ModelRanking{r.auc, results[i].model.n_features(), results[i].model.feature_set_name()},
                ModelRanking{results[*best].result.auc, results[*best].model.n_features(),
                             results[*best].model.feature_set_name()}) == Preference::first) {
      best = i;
    }
  }
  if (!best) {
    throw AllCandidatesFailed("no candidate could be fitted for campaign " + report.campaign);
  }
  report.best = *best;
  report.model = std::move(results[*best].model);
  report.curve = roc(report.model, split.calibration);
  report.threshold = select_threshold(report.curve);
  report.model.threshold = threshold_for_cut(report.threshold.cut);

  if (log::enabled()) {
    log::emit("explore", {{"campaign", report.campaign},
                          {"best", report.candidates[report.best].candidate.name()},
                          {"auc", report.model.auc},
                          {"n_features", report.model.n_features()}});
  }
  return report;
}

nlohmann::json ExplorationReport::to_json() const {
  nlohmann::json grid = nlohmann::json::array();
  for (const auto& r : candidates) {
    nlohmann::json c = {{"name", r.candidate.name()},
                        {"include_domains", r.candidate.include_domains},
                        {"include_zips", r.candidate.include_zips},
                        {"k", r.candidate.k},
                        {"status", status_name(r.status)},
                        {"n_features", r.n_features}};
    if (r.status == CandidateStatus::fitted) {
      c["auc"] = r.auc;
      c["iterations"] = r.iterations;
      c["converged"] = r.converged;
      c["warnings"] = r.warnings;
    } else {
      c["reason"] = r.reason;
    }
    nlohmann::json levels = nlohmann::json::object();
    for (const auto& [d, v] : r.candidate.selected_levels) levels[std::string(dimension_name(d))] = v;
    c["selected_levels"] = levels;
    grid.push_back(std::move(c));
  }
  return {{"campaign", campaign},
          {"candidates", grid},
          {"best", candidates.at(best).candidate.name()},
          {"auc", model.auc},
          {"threshold", threshold_to_json(threshold)},
          {"model", adresp::to_json(model)}};
}

}  // namespace adresp
