#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "adresp/binary_model.hpp"
#include "adresp/dataset.hpp"
#include "adresp/irls.hpp"
#include "adresp/roc.hpp"

namespace adresp {

/// Default K values of the ladder, tried for domains, ZIPs and both.
inline constexpr std::array<int, 5> kKLadder = {10, 20, 50, 100, 200};
inline constexpr std::size_t kLadderSize = 1 + 3 * kKLadder.size();
inline constexpr std::size_t kFeatureCap = 800;

/// Union of the k most frequent levels among positives and the k most
/// frequent among negatives, sorted. Frequency ties go to the
/// lexicographically smaller level. Only domain and zip are accepted.
std::vector<std::string> top_k_levels(const LabeledSet& train, Dimension dimension, int k);

struct Candidate {
  bool include_domains = false;
  bool include_zips = false;
  int k = 0;
  std::map<Dimension, std::vector<std::string>> selected_levels;  // domain / zip only

  /// "base", "domains@K", "zips@K" or "both@K".
  std::string name() const;
};

/// Candidates in evaluation order: base, then domains, zips and both for
/// each K. The default K values give the 16-candidate ladder.
std::vector<Candidate> ladder(std::span<const int> k_values = kKLadder);

/// Features of a candidate over a training set: every level of the five
/// small dimensions seen in training plus the selected domain/ZIP levels.
std::vector<FeatureKey> candidate_features(const LabeledSet& train, Candidate& candidate);

enum class CandidateStatus { fitted, skipped, failed };

struct CandidateResult {
  Candidate candidate;
  CandidateStatus status = CandidateStatus::failed;
  std::string reason;  // skip or failure cause
  std::size_t n_features = 0;
  double auc = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

struct ExplorationReport {
  std::string campaign;
  std::vector<CandidateResult> candidates;  // ladder order
  std::size_t best = 0;                     // index into candidates
  BinaryModel model;                        // best candidate, threshold set
  RocCurve curve;                           // calibration curve of the best model
  ThresholdChoice threshold;

  nlohmann::json to_json() const;
};

struct ExploreConfig {
  FitConfig fit;
  std::vector<int> k_values{kKLadder.begin(), kKLadder.end()};
  std::size_t feature_cap = kFeatureCap;
  unsigned threads = 1;  // candidates evaluated concurrently
};

/// Fits every ladder candidate on the training side, scores it on the
/// calibration side, and keeps the best by (auc, fewer features, name).
/// Candidates over the feature cap are skipped; solver failures demote the
/// candidate. Throws AllCandidatesFailed if nothing could be fitted.
ExplorationReport explore(const Split& split, const ExploreConfig& config = {});

}  // namespace adresp
