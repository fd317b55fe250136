#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "adresp/dataset.hpp"
#include "adresp/explorer.hpp"
#include "adresp/polytomous.hpp"

namespace adresp {

/// Retrospective sampling rates: positives kept with probability tau_pos,
/// negatives with tau_neg, before fitting. The fitted model is then moved
/// to the full population with adjust_intercept_ex_ante.
struct SamplingRates {
  double tau_pos = 1.0;
  double tau_neg = 1.0;
};

struct PipelineConfig {
  std::vector<std::filesystem::path> inputs;
  std::optional<RecordFormat> format;  // by extension when absent
  std::optional<TimeWindow> window;
  std::vector<std::string> campaigns;  // empty: every campaign in the pool

  SplitMethod split_method = SplitMethod::random;
  double split_ratio = 3.0;
  double split_fraction = 0.75;
  std::uint64_t split_seed = 0;

  ExploreConfig explore;

  SamplingRates sampling;
  std::map<std::string, SamplingRates> sampling_per_campaign;
  std::uint64_t sampling_seed = 0;

  Policy policy = Policy::top;
  std::uint64_t policy_seed = 0;
  Credit credit = Credit::chosen;

  std::filesystem::path output_dir = "out";
  unsigned threads = 1;  // campaigns trained concurrently

  SamplingRates rates_for(const std::string& campaign) const;
};

/// Parses and validates a config document. Unknown keys, wrong types and
/// out-of-range values raise ConfigError naming the offending key. Relative
/// input and output paths are resolved against base_dir.
PipelineConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& file);
nlohmann::json config_to_json(const PipelineConfig& config);

/// Keeps each positive row with probability tau_pos and each negative with
/// tau_neg; the draw is seeded by (seed, campaign) and follows row order.
LabeledSet subsample(const LabeledSet& set, SamplingRates rates, std::uint64_t seed);

struct TrainOutcome {
  std::string campaign;
  std::optional<BinaryModel> model;  // ex-ante adjusted, threshold set
  std::optional<ExplorationReport> report;
  std::string error;  // set when the campaign failed
  std::size_t training_rows = 0;
  std::size_t calibration_rows = 0;

  bool ok() const noexcept { return model.has_value(); }
};

/// build_labeled_set, split, subsample the training side, explore, then
/// apply the ex-ante correction. Errors propagate.
TrainOutcome train_campaign(const ClickPool& pool, const std::string& campaign,
                            const PipelineConfig& config);

/// Trains every requested campaign on a bounded worker pool. A campaign's
/// failure is recorded in its outcome and never affects the others.
/// Outcomes are in campaign order.
std::vector<TrainOutcome> train_all(const ClickPool& pool, const PipelineConfig& config);

}  // namespace adresp
