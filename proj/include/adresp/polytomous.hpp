#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "adresp/binary_model.hpp"
#include "adresp/dataset.hpp"
#include "adresp/scoring.hpp"

namespace adresp {

enum class Policy { top, set };

/// How a campaign is credited with a positive decision during evaluation.
/// chosen: only the model the policy picked. all_acceptors: every model that
/// accepted the impression (the policy's choice then does not matter).
enum class Credit { chosen, all_acceptors };

std::string_view policy_name(Policy p) noexcept;
Policy parse_policy(std::string_view name);
std::string_view credit_name(Credit c) noexcept;
Credit parse_credit(std::string_view name);

/// Uniform draw in [0, n) from (seed, ordinal) via splitmix64; used by the
/// set policy so every evaluation is reproducible impression by impression.
std::size_t set_draw(std::uint64_t seed, std::uint64_t ordinal, std::size_t n) noexcept;

struct Assignment {
  std::vector<std::string> accepted_by;  // campaign order
  std::optional<std::string> chosen;
};

/// Immutable collection of per-campaign models. Adding or removing a
/// campaign means building a new value; the models are compiled once at
/// construction and shared between copies.
class PolytomousModel {
 public:
  PolytomousModel(std::vector<BinaryModel> models, Policy policy = Policy::top,
                  std::uint64_t seed = 0, std::map<std::string, double> weights = {});

  Policy policy() const noexcept { return policy_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t size() const noexcept { return state_->models.size(); }
  /// Models in campaign order.
  const std::vector<BinaryModel>& models() const noexcept { return state_->models; }
  const CompiledEnsemble& compiled() const noexcept { return state_->compiled; }
  std::optional<std::size_t> index_of(std::string_view campaign) const noexcept;
  /// Reporting weight of a campaign (1 when not given).
  double weight(std::string_view campaign) const noexcept;

  PolytomousModel with_policy(Policy policy, std::uint64_t seed) const;
  PolytomousModel without(std::string_view campaign) const;

  /// Fills accepted (model indices, increasing) and returns the chosen
  /// index, if any. ordinal feeds the set-policy draw.
  std::optional<std::size_t> assign_indices(const EncodedImpression& imp, std::uint64_t ordinal,
                                            std::vector<std::size_t>& accepted) const;

 private:
  struct State {
    std::vector<BinaryModel> models;
    CompiledEnsemble compiled;
    std::map<std::string, double, std::less<>> weights;
  };
  PolytomousModel(std::shared_ptr<const State> state, Policy policy, std::uint64_t seed)
      : state_(std::move(state)), policy_(policy), seed_(seed) {}

  std::shared_ptr<const State> state_;
  Policy policy_ = Policy::top;
  std::uint64_t seed_ = 0;
};

/// accepted_by = {j : eta_j > threshold_j}. Top picks the largest margin
/// eta - threshold, ties to the earlier campaign; set draws uniformly.
Assignment assign(const PolytomousModel& ensemble, const Impression& imp, std::uint64_t ordinal = 0);

struct CoverageReport {
  std::size_t impressions = 0;
  std::size_t rejected_by_all = 0;
  double fraction = 0.0;  // rejected_by_all / impressions
  std::vector<std::string> campaigns;
  std::vector<std::size_t> rejected_by_model;  // per campaign

  double model_rejection(std::size_t j) const {
    return static_cast<double>(rejected_by_model.at(j)) / static_cast<double>(impressions);
  }
  nlohmann::json to_json() const;
};

/// Single pass over the pool. Throws EmptyPool on an empty pool.
CoverageReport coverage(const PolytomousModel& ensemble, std::span<const Impression> pool,
                        unsigned threads = 1);

struct ConfusionTotals {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  ConfusionTotals& operator+=(const ConfusionTotals& o) noexcept;
  bool operator==(const ConfusionTotals&) const = default;
};

/// The four ratios; nullopt when a denominator is zero.
struct Metrics {
  std::optional<double> precision;      // tp / (tp + fp)
  std::optional<double> recall;         // tp / (tp + fn)
  std::optional<double> accuracy;       // (tp + tn) / all
  std::optional<double> negative_rate;  // tn / (tn + fn)

  static Metrics from(const ConfusionTotals& c) noexcept;
};

struct MetricsReport {
  Policy policy = Policy::top;
  Credit credit = Credit::chosen;
  std::size_t impressions = 0;     // clicks evaluated
  std::size_t skipped_clicks = 0;  // clicks whose campaign has no model
  std::map<std::string, std::size_t> skipped_campaigns;
  std::vector<std::string> campaigns;
  std::vector<ConfusionTotals> per_campaign;
  std::vector<double> weights;
  ConfusionTotals totals;  // sum over campaigns

  Metrics metrics(std::size_t j) const { return Metrics::from(per_campaign.at(j)); }
  Metrics total_metrics() const { return Metrics::from(totals); }
  nlohmann::json to_json() const;
};

/// Scores every click against every model and counts, per campaign j:
/// tp when the click is j's and j is credited, fp when j is credited on
/// another campaign's click, fn when the click is j's and j is not credited,
/// tn otherwise. The ordinal of a click is its position in the pool. Throws
/// EmptyPool when no click can be evaluated.
MetricsReport evaluate(const PolytomousModel& ensemble, const ClickPool& clicks,
                       Credit credit = Credit::chosen);

struct SeriesPoint {
  std::int64_t t_begin = 0;
  std::int64_t t_end = 0;  // exclusive
  ConfusionTotals totals;
};

/// Totals per time bucket of the given width, starting at the pool's first
/// timestamp. Ordinals are pool positions, as in evaluate, so the buckets
/// sum to evaluate's totals.
std::vector<SeriesPoint> evaluate_series(const PolytomousModel& ensemble, const ClickPool& clicks,
                                         std::int64_t bucket_seconds, Credit credit = Credit::chosen);

/// CSV: t_begin,t_end,impressions,precision,recall,accuracy,negative_rate;
/// undefined ratios are left empty.
void write_series_csv(std::span<const SeriesPoint> series, std::ostream& out);

}  // namespace adresp
