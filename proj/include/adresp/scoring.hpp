#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "adresp/binary_model.hpp"

namespace adresp {

/// Dimensions whose levels are strings and get interned.
inline constexpr std::array<Dimension, 5> kStringDimensions = {
    Dimension::exchange, Dimension::ad_format, Dimension::ad_size, Dimension::domain,
    Dimension::zip};

/// Interns string levels to dense ids, one id space per dimension.
class Vocabulary {
 public:
  static constexpr std::uint32_t kUnknown = std::numeric_limits<std::uint32_t>::max();

  std::uint32_t intern(Dimension d, std::string_view level);
  /// kUnknown for a level never interned.
  std::uint32_t find(Dimension d, std::string_view level) const noexcept;
  std::size_t size(Dimension d) const noexcept;

 private:
  static std::size_t slot(Dimension d) noexcept;
  std::array<std::unordered_map<std::string, std::uint32_t>, kStringDimensions.size()> ids_;
};

/// An impression with its string levels replaced by vocabulary ids.
struct EncodedImpression {
  std::uint32_t exchange = Vocabulary::kUnknown;
  std::uint32_t ad_format = Vocabulary::kUnknown;
  std::uint32_t ad_size = Vocabulary::kUnknown;
  std::uint32_t domain = Vocabulary::kUnknown;
  std::uint32_t zip = Vocabulary::kUnknown;
  std::uint8_t hour = 0;
  std::uint8_t day = 0;
};

enum class LookupBackend { bsearch, hash };

std::string_view backend_name(LookupBackend b) noexcept;
LookupBackend parse_backend(std::string_view name);

/// Read-only scoring form of a BinaryModel. Hour and day betas sit in dense
/// arrays; string dimensions use a sorted (id, beta) table searched by
/// binary search, or a hash table. The linear predictor adds the intercept
/// and then one term per dimension in canonical order (0.0 when absent), the
/// same sequence as linear_predictor, so both give the same double.
class CompiledModel {
 public:
  CompiledModel() = default;

  const std::string& campaign() const noexcept { return campaign_; }
  double intercept() const noexcept { return intercept_; }
  double threshold() const noexcept { return threshold_; }
  LookupBackend backend() const noexcept { return backend_; }

  /// Beta for an interned level (0.0 when the model has none).
  double beta(Dimension d, std::uint32_t id) const noexcept;
  double beta_hour(int hour) const noexcept { return hour_[static_cast<std::size_t>(hour)]; }
  double beta_day(int day) const noexcept { return day_[static_cast<std::size_t>(day)]; }
  /// Number of entries in a string dimension's table.
  std::size_t table_size(Dimension d) const noexcept;

  double eta(const EncodedImpression& imp) const noexcept {
    double e = intercept_;
    e += beta(Dimension::exchange, imp.exchange);
    e += hour_[imp.hour];
    e += day_[imp.day];
    e += beta(Dimension::ad_format, imp.ad_format);
    e += beta(Dimension::ad_size, imp.ad_size);
    e += beta(Dimension::domain, imp.domain);
    e += beta(Dimension::zip, imp.zip);
    return e;
  }

  bool accepts(const EncodedImpression& imp) const noexcept { return eta(imp) > threshold_; }

 private:
  friend CompiledModel compile(const BinaryModel&, Vocabulary&, LookupBackend);

  using Table = std::vector<std::pair<std::uint32_t, double>>;
  static std::size_t slot(Dimension d) noexcept;

  std::string campaign_;
  double intercept_ = 0.0;
  double threshold_ = 0.0;
  LookupBackend backend_ = LookupBackend::bsearch;
  std::array<double, 24> hour_{};
  std::array<double, 7> day_{};
  std::array<Table, kStringDimensions.size()> sorted_;
  std::array<std::unordered_map<std::uint32_t, double>, kStringDimensions.size()> hashed_;
};

/// Interns the model's string levels into the vocabulary and builds the
/// lookup tables. Hour/day levels outside 0..23 / 0..6 can never match an
/// impression and are dropped.
CompiledModel compile(const BinaryModel& model, Vocabulary& vocabulary,
                      LookupBackend backend = LookupBackend::bsearch);

/// Models sharing one vocabulary; immutable once built.
class CompiledEnsemble {
 public:
  CompiledEnsemble() = default;
  explicit CompiledEnsemble(std::span<const BinaryModel> models,
                            LookupBackend backend = LookupBackend::bsearch);

  std::size_t size() const noexcept { return models_.size(); }
  const CompiledModel& operator[](std::size_t i) const noexcept { return models_[i]; }
  std::span<const CompiledModel> models() const noexcept { return models_; }
  const Vocabulary& vocabulary() const noexcept { return vocabulary_; }

  /// Unknown levels map to Vocabulary::kUnknown. Hour/day must be in range.
  EncodedImpression encode(const Impression& imp) const;
  std::vector<EncodedImpression> encode(std::span<const Impression> batch) const;

 private:
  Vocabulary vocabulary_;
  std::vector<CompiledModel> models_;
};

/// decisions[i * models + j] is 1 iff impression i is accepted by model j.
std::vector<std::uint8_t> score_batch(const CompiledEnsemble& ensemble,
                                      std::span<const EncodedImpression> batch);

struct BenchReport {
  std::size_t impressions_scored = 0;  // impression-ensemble evaluations
  std::size_t models = 0;
  double wall_time = 0.0;  // seconds
  double qps = 0.0;        // impressions_scored / wall_time
  double pair_rate = 0.0;  // (impression, model) evaluations per second
  unsigned threads = 1;
  std::size_t reps = 1;
  LookupBackend backend = LookupBackend::bsearch;
  std::vector<double> per_thread_qps;
  std::size_t accepted = 0;  // total accept decisions, keeps the work observable

  nlohmann::json to_json() const;
};

struct BenchConfig {
  unsigned threads = 1;
  std::size_t reps = 1;
  double min_wall_time = 0.1;  // seconds; shorter runs raise ClockResolution
};

/// Scores the batch reps times against every model with the batch split
/// statically across threads, after one untimed warm-up pass. Throws
/// EmptyBatch for an empty batch or ensemble and ClockResolution when the
/// timed region is shorter than min_wall_time.
BenchReport bench(const CompiledEnsemble& ensemble, std::span<const EncodedImpression> batch,
                  const BenchConfig& config = {});

/// Runs bench at each thread count; the first entry is the baseline.
std::vector<BenchReport> bench_scaling(const CompiledEnsemble& ensemble,
                                       std::span<const EncodedImpression> batch,
                                       std::span<const unsigned> thread_counts, std::size_t reps);

}  // namespace adresp
