#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "adresp/impression.hpp"

namespace adresp {

enum class RecordFormat { jsonl, csv };

/// Clicked impressions of every campaign over one time window.
struct ClickPool {
  std::vector<Impression> clicks;
  std::set<std::string> campaigns;
  std::int64_t t_begin = 0;
  std::int64_t t_end = 0;

  static ClickPool from_clicks(std::vector<Impression> clicks);
  /// Throws std::invalid_argument when a record is unclicked, malformed or
  /// outside [t_begin, t_end].
  void validate() const;
};

struct SkipReport {
  std::size_t lines = 0;
  std::size_t accepted = 0;
  std::size_t skipped = 0;
  std::map<std::string, std::size_t> reasons;
  std::vector<std::size_t> sample_lines;  // first few skipped line numbers

  nlohmann::json to_json() const;
};

struct IngestResult {
  ClickPool pool;
  SkipReport report;
};

/// Reads click records. Records with out-of-range or unparseable values are
/// skipped and counted; a record missing a required field (or a CSV header
/// missing a column) raises SchemaMismatch with its line number. Domains and
/// ZIPs are normalized. Throws EmptyInput when no record survives.
IngestResult ingest(std::istream& in, RecordFormat format);
IngestResult ingest_file(const std::filesystem::path& path,
                         std::optional<RecordFormat> format = std::nullopt);

/// Reads impressions to score in the same schema. Unclicked records and an
/// empty campaign are allowed; the other checks of ingest apply.
std::vector<Impression> read_batch(std::istream& in, RecordFormat format,
                                   SkipReport* report = nullptr);
std::vector<Impression> read_batch_file(const std::filesystem::path& path,
                                        std::optional<RecordFormat> format = std::nullopt,
                                        SkipReport* report = nullptr);

/// Format implied by a file extension (.csv, otherwise JSONL).
RecordFormat format_for(const std::filesystem::path& path) noexcept;

/// Writes records in the ingest schema (JSONL or CSV with header).
void emit(std::span<const Impression> records, std::ostream& out, RecordFormat format);

struct TimeWindow {
  std::int64_t begin = 0;
  std::int64_t end = 0;  // inclusive
};

struct LabeledImpression {
  Impression impression;
  bool positive = false;
};

/// Per-campaign training material: the campaign's clicks are positives, the
/// other campaigns' clicks in the same window are negatives.
struct LabeledSet {
  std::string campaign;
  std::vector<LabeledImpression> rows;

  std::size_t positives() const noexcept;
  std::size_t negatives() const noexcept { return rows.size() - positives(); }
};

/// Throws NoPositives / NoNegatives when either side would be empty.
LabeledSet build_labeled_set(const ClickPool& pool, std::string_view campaign,
                             std::optional<TimeWindow> window = std::nullopt);

enum class SplitMethod { random, time };

struct Split {
  LabeledSet training;
  LabeledSet calibration;
  SplitMethod method = SplitMethod::random;
  std::uint64_t seed = 0;
};

/// Label-stratified random split with |training| / |calibration| ~= ratio.
/// Each label is shuffled with a seeded generator and its first
/// round(n * ratio / (1 + ratio)) rows go to training; both sides keep the
/// source order. Throws TooSmall when a side would miss a label.
Split split_random(const LabeledSet& set, double ratio = 3.0, std::uint64_t seed = 0);

/// Time split at t_B = t_A + fraction (t_C - t_A) with t_A, t_C the earliest
/// and latest timestamps; rows with ts <= t_B train. Throws TooSmall when a
/// side would miss a label.
Split split_time(const LabeledSet& set, double fraction = 0.75);

}  // namespace adresp
