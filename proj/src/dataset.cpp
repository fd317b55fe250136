#include "adresp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>

#include <nlohmann/json.hpp>

#include "adresp/errors.hpp"

namespace adresp {

namespace {

constexpr std::array<std::string_view, 10> kColumns = {
    "exchange", "hour", "day", "ad_format", "ad_size", "domain", "zip", "campaign", "clicked", "ts"};
constexpr std::size_t kSampleLines = 20;

// Raised while decoding one record; the record is skipped with this reason.
struct Reject {
  std::string reason;
};

struct RawRecord {
  std::string exchange, ad_format, ad_size, domain, zip, campaign;
  std::int64_t hour = 0, day = 0, ts = 0;
  bool clicked = false;
};

// Click mode rejects unclicked records and requires a campaign; batch mode
// keeps both fields as read.
Impression finish_record(RawRecord raw, bool clicks_only) {
  if (raw.hour < 0 || raw.hour > 23) throw Reject{"hour_out_of_range"};
  if (raw.day < 0 || raw.day > 6) throw Reject{"day_out_of_range"};
  if (clicks_only && !raw.clicked) throw Reject{"not_clicked"};
  auto zip = normalize_zip(raw.zip);
  if (!zip) throw Reject{"bad_zip"};
  Impression imp;
  imp.exchange = std::move(raw.exchange);
  imp.hour = static_cast<int>(raw.hour);
  imp.day = static_cast<int>(raw.day);
  imp.ad_format = std::move(raw.ad_format);
  imp.ad_size = std::move(raw.ad_size);
  imp.domain = normalize_domain(raw.domain);
  imp.zip = std::move(*zip);
  imp.campaign = std::move(raw.campaign);
  imp.clicked = raw.clicked;
  imp.timestamp = raw.ts;
  if ((clicks_only && imp.campaign.empty()) || imp.domain.empty() || imp.exchange.empty() ||
      imp.ad_format.empty() || imp.ad_size.empty()) {
    throw Reject{"empty_field"};
  }
  return imp;
}

Impression decode_json(const std::string& line, std::size_t line_no, bool clicks_only) {
  auto doc = nlohmann::json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Reject{"malformed_json"};
  for (auto col : kColumns) {
    if (!doc.contains(col)) {
      throw SchemaMismatch(line_no, "missing field \"" + std::string(col) + "\"");
    }
  }
  RawRecord raw;
  try {
    raw.exchange = doc["exchange"].get<std::string>();
    raw.ad_format = doc["ad_format"].get<std::string>();
    raw.ad_size = doc["ad_size"].get<std::string>();
    raw.domain = doc["domain"].get<std::string>();
    raw.zip = doc["zip"].get<std::string>();
    raw.campaign = doc["campaign"].get<std::string>();
    if (!doc["hour"].is_number_integer() || !doc["day"].is_number_integer() ||
        !doc["ts"].is_number_integer() || !doc["clicked"].is_boolean()) {
      throw Reject{"bad_type"};
    }
    raw.hour = doc["hour"].get<std::int64_t>();
    raw.day = doc["day"].get<std::int64_t>();
    raw.ts = doc["ts"].get<std::int64_t>();
    raw.clicked = doc["clicked"].get<bool>();
  } catch (const nlohmann::json::exception&) {
    throw Reject{"bad_type"};
  }
  return finish_record(std::move(raw), clicks_only);
}

// RFC 4180 fields of one line (no embedded newlines).
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

std::int64_t parse_int(const std::string& s) {
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw Reject{"bad_type"};
  }
  if (used != s.size()) throw Reject{"bad_type"};
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "True" || s == "TRUE") return true;
  if (s == "false" || s == "0" || s == "False" || s == "FALSE") return false;
  throw Reject{"bad_type"};
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

ClickPool ClickPool::from_clicks(std::vector<Impression> clicks) {
  ClickPool pool;
  pool.clicks = std::move(clicks);
  if (!pool.clicks.empty()) {
    pool.t_begin = std::numeric_limits<std::int64_t>::max();
    pool.t_end = std::numeric_limits<std::int64_t>::min();
  }
  for (const auto& c : pool.clicks) {
    pool.campaigns.insert(c.campaign);
    pool.t_begin = std::min(pool.t_begin, c.timestamp);
    pool.t_end = std::max(pool.t_end, c.timestamp);
  }
  return pool;
}

void ClickPool::validate() const {
  for (const auto& c : clicks) {
    if (!c.clicked) throw std::invalid_argument("click pool holds an unclicked impression");
    if (!is_well_formed(c)) throw std::invalid_argument("click pool holds a malformed impression");
    if (c.timestamp < t_begin || c.timestamp > t_end) {
      throw std::invalid_argument("click outside the pool window");
    }
    if (!campaigns.contains(c.campaign)) {
      throw std::invalid_argument("click campaign missing from the campaign set");
    }
  }
}

nlohmann::json SkipReport::to_json() const {
  return {{"lines", lines},
          {"accepted", accepted},
          {"skipped", skipped},
          {"reasons", reasons},
          {"sample_lines", sample_lines}};
}

namespace {

std::pair<std::vector<Impression>, SkipReport> read_records(std::istream& in, RecordFormat format,
                                                            bool clicks_only) {
  std::vector<Impression> clicks;
  SkipReport report;
  std::array<std::size_t, kColumns.size()> column_of{};
  bool have_header = format == RecordFormat::jsonl;
  std::size_t line_no = 0;
  std::string line;

  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    if (!have_header) {
      const auto header = split_csv(line);
      for (std::size_t c = 0; c < kColumns.size(); ++c) {
        auto it = std::find(header.begin(), header.end(), kColumns[c]);
        if (it == header.end()) {
          throw SchemaMismatch(line_no, "CSV header lacks column \"" + std::string(kColumns[c]) + "\"");
        }
        column_of[c] = static_cast<std::size_t>(it - header.begin());
      }
      have_header = true;
      continue;
    }
    ++report.lines;
    try {
      if (format == RecordFormat::jsonl) {
        clicks.push_back(decode_json(line, line_no, clicks_only));
      } else {
        const auto f = split_csv(line);
        for (std::size_t c = 0; c < kColumns.size(); ++c) {
          if (column_of[c] >= f.size()) {
            throw SchemaMismatch(line_no, "record lacks column \"" + std::string(kColumns[c]) + "\"");
          }
        }
        RawRecord raw;
        raw.exchange = f[column_of[0]];
        raw.hour = parse_int(f[column_of[1]]);
        raw.day = parse_int(f[column_of[2]]);
        raw.ad_format = f[column_of[3]];
        raw.ad_size = f[column_of[4]];
        raw.domain = f[column_of[5]];
        raw.zip = f[column_of[6]];
        raw.campaign = f[column_of[7]];
        raw.clicked = parse_bool(f[column_of[8]]);
        raw.ts = parse_int(f[column_of[9]]);
        clicks.push_back(finish_record(std::move(raw), clicks_only));
      }
      ++report.accepted;
    } catch (const Reject& r) {
      ++report.skipped;
      ++report.reasons[r.reason];
      if (report.sample_lines.size() < kSampleLines) report.sample_lines.push_back(line_no);
    }
  }
  if (report.lines == 0) throw EmptyInput("input holds no records");
  if (clicks.empty()) throw EmptyInput("no valid records among " + std::to_string(report.lines));
  return {std::move(clicks), std::move(report)};
}

}  // namespace

IngestResult ingest(std::istream& in, RecordFormat format) {
  auto [clicks, report] = read_records(in, format, true);
  return {ClickPool::from_clicks(std::move(clicks)), std::move(report)};
}

std::vector<Impression> read_batch(std::istream& in, RecordFormat format, SkipReport* report) {
  auto [records, r] = read_records(in, format, false);
  if (report) *report = std::move(r);
  return std::move(records);
}

std::vector<Impression> read_batch_file(const std::filesystem::path& path,
                                        std::optional<RecordFormat> format, SkipReport* report) {
  std::ifstream in(path);
  if (!in) throw EmptyInput("cannot open " + path.string());
  return read_batch(in, format.value_or(format_for(path)), report);
}

RecordFormat format_for(const std::filesystem::path& path) noexcept {
  return path.extension() == ".csv" ? RecordFormat::csv : RecordFormat::jsonl;
}

IngestResult ingest_file(const std::filesystem::path& path, std::optional<RecordFormat> format) {
  std::ifstream in(path);
  if (!in) throw EmptyInput("cannot open " + path.string());
  return ingest(in, format.value_or(format_for(path)));
}

void emit(std::span<const Impression> records, std::ostream& out, RecordFormat format) {
  if (format == RecordFormat::csv) {
    for (std::size_t c = 0; c < kColumns.size(); ++c) out << (c ? "," : "") << kColumns[c];
    out << '\n';
    for (const auto& r : records) {
      out << csv_escape(r.exchange) << ',' << r.hour << ',' << r.day << ','
          << csv_escape(r.ad_format) << ',' << csv_escape(r.ad_size) << ','
          << csv_escape(r.domain) << ',' << csv_escape(r.zip) << ',' << csv_escape(r.campaign)
          << ',' << (r.clicked ? "true" : "false") << ',' << r.timestamp << '\n';
    }
    return;
  }
  for (const auto& r : records) {
    nlohmann::ordered_json doc;
    doc["exchange"] = r.exchange;
    doc["hour"] = r.hour;
    doc["day"] = r.day;
    doc["ad_format"] = r.ad_format;
    doc["ad_size"] = r.ad_size;
    doc["domain"] = r.domain;
    doc["zip"] = r.zip;
    doc["campaign"] = r.campaign;
    doc["clicked"] = r.clicked;
    doc["ts"] = r.timestamp;
    out << doc.dump() << '\n';
  }
}

std::size_t LabeledSet::positives() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.positive; }));
}

LabeledSet build_labeled_set(const ClickPool& pool, std::string_view campaign,
                             std::optional<TimeWindow> window) {
  const TimeWindow w = window.value_or(TimeWindow{pool.t_begin, pool.t_end});
  if (w.end < w.begin) throw std::invalid_argument("empty time window");
  LabeledSet set;
  set.campaign = std::string(campaign);
  for (const auto& click : pool.clicks) {
    if (click.timestamp < w.begin || click.timestamp > w.end) continue;
    set.rows.push_back({click, click.campaign == campaign});
  }
  if (set.positives() == 0) {
    throw NoPositives("campaign " + set.campaign + " has no clicks in the window");
  }
  if (set.negatives() == 0) {
    throw NoNegatives("no other campaign has clicks in the window of " + set.campaign);
  }
  return set;
}

namespace {

void require_both_labels(const Split& s) {
  const auto check = [](const LabeledSet& side, const char* name) {
    if (side.positives() == 0 || side.negatives() == 0) {
      throw TooSmall(std::string(name) + " side of the split misses a label");
    }
  };
  check(s.training, "training");
  check(s.calibration, "calibration");
}

}  // namespace

Split split_random(const LabeledSet& set, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0) || !std::isfinite(ratio)) throw std::invalid_argument("ratio must be > 0");
  std::mt19937_64 rng(seed);
  std::vector<char> to_training(set.rows.size(), 0);
  for (bool label : {true, false}) {
    std::vector<std::size_t> group;
    for (std::size_t i = 0; i < set.rows.size(); ++i) {
      if (set.rows[i].positive == label) group.push_back(i);
    }
    // Fisher-Yates with an explicit draw so the permutation is identical
    // across standard library implementations.
    for (std::size_t i = group.size(); i > 1; --i) {
      std::swap(group[i - 1], group[rng() % i]);
    }
    const auto n_train = static_cast<std::size_t>(
        std::llround(static_cast<double>(group.size()) * ratio / (1.0 + ratio)));
    for (std::size_t k = 0; k < n_train && k < group.size(); ++k) to_training[group[k]] = 1;
  }
  Split s;
  s.method = SplitMethod::random;
  s.seed = seed;
  s.training.campaign = s.calibration.campaign = set.campaign;
  for (std::size_t i = 0; i < set.rows.size(); ++i) {
    (to_training[i] ? s.training : s.calibration).rows.push_back(set.rows[i]);
  }
  require_both_labels(s);
  return s;
}

Split split_time(const LabeledSet& set, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("fraction must be in (0, 1)");
  if (set.rows.empty()) throw TooSmall("empty labeled set");
  auto [lo, hi] = std::minmax_element(set.rows.begin(), set.rows.end(), [](const auto& a, const auto& b) {
    return a.impression.timestamp < b.impression.timestamp;
  });
  const double t_a = static_cast<double>(lo->impression.timestamp);
  const double t_c = static_cast<double>(hi->impression.timestamp);
  const double t_b = t_a + fraction * (t_c - t_a);
  Split s;
  s.method = SplitMethod::time;
  s.training.campaign = s.calibration.campaign = set.campaign;
  for (const auto& row : set.rows) {
    (static_cast<double>(row.impression.timestamp) <= t_b ? s.training : s.calibration)
        .rows.push_back(row);
  }
  require_both_labels(s);
  return s;
}

}  // namespace adresp
