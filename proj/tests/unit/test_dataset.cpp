#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "adresp/dataset.hpp"
#include "adresp/errors.hpp"
#include "doctest.h"
#include "support/generators.hpp"

using namespace adresp;
using adresp::testing::random_impression;

namespace {

std::string json_row(int hour, const std::string& campaign = "A", std::int64_t ts = 1,
                     const std::string& domain = "Example.com") {
  return R"({"exchange":"x1","hour":)" + std::to_string(hour) +
         R"(,"day":2,"ad_format":"banner","ad_size":"300x250","domain":")" + domain +
         R"(","zip":"10001","campaign":")" + campaign + R"(","clicked":true,"ts":)" +
         std::to_string(ts) + "}\n";
}

Impression click(const std::string& campaign, std::int64_t ts) {
  Impression imp;
  imp.exchange = "x";
  imp.ad_format = "f";
  imp.ad_size = "s";
  imp.domain = "a.com";
  imp.zip = "10001";
  imp.campaign = campaign;
  imp.clicked = true;
  imp.timestamp = ts;
  return imp;
}

LabeledSet labeled(std::size_t pos, std::size_t neg) {
  std::vector<Impression> clicks;
  for (std::size_t i = 0; i < pos; ++i) clicks.push_back(click("A", static_cast<std::int64_t>(i)));
  for (std::size_t i = 0; i < neg; ++i) clicks.push_back(click("B", static_cast<std::int64_t>(i)));
  return build_labeled_set(ClickPool::from_clicks(clicks), "A");
}

std::vector<Impression> random_pool(std::size_t n, int campaigns, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Impression> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto imp = random_impression(rng);
    imp.campaign = "c" + std::to_string(rng() % static_cast<std::uint64_t>(campaigns));
    out.push_back(imp);
  }
  return out;
}

}  // namespace

TEST_CASE("ingest: three valid rows") {
  std::istringstream in(json_row(1) + json_row(2) + json_row(3));
  auto r = ingest(in, RecordFormat::jsonl);
  CHECK(r.pool.clicks.size() == 3);
  CHECK(r.report.skipped == 0);
  CHECK(r.pool.clicks[0].domain == "example.com");
  r.pool.validate();
}

TEST_CASE("ingest: out-of-range hour is skipped and counted") {
  std::istringstream in(json_row(1) + json_row(24) + json_row(3));
  auto r = ingest(in, RecordFormat::jsonl);
  CHECK(r.pool.clicks.size() == 2);
  CHECK(r.report.skipped == 1);
  CHECK(r.report.sample_lines == std::vector<std::size_t>{2});
  CHECK(r.report.to_json()["reasons"]["hour_out_of_range"] == 1);
}

TEST_CASE("ingest: skip reasons") {
  std::string text = json_row(1);
  text += "{not json\n";
  text += R"({"exchange":"x","hour":"3","day":2,"ad_format":"b","ad_size":"s","domain":"d.com","zip":"10001","campaign":"A","clicked":true,"ts":1})" "\n";
  text += R"({"exchange":"x","hour":3,"day":2,"ad_format":"b","ad_size":"s","domain":"d.com","zip":"1001","campaign":"A","clicked":true,"ts":1})" "\n";
  text += R"({"exchange":"x","hour":3,"day":2,"ad_format":"b","ad_size":"s","domain":"d.com","zip":"10001","campaign":"A","clicked":false,"ts":1})" "\n";
  text += R"({"exchange":"x","hour":3,"day":2,"ad_format":"b","ad_size":"s","domain":"","zip":"10001","campaign":"A","clicked":true,"ts":1})" "\n";
  std::istringstream in(text);
  auto r = ingest(in, RecordFormat::jsonl);
  CHECK(r.report.lines == 6);
  CHECK(r.report.accepted == 1);
  CHECK(r.report.reasons.at("malformed_json") == 1);
  CHECK(r.report.reasons.at("bad_type") == 1);
  CHECK(r.report.reasons.at("bad_zip") == 1);
  CHECK(r.report.reasons.at("not_clicked") == 1);
  CHECK(r.report.reasons.at("empty_field") == 1);
}

TEST_CASE("ingest: missing field reports the line") {
  std::istringstream in(json_row(1) + R"({"exchange":"x","hour":3})" "\n");
  try {
    ingest(in, RecordFormat::jsonl);
    FAIL("expected SchemaMismatch");
  } catch (const SchemaMismatch& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("ingest: CSV header must carry every column") {
  std::istringstream in("exchange,hour,day\nx,1,2\n");
  try {
    ingest(in, RecordFormat::csv);
    FAIL("expected SchemaMismatch");
  } catch (const SchemaMismatch& e) {
    CHECK(e.line() == 1);
  }
}

TEST_CASE("ingest: CSV with quoting and reordered columns") {
  std::istringstream in(
      "ts,campaign,clicked,zip,domain,ad_size,ad_format,day,hour,exchange\n"
      "7,\"A,B\",1,10001-1234,HTTP://Foo.com/x,300x250,\"ban\"\"ner\",3,4,x\n");
  auto r = ingest(in, RecordFormat::csv);
  REQUIRE(r.pool.clicks.size() == 1);
  const auto& c = r.pool.clicks[0];
  CHECK(c.campaign == "A,B");
  CHECK(c.ad_format == "ban\"ner");
  CHECK(c.zip == "10001");
  CHECK(c.domain == "foo.com");
  CHECK(c.hour == 4);
  CHECK(c.day == 3);
  CHECK(c.timestamp == 7);
}

TEST_CASE("ingest: nothing valid is EmptyInput") {
  std::istringstream empty("");
  CHECK_THROWS_AS(ingest(empty, RecordFormat::jsonl), EmptyInput);
  std::istringstream bad(json_row(30));
  CHECK_THROWS_AS(ingest(bad, RecordFormat::jsonl), EmptyInput);
}

TEST_CASE("ingest(emit(pool)) reproduces the pool") {
  const auto clicks = random_pool(10'000, 20, 11);
  const auto pool = ClickPool::from_clicks(clicks);
  for (auto fmt : {RecordFormat::jsonl, RecordFormat::csv}) {
    std::stringstream buf;
    emit(pool.clicks, buf, fmt);
    const auto back = ingest(buf, fmt);
    CHECK(back.report.skipped == 0);
    CHECK(back.pool.clicks == pool.clicks);
    CHECK(back.pool.campaigns == pool.campaigns);
    CHECK(back.pool.t_begin == pool.t_begin);
    CHECK(back.pool.t_end == pool.t_end);
  }
}

TEST_CASE("build_labeled_set: A:3 B:5") {
  std::vector<Impression> clicks;
  for (int i = 0; i < 3; ++i) clicks.push_back(click("A", i));
  for (int i = 0; i < 5; ++i) clicks.push_back(click("B", 10 + i));
  const auto pool = ClickPool::from_clicks(clicks);
  const auto set = build_labeled_set(pool, "A");
  CHECK(set.positives() == 3);
  CHECK(set.negatives() == 5);
  for (const auto& r : set.rows) CHECK(r.positive == (r.impression.campaign == "A"));

  CHECK_THROWS_AS(build_labeled_set(pool, "A", TimeWindow{5, 20}), NoPositives);
  CHECK_THROWS_AS(build_labeled_set(pool, "A", TimeWindow{0, 2}), NoNegatives);
  CHECK_THROWS_AS(build_labeled_set(pool, "Z"), NoPositives);
}

TEST_CASE("labeled sets partition the pool across campaigns") {
  const auto pool = ClickPool::from_clicks(random_pool(20'000, 100, 5));
  const TimeWindow window{200'000, 800'000};
  const auto in_window = static_cast<std::size_t>(std::count_if(
      pool.clicks.begin(), pool.clicks.end(),
      [&](const Impression& c) { return c.timestamp >= window.begin && c.timestamp <= window.end; }));
  std::size_t positives = 0;
  for (const auto& campaign : pool.campaigns) {
    const auto set = build_labeled_set(pool, campaign, window);
    CHECK(set.positives() + set.negatives() == in_window);
    positives += set.positives();
  }
  CHECK(pool.campaigns.size() == 100);
  CHECK(positives == in_window);
}

TEST_CASE("split_random: 4 pos / 4 neg at ratio 3") {
  const auto s = split_random(labeled(4, 4), 3.0, 1);
  CHECK(s.training.rows.size() == 6);
  CHECK(s.training.positives() == 3);
  CHECK(s.calibration.rows.size() == 2);
  CHECK(s.calibration.positives() == 1);
  CHECK(s.method == SplitMethod::random);
}

TEST_CASE("split_random is seed-deterministic and exhaustive") {
  const auto set = labeled(40, 60);
  const auto a = split_random(set, 3.0, 42);
  const auto b = split_random(set, 3.0, 42);
  const auto key = [](const LabeledSet& s) {
    std::vector<std::pair<std::int64_t, bool>> k;
    for (const auto& r : s.rows) k.emplace_back(r.impression.timestamp, r.positive);
    return k;
  };
  CHECK(key(a.training) == key(b.training));
  CHECK(key(a.calibration) == key(b.calibration));
  CHECK(key(a.training) != key(split_random(set, 3.0, 43).training));

  auto all = key(a.training);
  auto cal = key(a.calibration);
  all.insert(all.end(), cal.begin(), cal.end());
  std::sort(all.begin(), all.end());
  auto src = key(set);
  std::sort(src.begin(), src.end());
  CHECK(all == src);
  CHECK(std::adjacent_find(src.begin(), src.end()) == src.end());
}

TEST_CASE("split_random stratifies each label") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t pos = 200 + rng() % 1000;
    const auto set = labeled(pos, 10'000 - pos);
    const auto s = split_random(set, 3.0, rng());
    const double want_pos = 0.75 * static_cast<double>(pos);
    const double want_neg = 0.75 * static_cast<double>(10'000 - pos);
    CHECK(std::abs(static_cast<double>(s.training.positives()) - want_pos) <= 1.0);
    CHECK(std::abs(static_cast<double>(s.training.negatives()) - want_neg) <= 1.0);
  }
}

TEST_CASE("split_random: too small") {
  CHECK_THROWS_AS(split_random(labeled(1, 10), 3.0, 0), TooSmall);
  CHECK_THROWS_AS(split_random(labeled(4, 4), 0.0, 0), std::invalid_argument);
}

TEST_CASE("split_time: timestamps 0..99") {
  std::vector<Impression> clicks;
  for (int t = 0; t < 100; ++t) clicks.push_back(click(t % 2 ? "A" : "B", t));
  const auto set = build_labeled_set(ClickPool::from_clicks(clicks), "A");
  const auto s = split_time(set, 0.75);
  CHECK(s.training.rows.size() == 75);
  CHECK(s.calibration.rows.size() == 25);
  for (const auto& r : s.training.rows) CHECK(r.impression.timestamp <= 74);
  for (const auto& r : s.calibration.rows) CHECK(r.impression.timestamp > 74);
}

TEST_CASE("split_time: a single timestamp leaves calibration empty") {
  std::vector<Impression> clicks{click("A", 5), click("B", 5), click("A", 5)};
  const auto set = build_labeled_set(ClickPool::from_clicks(clicks), "A");
  CHECK_THROWS_AS(split_time(set, 0.75), TooSmall);
}

TEST_CASE("split_time orders training before calibration") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto pool = ClickPool::from_clicks(random_pool(2'000, 3, seed));
    const auto set = build_labeled_set(pool, "c0");
    const auto s = split_time(set, 0.5 + 0.02 * static_cast<double>(seed));
    std::int64_t max_train = INT64_MIN, min_cal = INT64_MAX;
    for (const auto& r : s.training.rows) max_train = std::max(max_train, r.impression.timestamp);
    for (const auto& r : s.calibration.rows) min_cal = std::min(min_cal, r.impression.timestamp);
    CHECK(max_train <= min_cal);
    CHECK(s.training.rows.size() + s.calibration.rows.size() == set.rows.size());
  }
}

TEST_CASE("read_batch accepts unclicked records without a campaign") {
  std::istringstream in(
      R"({"exchange":"x","hour":1,"day":2,"ad_format":"f","ad_size":"s","domain":"A.com","zip":"10001","campaign":"","clicked":false,"ts":5})"
      "\n"
      R"({"exchange":"x","hour":24,"day":2,"ad_format":"f","ad_size":"s","domain":"a.com","zip":"10001","campaign":"","clicked":false,"ts":5})"
      "\n");
  SkipReport report;
  const auto batch = read_batch(in, RecordFormat::jsonl, &report);
  REQUIRE(batch.size() == 1);
  CHECK_FALSE(batch[0].clicked);
  CHECK(batch[0].domain == "a.com");
  CHECK(report.reasons.at("hour_out_of_range") == 1);
}
