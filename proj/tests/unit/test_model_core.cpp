#include <cmath>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "adresp/binary_model.hpp"
#include "adresp/errors.hpp"
#include "adresp/exact_sum.hpp"
#include "adresp/logistic.hpp"
#include "doctest.h"
#include "support/generators.hpp"

using namespace adresp;

namespace {

BinaryModel hand_model() {
  auto index = std::make_shared<FeatureIndex>(std::vector<FeatureKey>{
      {Dimension::domain, "foo.com"}, {Dimension::hour, "17"}});
  BinaryModel m;
  m.campaign = "acme";
  m.intercept = -2.0;
  m.feature_index = index;
  m.betas[*index->find(Dimension::domain, "foo.com")] = 1.5;
  m.betas[*index->find(Dimension::hour, "17")] = 0.3;
  return m;
}

// Dense evaluation x'beta over every indexed feature, accumulated in long double.
long double dense_eta(const BinaryModel& m, const Impression& imp) {
  long double eta = m.intercept;
  const auto& keys = m.feature_index->keys();
  for (std::uint32_t j = 1; j <= keys.size(); ++j) {
    const double x = imp.level(keys[j - 1].dimension) == keys[j - 1].level ? 1.0 : 0.0;
    auto it = m.betas.find(j);
    eta += x * (it == m.betas.end() ? 0.0L : static_cast<long double>(it->second));
  }
  return eta;
}

}  // namespace

TEST_CASE("normalization keeps subdomains and drops paths") {
  CHECK(normalize_domain("finance.yahoo.com") == "finance.yahoo.com");
  CHECK(normalize_domain("finance.yahoo.com") != normalize_domain("yahoo.com"));
  CHECK(normalize_domain("google.com/finance") == "google.com");
  CHECK(normalize_domain("https://WWW.Example.COM:8080/a?b#c") == "www.example.com");
  CHECK(normalize_zip("95131") == "95131");
  CHECK(normalize_zip("95131-1234") == "95131");
  CHECK(normalize_zip("") == "unknown");
  CHECK_FALSE(normalize_zip("9513").has_value());
  CHECK_FALSE(normalize_zip("ABCDE").has_value());

  Impression imp;
  imp.campaign = "c";
  imp.domain = "a.com";
  imp.zip = "unknown";
  CHECK(is_well_formed(imp));
  imp.hour = 24;
  CHECK_FALSE(is_well_formed(imp));
  imp.hour = 23;
  imp.day = 7;
  CHECK_FALSE(is_well_formed(imp));
}

TEST_CASE("feature index is a bijection in canonical order") {
  std::mt19937_64 rng(11);
  std::vector<FeatureKey> keys;
  for (int i = 0; i < 400; ++i) keys.push_back(testing::random_key(rng, {}));
  FeatureIndex index(keys);
  for (std::uint32_t j = 1; j <= index.size(); ++j) {
    CHECK(index.find(index.key(j)) == j);
    if (j > 1) CHECK(index.key(j - 1) < index.key(j));
  }
  for (const auto& k : keys) CHECK(index.find(k).has_value());
  CHECK_FALSE(index.find(Dimension::domain, "never.seen").has_value());
  CHECK_THROWS_AS(index.key(0), std::out_of_range);

  std::vector<FeatureKey> too_many;
  for (int i = 0; i < 1000; ++i) too_many.push_back({Dimension::domain, std::to_string(i)});
  CHECK_THROWS_AS(FeatureIndex{too_many}, DomainError);

  const auto imp = testing::random_impression(rng);
  const auto active = index.encode(imp);
  for (std::size_t i = 1; i < active.size(); ++i) CHECK(active[i - 1] < active[i]);
}

TEST_CASE("logit") {
  CHECK(logit(0.5) == 0.0);
  CHECK(logit(0.25) == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-15));
  const long double p = 1e-9L;
  const double oracle = static_cast<double>(std::log(p / (1.0L - p)));
  CHECK(logit(1e-9) == doctest::Approx(oracle).epsilon(1e-14));
  CHECK(logit(1e-9) == doctest::Approx(-20.723265836).epsilon(1e-9));
  CHECK_THROWS_AS(logit(0.0), DomainError);
  CHECK_THROWS_AS(logit(1.0), DomainError);
  CHECK_THROWS_AS(logit(-0.1), DomainError);
  CHECK_THROWS_AS(logit(std::nan("")), DomainError);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1e-9, 1.0 - 1e-9);
  for (int i = 0; i < 10000; ++i) {
    const double q = u(rng);
    CHECK(std::abs(inverse_logit(logit(q)) - q) <= 1e-12);
  }
}

TEST_CASE("linear predictor") {
  const auto m = hand_model();
  Impression imp;
  imp.domain = "foo.com";
  imp.hour = 17;
  imp.zip = "99999";
  CHECK(linear_predictor(m, imp) == doctest::Approx(-0.2).epsilon(1e-15));

  BinaryModel empty;
  empty.intercept = 1.25;
  CHECK(linear_predictor(empty, imp) == 1.25);

  SUBCASE("matches dense x'beta on random models") {
    std::mt19937_64 rng(5);
    testing::Vocab v;
    v.domains = 8;
    v.zips = 8;
    for (int rep = 0; rep < 5; ++rep) {
      const auto model = testing::random_model(rng, 50, v);
      for (int i = 0; i < 100; ++i) {
        const auto x = testing::random_impression(rng, v);
        CHECK(linear_predictor(model, x) ==
              doctest::Approx(static_cast<double>(dense_eta(model, x))).epsilon(1e-13));
      }
    }
  }

  SUBCASE("invariant to the insertion order of betas") {
    std::mt19937_64 rng(6);
    const auto model = testing::random_model(rng, 40);
    std::vector<std::pair<std::uint32_t, double>> entries(model.betas.rbegin(), model.betas.rend());
    BinaryModel shuffled = model;
    shuffled.betas.clear();
    std::shuffle(entries.begin(), entries.end(), rng);
    for (const auto& e : entries) shuffled.betas.insert(e);
    for (int i = 0; i < 200; ++i) {
      const auto x = testing::random_impression(rng);
      CHECK(linear_predictor(model, x) == linear_predictor(shuffled, x));
    }
  }
}

TEST_CASE("predict probability") {
  BinaryModel m;
  Impression imp;
  CHECK(predict_probability(m, imp) == 0.5);
  m.intercept = -2.1972245773362196;  // logit(0.1)
  CHECK(predict_probability(m, imp) == doctest::Approx(0.1).epsilon(1e-12));

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int i = 0; i < 1000; ++i) {
    double a = u(rng), b = u(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    CHECK(inverse_logit(a) < inverse_logit(b));
  }
}

TEST_CASE("log likelihood") {
  std::vector<double> zero(4, 0.0);
  std::vector<LabeledVector> rows;
  for (int i = 0; i < 7; ++i) rows.push_back({static_cast<std::uint32_t>(i % 2), 1, {1, 3}});
  CHECK(log_likelihood(zero, rows) == doctest::Approx(-7.0 * std::log(2.0)).epsilon(1e-15));

  std::vector<LabeledVector> one{{1, 1, {}}};
  CHECK(log_likelihood(std::vector<double>{0.0}, one) ==
        doctest::Approx(-0.6931471805599453).epsilon(1e-15));

  SUBCASE("term-by-term extended precision oracle") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> normal(0.0, 2.0);
    std::vector<double> beta(6);
    for (auto& b : beta) b = normal(rng);
    std::vector<LabeledVector> data;
    long double oracle = 0.0L;
    for (int i = 0; i < 20; ++i) {
      LabeledVector r;
      r.trials = 1 + static_cast<std::uint32_t>(rng() % 4);
      r.response = static_cast<std::uint32_t>(rng() % (r.trials + 1));
      for (std::uint32_t j = 1; j < 6; ++j) {
        if (rng() % 2) r.active.push_back(j);
      }
      long double eta = beta[0];
      for (auto j : r.active) eta += beta[j];
      oracle += r.response * eta - r.trials * std::log1p(std::exp(eta));
      data.push_back(r);
    }
    CHECK(log_likelihood(beta, data) == doctest::Approx(static_cast<double>(oracle)).epsilon(1e-13));
  }

  SUBCASE("duplicated data gives exactly twice the value") {
    std::mt19937_64 rng(22);
    std::normal_distribution<double> normal(0.0, 3.0);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> beta(9);
      for (auto& b : beta) b = normal(rng);
      std::vector<LabeledVector> data;
      for (int i = 0; i < 50; ++i) {
        LabeledVector r{static_cast<std::uint32_t>(rng() % 2), 1, {}};
        for (std::uint32_t j = 1; j < 9; ++j) {
          if (rng() % 3 == 0) r.active.push_back(j);
        }
        data.push_back(r);
      }
      auto doubled = data;
      doubled.insert(doubled.end(), data.begin(), data.end());
      CHECK(log_likelihood(beta, doubled) == 2.0 * log_likelihood(beta, data));
    }
  }

  SUBCASE("stable for extreme predictors") {
    std::vector<LabeledVector> r{{0, 1, {1}}, {1, 1, {}}};
    const std::vector<double> beta{-800.0, 1600.0};
    const double ll = log_likelihood(beta, r);
    CHECK(std::isfinite(ll));
    CHECK(ll == doctest::Approx(-800.0 - 800.0).epsilon(1e-12));
  }

  CHECK_THROWS_AS(log_likelihood(std::vector<double>{0.0, 0.0}, std::vector<LabeledVector>{{1, 1, {2}}}),
                  std::invalid_argument);
}

TEST_CASE("exact sum is order independent") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> xs;
  for (int i = 0; i < 500; ++i) xs.push_back(normal(rng) * std::pow(10.0, (i % 30) - 15));
  xs.push_back(1e100);
  xs.push_back(-1e100);
  ExactSum forward;
  for (double x : xs) forward += x;
  std::shuffle(xs.begin(), xs.end(), rng);
  ExactSum shuffled;
  for (double x : xs) shuffled += x;
  CHECK(forward.value() == shuffled.value());

  ExactSum tiny;
  tiny += 1.0;
  tiny += 1e-100;
  tiny += -1.0;
  CHECK(tiny.value() == 1e-100);
}

TEST_CASE("ex-ante intercept adjustment") {
  const auto m = hand_model();
  const auto same = adjust_intercept_ex_ante(m, 0.3, 0.3);
  CHECK(same.intercept == m.intercept);
  CHECK(same.threshold == m.threshold);
  CHECK(same.betas == m.betas);

  const auto adj = adjust_intercept_ex_ante(m, 1.0, 0.001);
  CHECK(adj.intercept == doctest::Approx(m.intercept - 6.907755278982137).epsilon(1e-15));
  CHECK(adj.betas == m.betas);
  CHECK(adj.sampling_ratio == doctest::Approx(1000.0));

  CHECK_THROWS_AS(adjust_intercept_ex_ante(m, 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(adjust_intercept_ex_ante(m, 1.0, -1.0), DomainError);

  SUBCASE("every log-odds shifts by the same constant and decisions are unchanged") {
    std::mt19937_64 rng(8);
    const auto model = testing::random_model(rng, 60);
    const auto shifted = adjust_intercept_ex_ante(model, 0.8, 0.01);
    const double shift = shifted.intercept - model.intercept;
    for (int i = 0; i < 500; ++i) {
      const auto x = testing::random_impression(rng);
      const double a = linear_predictor(model, x);
      const double b = linear_predictor(shifted, x);
      CHECK(b - a == doctest::Approx(shift).epsilon(1e-12));
      CHECK(accepts(model, a) == accepts(shifted, b));
    }
  }
}

TEST_CASE("decision invariant to a common shift of intercept and threshold") {
  std::mt19937_64 rng(10);
  const auto model = testing::random_model(rng, 30);
  for (double c : {-3.5, 0.25, 4.0}) {
    BinaryModel moved = model;
    moved.intercept += c;
    moved.threshold += c;
    for (int i = 0; i < 300; ++i) {
      const auto x = testing::random_impression(rng);
      // Compare in exact arithmetic: eta - threshold is shift invariant up to
      // rounding, so only inspect impressions away from the boundary.
      const double margin = linear_predictor(model, x) - model.threshold;
      if (std::abs(margin) < 1e-9) continue;
      CHECK(accepts(model, linear_predictor(model, x)) ==
            accepts(moved, linear_predictor(moved, x)));
    }
  }
}

TEST_CASE("model json is byte-stable and round-trips") {
  std::mt19937_64 rng(12);
  auto model = testing::random_model(rng, 40);
  model.auc = 0.73;
  const std::string text = dump_model(model);
  const auto back = model_from_json(nlohmann::json::parse(text));
  CHECK(dump_model(back) == text);
  CHECK(back.intercept == model.intercept);
  for (int i = 0; i < 200; ++i) {
    const auto x = testing::random_impression(rng);
    CHECK(linear_predictor(back, x) == linear_predictor(model, x));
  }

  auto doc = nlohmann::json::parse(text);
  const auto& betas = doc.at("betas");
  for (std::size_t i = 1; i < betas.size(); ++i) {
    const auto a = *parse_dimension(betas[i - 1]["dimension"].get<std::string>());
    const auto b = *parse_dimension(betas[i]["dimension"].get<std::string>());
    CHECK(std::pair{a, betas[i - 1]["level"].get<std::string>()} <
          std::pair{b, betas[i]["level"].get<std::string>()});
  }

  doc["auc"] = 1.5;
  CHECK_THROWS_AS(model_from_json(doc), InvalidModel);
  CHECK_THROWS_AS(model_from_json(nlohmann::json::object()), InvalidModel);

  BinaryModel bad = model;
  bad.betas[9999] = 1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidModel);
  bad = model;
  bad.threshold = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(bad.validate(), InvalidModel);

  // Infinite thresholds switch a model off or on and survive a round trip.
  for (double t : {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()}) {
    BinaryModel off = model;
    off.threshold = t;
    off.validate();
    CHECK(model_from_json(nlohmann::json::parse(dump_model(off))).threshold == t);
  }
}
