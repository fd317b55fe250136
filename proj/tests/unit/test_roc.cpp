#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "adresp/errors.hpp"
#include "adresp/logistic.hpp"
#include "adresp/roc.hpp"
#include "doctest.h"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace adresp;
using adresp::testing::pairwise_auc;

namespace {

// Exhaustive Youden search: try every distinct score (and +inf) as a cut.
std::pair<double, double> brute_youden(const std::vector<double>& pos, const std::vector<double>& neg) {
  std::vector<double> cuts{std::numeric_limits<double>::infinity()};
  cuts.insert(cuts.end(), pos.begin(), pos.end());
  cuts.insert(cuts.end(), neg.begin(), neg.end());
  double best = -2, best_fp = 2;
  for (double c : cuts) {
    double tp = 0, fp = 0;
    for (double s : pos) tp += s >= c;
    for (double s : neg) fp += s >= c;
    tp /= static_cast<double>(pos.size());
    fp /= static_cast<double>(neg.size());
    if (tp - fp > best + 1e-15 || (std::abs(tp - fp - best) <= 1e-15 && fp < best_fp)) {
      best = tp - fp;
      best_fp = fp;
    }
  }
  return {best, best_fp};
}

std::vector<double> draw(std::mt19937_64& rng, std::size_t n, double shift, int levels) {
  std::vector<double> out;
  std::normal_distribution<double> g(shift, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double v = g(rng);
    if (levels > 0) v = std::round(v * levels) / levels;  // force ties
    out.push_back(v);
  }
  return out;
}

}  // namespace

TEST_CASE("four-score example") {
  const std::vector<double> pos{0.9, 0.7}, neg{0.8, 0.3};
  const auto c = roc_from_scores(pos, neg);
  CHECK(c.auc == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(c.area_above_diagonal == doctest::Approx(0.25));
  CHECK(c.points.size() == 5);
  CHECK(c.points.front().fp_rate == 0.0);
  CHECK(c.points.back().tp_rate == 1.0);
  CHECK(c.points.back().fp_rate == 1.0);

  // Cuts 0.9 (tp 0.5, fp 0) and 0.7 (tp 1, fp 0.5) both reach J = 0.5; the
  // tie goes to the smaller fp_rate.
  CHECK(c.points[3].cut == 0.7);
  CHECK(c.points[3].tp_rate - c.points[3].fp_rate == 0.5);
  const auto t = select_threshold(c);
  CHECK(t.youden == doctest::Approx(0.5));
  CHECK(t.cut == 0.9);
  CHECK(t.tp_rate == 0.5);
  CHECK(t.fp_rate == 0.0);
}

TEST_CASE("separated and constant scores") {
  const std::vector<double> pos{3, 4, 5}, neg{0, 1, 2};
  CHECK(roc_from_scores(pos, neg).auc == 1.0);
  const auto t = select_threshold(roc_from_scores(pos, neg));
  CHECK(t.youden == 1.0);
  CHECK(t.cut == 3.0);

  const std::vector<double> same_p{1, 1}, same_n{1, 1, 1};
  const auto flat = roc_from_scores(same_p, same_n);
  CHECK(flat.auc == 0.5);
  CHECK(flat.points.size() == 2);  // anchor plus one collapsed point
  const auto ft = select_threshold(flat);
  CHECK(ft.youden == 0.0);
  CHECK(ft.fp_rate == 0.0);
}

TEST_CASE("chance diagonal breaks the tie toward fp = 0") {
  const std::vector<double> pos{1, 2, 3, 4}, neg{1, 2, 3, 4};
  const auto t = select_threshold(roc_from_scores(pos, neg));
  CHECK(t.youden == 0.0);
  CHECK(t.fp_rate == 0.0);
  CHECK(std::isinf(t.cut));
  CHECK(threshold_for_cut(t.cut) == std::numeric_limits<double>::max());
}

TEST_CASE("single-class input is degenerate") {
  const std::vector<double> some{1.0}, none;
  CHECK_THROWS_AS(roc_from_scores(some, none), DegenerateCalibration);
  CHECK_THROWS_AS(roc_from_scores(none, some), DegenerateCalibration);
}

TEST_CASE("trapezoid area equals the pairwise statistic") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t np = 1 + rng() % 100, nn = 1 + rng() % 100;
    const int levels = static_cast<int>(rng() % 4);  // 0 = continuous
    const auto pos = draw(rng, np, 0.7, levels);
    const auto neg = draw(rng, nn, 0.0, levels);
    const auto c = roc_from_scores(pos, neg);
    CHECK(std::abs(c.auc - pairwise_auc(pos, neg)) <= 1e-12);
    for (std::size_t k = 1; k < c.points.size(); ++k) {
      CHECK(c.points[k].cut < c.points[k - 1].cut);
      CHECK(c.points[k].fp_rate >= c.points[k - 1].fp_rate);
      CHECK(c.points[k].tp_rate >= c.points[k - 1].tp_rate);
    }
    const auto [youden, fp] = brute_youden(pos, neg);
    const auto t = select_threshold(c);
    CHECK(t.youden == doctest::Approx(youden).epsilon(1e-12));
    CHECK(t.fp_rate == doctest::Approx(fp).epsilon(1e-12));
  }
}

TEST_CASE("strictly increasing transforms leave AUC and the chosen row unchanged") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto pos = draw(rng, 50, 0.5, static_cast<int>(rng() % 3));
    const auto neg = draw(rng, 70, 0.0, static_cast<int>(rng() % 3));
    std::vector<double> tpos, tneg;
    const auto f = [](double x) { return adresp::inverse_logit(x); };
    for (double x : pos) tpos.push_back(f(x));
    for (double x : neg) tneg.push_back(f(x));
    const auto a = roc_from_scores(pos, neg);
    const auto b = roc_from_scores(tpos, tneg);
    CHECK(a.auc == b.auc);
    const auto ta = select_threshold(a), tb = select_threshold(b);
    CHECK(ta.tp_rate == tb.tp_rate);
    CHECK(ta.fp_rate == tb.fp_rate);
    if (std::isfinite(ta.cut)) CHECK(tb.cut == f(ta.cut)); else CHECK(std::isinf(tb.cut));
  }
}

TEST_CASE("threshold_for_cut accepts exactly the rows at or above the cut") {
  for (double cut : {-3.5, 0.0, 1e-300, 2.0, 1e12}) {
    const double thr = threshold_for_cut(cut);
    CHECK(cut > thr);
    CHECK_FALSE(std::nextafter(cut, -INFINITY) > thr);
  }
}

TEST_CASE("roc on a model and compare") {
  std::vector<Impression> clicks;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 400; ++i) {
    auto imp = adresp::testing::random_impression(rng);
    imp.campaign = imp.hour < 8 ? (rng() % 4 ? "A" : "B") : (rng() % 4 ? "B" : "A");
    clicks.push_back(imp);
  }
  const auto set = build_labeled_set(ClickPool::from_clicks(clicks), "A");

  auto index = std::make_shared<FeatureIndex>(std::vector<FeatureKey>{
      {Dimension::hour, "0"}, {Dimension::hour, "1"}, {Dimension::hour, "2"}, {Dimension::hour, "3"},
      {Dimension::hour, "4"}, {Dimension::hour, "5"}, {Dimension::hour, "6"}, {Dimension::hour, "7"}});
  BinaryModel good;
  good.feature_index = index;
  for (std::uint32_t j = 1; j <= 8; ++j) good.betas[j] = 1.0;
  BinaryModel blind;
  blind.feature_index = index;

  CHECK(roc(good, set).auc > 0.6);
  CHECK(roc(blind, set).auc == 0.5);
  CHECK(compare(good, blind, set) == Preference::first);
  CHECK(compare(blind, good, set) == Preference::second);
  CHECK(compare(good, good, set) == Preference::equal);

  CHECK(compare(ModelRanking{0.8, 50, "b"}, ModelRanking{0.6, 1, "a"}) == Preference::first);
  CHECK(compare(ModelRanking{0.7, 10, "z"}, ModelRanking{0.7, 20, "a"}) == Preference::first);
  CHECK(compare(ModelRanking{0.7, 10, "b"}, ModelRanking{0.7, 10, "a"}) == Preference::second);
}

TEST_CASE("compare is transitive") {
  std::mt19937_64 rng(9);
  auto random_rank = [&] {
    return ModelRanking{static_cast<double>(rng() % 4) / 4.0, rng() % 3,
                        std::string(1, static_cast<char>('a' + rng() % 3))};
  };
  for (int trial = 0; trial < 5000; ++trial) {
    const auto a = random_rank(), b = random_rank(), c = random_rank();
    const auto ab = compare(a, b), bc = compare(b, c), ac = compare(a, c);
    if (ab == Preference::first && bc == Preference::first) CHECK(ac == Preference::first);
    if (ab == Preference::second && bc == Preference::second) CHECK(ac == Preference::second);
    if (ab == Preference::equal && bc == Preference::equal) CHECK(ac == Preference::equal);
    CHECK((compare(b, a) == Preference::first) == (ab == Preference::second));
  }
}

TEST_CASE("curve export") {
  const std::vector<double> pos{0.9, 0.7}, neg{0.8, 0.3};
  const auto c = roc_from_scores(pos, neg);
  std::ostringstream csv;
  write_curve_csv(c, csv);
  CHECK(csv.str().rfind("cut,fp_rate,tp_rate\ninf,0,0\n0.90000000000000002,0,0.5\n", 0) == 0);
  const auto j = curve_to_json(c);
  CHECK(j["points"][0]["cut"].is_null());
  CHECK(j["points"].size() == 5);
  const auto t = threshold_to_json(select_threshold(c));
  CHECK(t["cut"] == 0.9);
  CHECK(t["threshold"].get<double>() < 0.9);
}
