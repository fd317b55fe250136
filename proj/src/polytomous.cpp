#include "adresp/polytomous.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <set>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "adresp/errors.hpp"

namespace adresp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

nlohmann::json ratio(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json totals_json(const ConfusionTotals& c) {
  const auto m = Metrics::from(c);
  return {{"tp", c.tp},
          {"fp", c.fp},
          {"tn", c.tn},
          {"fn", c.fn},
          {"precision", ratio(m.precision)},
          {"recall", ratio(m.recall)},
          {"accuracy", ratio(m.accuracy)},
          {"negative_rate", ratio(m.negative_rate)}};
}

std::optional<double> div(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

// Adds one click's outcome to per-campaign counts; credited[j] marks the
// models given a positive decision.
void tally(std::vector<ConfusionTotals>& counts, std::size_t truth,
           const std::vector<std::size_t>& credited) {
  // Start from "tn everywhere", then fix up the few campaigns involved.
  for (auto& c : counts) ++c.tn;
  bool truth_credited = false;
  for (auto j : credited) {
    --counts[j].tn;
    if (j == truth) {
      ++counts[j].tp;
      truth_credited = true;
    } else {
      ++counts[j].fp;
    }
  }
  if (!truth_credited) {
    --counts[truth].tn;
    ++counts[truth].fn;
  }
}

}  // namespace

std::string_view policy_name(Policy p) noexcept { return p == Policy::set ? "set" : "top"; }

Policy parse_policy(std::string_view name) {
  if (name == "top") return Policy::top;
  if (name == "set") return Policy::set;
  throw std::invalid_argument("unknown policy " + std::string(name));
}

std::string_view credit_name(Credit c) noexcept {
  return c == Credit::all_acceptors ? "all_acceptors" : "chosen";
}

Credit parse_credit(std::string_view name) {
  if (name == "chosen") return Credit::chosen;
  if (name == "all_acceptors") return Credit::all_acceptors;
  throw std::invalid_argument("unknown credit mode " + std::string(name));
}

std::size_t set_draw(std::uint64_t seed, std::uint64_t ordinal, std::size_t n) noexcept {
  if (n == 0) return 0;
  return static_cast<std::size_t>(splitmix64(seed ^ splitmix64(ordinal)) % n);
}

PolytomousModel::PolytomousModel(std::vector<BinaryModel> models, Policy policy, std::uint64_t seed,
                                 std::map<std::string, double> weights)
    : policy_(policy), seed_(seed) {
  std::sort(models.begin(), models.end(),
            [](const BinaryModel& a, const BinaryModel& b) { return a.campaign < b.campaign; });
  for (std::size_t i = 1; i < models.size(); ++i) {
    if (models[i].campaign == models[i - 1].campaign) {
      throw std::invalid_argument("duplicate campaign " + models[i].campaign);
    }
  }
  for (const auto& [campaign, w] : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("weight of " + campaign + " must be >= 0");
  }
  auto state = std::make_shared<State>();
  state->compiled = CompiledEnsemble(models);
  state->models = std::move(models);
  state->weights.insert(weights.begin(), weights.end());
  state_ = std::move(state);
}

std::optional<std::size_t> PolytomousModel::index_of(std::string_view campaign) const noexcept {
  const auto& m = state_->models;
  auto it = std::lower_bound(m.begin(), m.end(), campaign,
                             [](const BinaryModel& a, std::string_view c) { return a.campaign < c; });
  if (it == m.end() || it->campaign != campaign) return std::nullopt;
  return static_cast<std::size_t>(it - m.begin());
}

double PolytomousModel::weight(std::string_view campaign) const noexcept {
  auto it = state_->weights.find(campaign);
  return it == state_->weights.end() ? 1.0 : it->second;
}

PolytomousModel PolytomousModel::with_policy(Policy policy, std::uint64_t seed) const {
  return PolytomousModel(state_, policy, seed);
}

PolytomousModel PolytomousModel::without(std::string_view campaign) const {
  std::vector<BinaryModel> rest;
  for (const auto& m : state_->models) {
    if (m.campaign != campaign) rest.push_back(m);
  }
  std::map<std::string, double> weights(state_->weights.begin(), state_->weights.end());
  return PolytomousModel(std::move(rest), policy_, seed_, std::move(weights));
}

std::optional<std::size_t> PolytomousModel::assign_indices(const EncodedImpression& imp,
                                                           std::uint64_t ordinal,
                                                           std::vector<std::size_t>& accepted) const {
  accepted.clear();
  const auto& compiled = state_->compiled;
  std::optional<std::size_t> best;
  double best_margin = 0.0;
  for (std::size_t j = 0; j < compiled.size(); ++j) {
    const double eta = compiled[j].eta(imp);
    if (!(eta > compiled[j].threshold())) continue;
    accepted.push_back(j);
    const double margin = eta - compiled[j].threshold();
    if (!best || margin > best_margin) {
      best = j;
      best_margin = margin;
    }
  }
  if (accepted.empty()) return std::nullopt;
  if (policy_ == Policy::set) return accepted[set_draw(seed_, ordinal, accepted.size())];
  return best;
}

Assignment assign(const PolytomousModel& ensemble, const Impression& imp, std::uint64_t ordinal) {
  std::vector<std::size_t> accepted;
  const auto chosen = ensemble.assign_indices(ensemble.compiled().encode(imp), ordinal, accepted);
  Assignment a;
  for (auto j : accepted) a.accepted_by.push_back(ensemble.models()[j].campaign);
  if (chosen) a.chosen = ensemble.models()[*chosen].campaign;
  return a;
}

CoverageReport coverage(const PolytomousModel& ensemble, std::span<const Impression> pool,
                        unsigned threads) {
  if (pool.empty()) throw EmptyPool("coverage needs at least one impression");
  const auto& compiled = ensemble.compiled();
  const std::size_t m = compiled.size();
  threads = std::max(1u, threads);

  struct Partial {
    std::size_t rejected_by_all = 0;
    std::vector<std::size_t> rejected;
  };
  std::vector<Partial> parts(threads, Partial{0, std::vector<std::size_t>(m, 0)});
  const auto run = [&](unsigned t) {
    auto& p = parts[t];
    const std::size_t lo = pool.size() * t / threads, hi = pool.size() * (t + 1) / threads;
    for (std::size_t i = lo; i < hi; ++i) {
      const auto imp = compiled.encode(pool[i]);
      bool any = false;
      for (std::size_t j = 0; j < m; ++j) {
        if (compiled[j].accepts(imp)) {
          any = true;
        } else {
          ++p.rejected[j];
        }
      }
      p.rejected_by_all += !any;
    }
  };
  if (threads == 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool_threads;
    for (unsigned t = 0; t < threads; ++t) pool_threads.emplace_back(run, t);
  }

  CoverageReport r;
  r.impressions = pool.size();
  r.rejected_by_model.assign(m, 0);
  for (const auto& p : parts) {
    r.rejected_by_all += p.rejected_by_all;
    for (std::size_t j = 0; j < m; ++j) r.rejected_by_model[j] += p.rejected[j];
  }
  r.fraction = static_cast<double>(r.rejected_by_all) / static_cast<double>(r.impressions);
  for (const auto& model : ensemble.models()) r.campaigns.push_back(model.campaign);
  return r;
}

nlohmann::json CoverageReport::to_json() const {
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t j = 0; j < campaigns.size(); ++j) {
    per.push_back({{"campaign", campaigns[j]},
                   {"rejected", rejected_by_model[j]},
                   {"rejection_fraction", model_rejection(j)}});
  }
  return {{"impressions", impressions},
          {"rejected_by_all", rejected_by_all},
          {"fraction", fraction},
          {"models", per}};
}

ConfusionTotals& ConfusionTotals::operator+=(const ConfusionTotals& o) noexcept {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

Metrics Metrics::from(const ConfusionTotals& c) noexcept {
  return {div(c.tp, c.tp + c.fp), div(c.tp, c.tp + c.fn), div(c.tp + c.tn, c.total()),
          div(c.tn, c.tn + c.fn)};
}

namespace {

// Evaluates clicks [lo, hi) of the pool and adds into counts.
std::size_t evaluate_range(const PolytomousModel& ensemble, const ClickPool& pool, std::size_t lo,
                           std::size_t hi, Credit credit, std::vector<ConfusionTotals>& counts,
                           std::map<std::string, std::size_t>* skipped) {
  std::vector<std::size_t> accepted, credited;
  std::size_t evaluated = 0;
  for (std::size_t i = lo; i < hi; ++i) {
    const auto& click = pool.clicks[i];
    const auto truth = ensemble.index_of(click.campaign);
    if (!truth) {
      if (skipped) ++(*skipped)[click.campaign];
      continue;
    }
    const auto chosen = ensemble.assign_indices(ensemble.compiled().encode(click), i, accepted);
    if (credit == Credit::all_acceptors) {
      credited = accepted;
    } else {
      credited.clear();
      if (chosen) credited.push_back(*chosen);
    }
    tally(counts, *truth, credited);
    ++evaluated;
  }
  return evaluated;
}

}  // namespace

MetricsReport evaluate(const PolytomousModel& ensemble, const ClickPool& clicks, Credit credit) {
  if (ensemble.size() == 0) throw EmptyPool("ensemble has no models");
  MetricsReport r;
  r.policy = ensemble.policy();
  r.credit = credit;
  r.per_campaign.assign(ensemble.size(), {});
  r.impressions = evaluate_range(ensemble, clicks, 0, clicks.clicks.size(), credit, r.per_campaign,
                                 &r.skipped_campaigns);
  r.skipped_clicks = clicks.clicks.size() - r.impressions;
  if (r.impressions == 0) throw EmptyPool("no click belongs to a modelled campaign");
  for (const auto& m : ensemble.models()) {
    r.campaigns.push_back(m.campaign);
    r.weights.push_back(ensemble.weight(m.campaign));
  }
  for (const auto& c : r.per_campaign) r.totals += c;
  return r;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t j = 0; j < campaigns.size(); ++j) {
    auto entry = totals_json(per_campaign[j]);
    entry["campaign"] = campaigns[j];
    entry["weight"] = weights[j];
    per.push_back(std::move(entry));
  }
  return {{"policy", policy_name(policy)},
          {"credit", credit_name(credit)},
          {"impressions", impressions},
          {"skipped_clicks", skipped_clicks},
          {"skipped_campaigns", skipped_campaigns},
          {"total", totals_json(totals)},
          {"campaigns", per}};
}

std::vector<SeriesPoint> evaluate_series(const PolytomousModel& ensemble, const ClickPool& clicks,
                                         std::int64_t bucket_seconds, Credit credit) {
  if (bucket_seconds <= 0) throw std::invalid_argument("bucket width must be positive");
  if (clicks.clicks.empty()) throw EmptyPool("no clicks");
  std::int64_t t0 = clicks.clicks.front().timestamp;
  for (const auto& c : clicks.clicks) t0 = std::min(t0, c.timestamp);

  std::map<std::int64_t, std::vector<ConfusionTotals>> buckets;
  std::vector<std::size_t> accepted, credited;
  for (std::size_t i = 0; i < clicks.clicks.size(); ++i) {
    const auto& click = clicks.clicks[i];
    const auto truth = ensemble.index_of(click.campaign);
    if (!truth) continue;
    const auto chosen = ensemble.assign_indices(ensemble.compiled().encode(click), i, accepted);
    if (credit == Credit::all_acceptors) {
      credited = accepted;
    } else {
      credited.clear();
      if (chosen) credited.push_back(*chosen);
    }
    auto& counts = buckets[(click.timestamp - t0) / bucket_seconds];
    if (counts.empty()) counts.assign(ensemble.size(), {});
    tally(counts, *truth, credited);
  }
  std::vector<SeriesPoint> out;
  for (const auto& [b, counts] : buckets) {
    SeriesPoint p;
    p.t_begin = t0 + b * bucket_seconds;
    p.t_end = p.t_begin + bucket_seconds;
    for (const auto& c : counts) p.totals += c;
    out.push_back(p);
  }
  return out;
}

void write_series_csv(std::span<const SeriesPoint> series, std::ostream& out) {
  const auto cell = [&](const std::optional<double>& v) {
    if (!v) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    return std::string(buf);
  };
  out << "t_begin,t_end,impressions,precision,recall,accuracy,negative_rate\n";
  for (const auto& p : series) {
    const auto m = Metrics::from(p.totals);
    // Every click adds one count per campaign; tp + fn is the click count.
    out << p.t_begin << ',' << p.t_end << ',' << (p.totals.tp + p.totals.fn) << ','
        << cell(m.precision) << ',' << cell(m.recall) << ',' << cell(m.accuracy) << ','
        << cell(m.negative_rate) << '\n';
  }
}

}  // namespace adresp
