#include "adresp/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "adresp/errors.hpp"
#include "adresp/log.hpp"

namespace adresp {

namespace {

using nlohmann::json;

// Walks one JSON object, remembering which keys were read so that anything
// left over can be reported as unknown.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(where() + " must be an object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  template <class T>
  std::optional<T> read(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw ConfigError(name(key) + " must be a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer()) throw ConfigError(name(key) + " must be an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v->get<long long>() < 0) throw ConfigError(name(key) + " must be >= 0");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw ConfigError(name(key) + " must be a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw ConfigError(name(key) + " must be a string");
      }
      return v->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name(key) + ": " + e.what());
    }
  }

  Section child(const std::string& key) {
    const json* v = get(key);
    static const json empty = json::object();
    return Section(v ? *v : empty, name(key));
  }

  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.contains(key)) throw ConfigError("unknown key " + name(key));
    }
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

SamplingRates read_rates(Section& s, SamplingRates fallback) {
  SamplingRates r = fallback;
  if (auto v = s.read<double>("tau_pos")) r.tau_pos = *v;
  if (auto v = s.read<double>("tau_neg")) r.tau_neg = *v;
  require(r.tau_pos > 0 && r.tau_pos <= 1, s.name("tau_pos") + " must be in (0, 1]");
  require(r.tau_neg > 0 && r.tau_neg <= 1, s.name("tau_neg") + " must be in (0, 1]");
  return r;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t campaign_seed(std::uint64_t seed, const std::string& campaign) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : campaign) h = (h ^ c) * 0x100000001b3ULL;
  return mix(seed ^ h);
}

}  // namespace

SamplingRates PipelineConfig::rates_for(const std::string& campaign) const {
  auto it = sampling_per_campaign.find(campaign);
  return it == sampling_per_campaign.end() ? sampling : it->second;
}

PipelineConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  Section root(doc, "");
  const auto resolve = [&](const std::filesystem::path& p) {
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };

  if (const json* in = root.get("input")) {
    if (in->is_string()) {
      c.inputs.push_back(resolve(in->get<std::string>()));
    } else if (in->is_array()) {
      for (const auto& p : *in) {
        require(p.is_string(), "input entries must be strings");
        c.inputs.push_back(resolve(p.get<std::string>()));
      }
    } else {
      throw ConfigError("input must be a string or a list of strings");
    }
  }
  if (auto f = root.read<std::string>("format")) {
    require(*f == "jsonl" || *f == "csv", "format must be jsonl or csv");
    c.format = *f == "csv" ? RecordFormat::csv : RecordFormat::jsonl;
  }
  if (root.get("window")) {
    auto w = root.child("window");
    auto b = w.read<std::int64_t>("begin"), e = w.read<std::int64_t>("end");
    require(b && e, "window needs begin and end");
    require(*b <= *e, "window.begin must not exceed window.end");
    c.window = TimeWindow{*b, *e};
    w.finish();
  }
  if (const json* cs = root.get("campaigns")) {
    require(cs->is_array(), "campaigns must be a list");
    for (const auto& v : *cs) {
      require(v.is_string(), "campaigns entries must be strings");
      c.campaigns.push_back(v.get<std::string>());
    }
  }

  {
    auto s = root.child("split");
    if (auto m = s.read<std::string>("method")) {
      require(*m == "random" || *m == "time", "split.method must be random or time");
      c.split_method = *m == "time" ? SplitMethod::time : SplitMethod::random;
    }
    if (auto v = s.read<double>("ratio")) c.split_ratio = *v;
    if (auto v = s.read<double>("fraction")) c.split_fraction = *v;
    if (auto v = s.read<std::uint64_t>("seed")) c.split_seed = *v;
    require(c.split_ratio > 0 && std::isfinite(c.split_ratio), "split.ratio must be > 0");
    require(c.split_fraction > 0 && c.split_fraction < 1, "split.fraction must be in (0, 1)");
    s.finish();
  }
  {
    auto f = root.child("fit");
    auto& fc = c.explore.fit;
    if (auto v = f.read<int>("max_iterations")) fc.max_iterations = *v;
    if (auto v = f.read<double>("tolerance")) fc.tolerance = *v;
    if (auto v = f.read<double>("ridge")) fc.ridge = *v;
    if (auto v = f.read<double>("separation_eta_bound")) fc.separation_eta_bound = *v;
    if (auto v = f.read<int>("max_halvings")) fc.max_halvings = *v;
    if (auto v = f.read<bool>("reuse_factorization")) fc.reuse_factorization = *v;
    f.finish();
    try {
      fc.validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("fit: ") + e.what());
    }
  }
  if (const json* k = root.get("k_ladder")) {
    require(k->is_array() && !k->empty(), "k_ladder must be a non-empty list");
    c.explore.k_values.clear();
    for (const auto& v : *k) {
      require(v.is_number_integer() && v.get<int>() >= 1, "k_ladder entries must be integers >= 1");
      c.explore.k_values.push_back(v.get<int>());
    }
  }
  if (auto v = root.read<std::size_t>("feature_cap")) {
    require(*v >= 1 && *v <= FeatureIndex::kMaxFeatures, "feature_cap must be in [1, 999]");
    c.explore.feature_cap = *v;
  }
  if (auto v = root.read<unsigned>("explore_threads")) c.explore.threads = std::max(1u, *v);
  {
    auto s = root.child("sampling");
    c.sampling = read_rates(s, {});
    if (auto v = s.read<std::uint64_t>("seed")) c.sampling_seed = *v;
    if (s.get("per_campaign")) {
      auto per = s.child("per_campaign");
      const json* raw = s.get("per_campaign");
      for (const auto& [campaign, value] : raw->items()) {
        auto entry = per.child(campaign);
        c.sampling_per_campaign[campaign] = read_rates(entry, c.sampling);
        entry.finish();
      }
      per.finish();
    }
    s.finish();
  }
  if (auto v = root.read<std::string>("policy")) {
    try {
      c.policy = parse_policy(*v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("policy: ") + e.what());
    }
  }
  if (auto v = root.read<std::uint64_t>("policy_seed")) c.policy_seed = *v;
  if (auto v = root.read<std::string>("credit")) {
    try {
      c.credit = parse_credit(*v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("credit: ") + e.what());
    }
  }
  if (auto v = root.read<std::string>("output_dir")) c.output_dir = resolve(*v);
  if (auto v = root.read<unsigned>("threads")) c.threads = std::max(1u, *v);
  root.finish();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  return parse_config(doc, file.parent_path());
}

json config_to_json(const PipelineConfig& c) {
  json inputs = json::array();
  for (const auto& p : c.inputs) inputs.push_back(p.string());
  json per = json::object();
  for (const auto& [campaign, r] : c.sampling_per_campaign) {
    per[campaign] = {{"tau_pos", r.tau_pos}, {"tau_neg", r.tau_neg}};
  }
  json doc = {
      {"input", inputs},
      {"campaigns", c.campaigns},
      {"split",
       {{"method", c.split_method == SplitMethod::time ? "time" : "random"},
        {"ratio", c.split_ratio},
        {"fraction", c.split_fraction},
        {"seed", c.split_seed}}},
      {"fit",
       {{"max_iterations", c.explore.fit.max_iterations},
        {"tolerance", c.explore.fit.tolerance},
        {"ridge", c.explore.fit.ridge},
        {"separation_eta_bound", c.explore.fit.separation_eta_bound},
        {"max_halvings", c.explore.fit.max_halvings},
        {"reuse_factorization", c.explore.fit.reuse_factorization}}},
      {"k_ladder", c.explore.k_values},
      {"feature_cap", c.explore.feature_cap},
      {"explore_threads", c.explore.threads},
      {"sampling",
       {{"tau_pos", c.sampling.tau_pos},
        {"tau_neg", c.sampling.tau_neg},
        {"seed", c.sampling_seed},
        {"per_campaign", per}}},
      {"policy", policy_name(c.policy)},
      {"policy_seed", c.policy_seed},
      {"credit", credit_name(c.credit)},
      {"output_dir", c.output_dir.string()},
      {"threads", c.threads}};
  if (c.format) doc["format"] = *c.format == RecordFormat::csv ? "csv" : "jsonl";
  if (c.window) doc["window"] = {{"begin", c.window->begin}, {"end", c.window->end}};
  return doc;
}

LabeledSet subsample(const LabeledSet& set, SamplingRates rates, std::uint64_t seed) {
  if (rates.tau_pos >= 1.0 && rates.tau_neg >= 1.0) return set;
  std::mt19937_64 rng(campaign_seed(seed, set.campaign));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LabeledSet out;
  out.campaign = set.campaign;
  for (const auto& row : set.rows) {
    if (u(rng) < (row.positive ? rates.tau_pos : rates.tau_neg)) out.rows.push_back(row);
  }
  return out;
}

TrainOutcome train_campaign(const ClickPool& pool, const std::string& campaign,
                            const PipelineConfig& config) {
  TrainOutcome out;
  out.campaign = campaign;
  const auto set = build_labeled_set(pool, campaign, config.window);
  auto split = config.split_method == SplitMethod::time
                   ? split_time(set, config.split_fraction)
                   : split_random(set, config.split_ratio, config.split_seed);
  const auto rates = config.rates_for(campaign);
  split.training = subsample(split.training, rates, config.sampling_seed);
  if (split.training.positives() == 0 || split.training.negatives() == 0) {
    throw TooSmall("subsampled training side of " + campaign + " misses a label");
  }
  out.training_rows = split.training.rows.size();
  out.calibration_rows = split.calibration.rows.size();

  auto report = explore(split, config.explore);
  out.model = adjust_intercept_ex_ante(report.model, rates.tau_pos, rates.tau_neg);
  out.report = std::move(report);
  return out;
}

std::vector<TrainOutcome> train_all(const ClickPool& pool, const PipelineConfig& config) {
  std::vector<std::string> campaigns = config.campaigns;
  if (campaigns.empty()) campaigns.assign(pool.campaigns.begin(), pool.campaigns.end());
  std::sort(campaigns.begin(), campaigns.end());
  campaigns.erase(std::unique(campaigns.begin(), campaigns.end()), campaigns.end());

  std::vector<TrainOutcome> outcomes(campaigns.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < campaigns.size();) {
      try {
        outcomes[i] = train_campaign(pool, campaigns[i], config);
        if (log::enabled()) {
          log::emit("campaign_trained", {{"campaign", campaigns[i]},
                                         {"auc", outcomes[i].model->auc},
                                         {"features", outcomes[i].model->n_features()}});
        }
      } catch (const std::exception& e) {
        outcomes[i] = TrainOutcome{};
        outcomes[i].campaign = campaigns[i];
        outcomes[i].error = e.what();
        if (log::enabled()) {
          log::emit("campaign_failed", {{"campaign", campaigns[i]}, {"error", e.what()}});
        }
      }
    }
  };
  const unsigned n = std::clamp<unsigned>(config.threads, 1, std::max<std::size_t>(1, campaigns.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool_threads;
    for (unsigned t = 0; t < n; ++t) pool_threads.emplace_back(worker);
  }
  return outcomes;
}

}  // namespace adresp
