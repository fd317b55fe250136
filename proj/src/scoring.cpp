#include "adresp/scoring.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "adresp/errors.hpp"

namespace adresp {

namespace {

std::size_t string_slot(Dimension d) noexcept {
  switch (d) {
    case Dimension::exchange: return 0;
    case Dimension::ad_format: return 1;
    case Dimension::ad_size: return 2;
    case Dimension::domain: return 3;
    case Dimension::zip: return 4;
    default: return 0;
  }
}

bool is_string_dimension(Dimension d) noexcept {
  return d != Dimension::hour && d != Dimension::day;
}

std::optional<int> small_int(std::string_view s, int upper) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || v < 0 || v >= upper) return std::nullopt;
  // "07" and "7" must not both map to hour 7: only the canonical rendering
  // matches an impression.
  if (std::to_string(v) != s) return std::nullopt;
  return v;
}

}  // namespace

std::size_t Vocabulary::slot(Dimension d) noexcept { return string_slot(d); }
std::size_t CompiledModel::slot(Dimension d) noexcept { return string_slot(d); }

std::uint32_t Vocabulary::intern(Dimension d, std::string_view level) {
  if (!is_string_dimension(d)) throw std::invalid_argument("hour and day are not interned");
  auto& ids = ids_[slot(d)];
  auto [it, inserted] = ids.try_emplace(std::string(level), static_cast<std::uint32_t>(ids.size()));
  if (inserted && it->second == kUnknown) throw std::length_error("vocabulary full");
  return it->second;
}

std::uint32_t Vocabulary::find(Dimension d, std::string_view level) const noexcept {
  if (!is_string_dimension(d)) return kUnknown;
  const auto& ids = ids_[slot(d)];
  auto it = ids.find(std::string(level));
  return it == ids.end() ? kUnknown : it->second;
}

std::size_t Vocabulary::size(Dimension d) const noexcept {
  return is_string_dimension(d) ? ids_[slot(d)].size() : 0;
}

std::string_view backend_name(LookupBackend b) noexcept {
  return b == LookupBackend::hash ? "hash" : "bsearch";
}

LookupBackend parse_backend(std::string_view name) {
  if (name == "bsearch") return LookupBackend::bsearch;
  if (name == "hash") return LookupBackend::hash;
  throw std::invalid_argument("unknown backend " + std::string(name));
}

double CompiledModel::beta(Dimension d, std::uint32_t id) const noexcept {
  const std::size_t s = slot(d);
  if (backend_ == LookupBackend::hash) {
    const auto& m = hashed_[s];
    auto it = m.find(id);
    return it == m.end() ? 0.0 : it->second;
  }
  const auto& t = sorted_[s];
  auto it = std::lower_bound(t.begin(), t.end(), id,
                             [](const auto& entry, std::uint32_t key) { return entry.first < key; });
  return it != t.end() && it->first == id ? it->second : 0.0;
}

std::size_t CompiledModel::table_size(Dimension d) const noexcept {
  if (!is_string_dimension(d)) return 0;
  return sorted_[slot(d)].size();
}

CompiledModel compile(const BinaryModel& model, Vocabulary& vocabulary, LookupBackend backend) {
  model.validate();
  CompiledModel c;
  c.campaign_ = model.campaign;
  c.intercept_ = model.intercept;
  c.threshold_ = model.threshold;
  c.backend_ = backend;
  for (const auto& [index, value] : model.betas) {
    const auto& key = model.feature_index->key(index);
    if (key.dimension == Dimension::hour) {
      if (auto h = small_int(key.level, 24)) c.hour_[static_cast<std::size_t>(*h)] = value;
    } else if (key.dimension == Dimension::day) {
      if (auto d = small_int(key.level, 7)) c.day_[static_cast<std::size_t>(*d)] = value;
    } else {
      c.sorted_[CompiledModel::slot(key.dimension)].emplace_back(
          vocabulary.intern(key.dimension, key.level), value);
    }
  }
  for (std::size_t s = 0; s < c.sorted_.size(); ++s) {
    auto& t = c.sorted_[s];
    std::sort(t.begin(), t.end());
    if (backend == LookupBackend::hash) c.hashed_[s] = {t.begin(), t.end()};
  }
  return c;
}

CompiledEnsemble::CompiledEnsemble(std::span<const BinaryModel> models, LookupBackend backend) {
  models_.reserve(models.size());
  for (const auto& m : models) models_.push_back(compile(m, vocabulary_, backend));
}

EncodedImpression CompiledEnsemble::encode(const Impression& imp) const {
  if (imp.hour < 0 || imp.hour > 23 || imp.day < 0 || imp.day > 6) {
    throw std::invalid_argument("hour or day out of range");
  }
  EncodedImpression e;
  e.exchange = vocabulary_.find(Dimension::exchange, imp.exchange);
  e.ad_format = vocabulary_.find(Dimension::ad_format, imp.ad_format);
  e.ad_size = vocabulary_.find(Dimension::ad_size, imp.ad_size);
  e.domain = vocabulary_.find(Dimension::domain, imp.domain);
  e.zip = vocabulary_.find(Dimension::zip, imp.zip);
  e.hour = static_cast<std::uint8_t>(imp.hour);
  e.day = static_cast<std::uint8_t>(imp.day);
  return e;
}

std::vector<EncodedImpression> CompiledEnsemble::encode(std::span<const Impression> batch) const {
  std::vector<EncodedImpression> out;
  out.reserve(batch.size());
  for (const auto& imp : batch) out.push_back(encode(imp));
  return out;
}

std::vector<std::uint8_t> score_batch(const CompiledEnsemble& ensemble,
                                      std::span<const EncodedImpression> batch) {
  const std::size_t m = ensemble.size();
  std::vector<std::uint8_t> out(batch.size() * m);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = ensemble[j].accepts(batch[i]) ? 1 : 0;
  }
  return out;
}

namespace {

std::size_t score_range(const CompiledEnsemble& ensemble, std::span<const EncodedImpression> part,
                        std::size_t reps) {
  std::size_t accepted = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    for (const auto& imp : part) {
      for (const auto& model : ensemble.models()) accepted += model.accepts(imp);
    }
  }
  return accepted;
}

}  // namespace

BenchReport bench(const CompiledEnsemble& ensemble, std::span<const EncodedImpression> batch,
                  const BenchConfig& config) {
  if (batch.empty()) throw EmptyBatch("bench needs at least one impression");
  if (ensemble.size() == 0) throw EmptyBatch("bench needs at least one model");
  if (config.reps == 0) throw std::invalid_argument("reps must be >= 1");
  const unsigned threads = std::max(1u, config.threads);

  // Warm-up: touch every impression and table once, untimed.
  volatile std::size_t sink = score_range(ensemble, batch, 1);
  (void)sink;

  using clock = std::chrono::steady_clock;
  std::vector<std::size_t> accepted(threads, 0);
  std::vector<double> elapsed(threads, 0.0);
  std::vector<std::size_t> counts(threads, 0);
  const auto run = [&](unsigned t) {
    const std::size_t lo = batch.size() * t / threads, hi = batch.size() * (t + 1) / threads;
    const auto start = clock::now();
    accepted[t] = score_range(ensemble, batch.subspan(lo, hi - lo), config.reps);
    elapsed[t] = std::chrono::duration<double>(clock::now() - start).count();
    counts[t] = (hi - lo) * config.reps;
  };

  const auto start = clock::now();
  if (threads == 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(run, t);
  }
  const double wall = std::chrono::duration<double>(clock::now() - start).count();
  if (wall < config.min_wall_time) {
    throw ClockResolution("timed region lasted " + std::to_string(wall) +
                          " s; increase the repetitions");
  }

  BenchReport r;
  r.impressions_scored = batch.size() * config.reps;
  r.models = ensemble.size();
  r.wall_time = wall;
  r.qps = static_cast<double>(r.impressions_scored) / wall;
  r.pair_rate = r.qps * static_cast<double>(r.models);
  r.threads = threads;
  r.reps = config.reps;
  r.backend = ensemble[0].backend();
  for (unsigned t = 0; t < threads; ++t) {
    r.per_thread_qps.push_back(elapsed[t] > 0 ? static_cast<double>(counts[t]) / elapsed[t] : 0.0);
    r.accepted += accepted[t];
  }
  return r;
}

std::vector<BenchReport> bench_scaling(const CompiledEnsemble& ensemble,
                                       std::span<const EncodedImpression> batch,
                                       std::span<const unsigned> thread_counts, std::size_t reps) {
  std::vector<BenchReport> out;
  for (unsigned t : thread_counts) out.push_back(bench(ensemble, batch, {t, reps}));
  return out;
}

nlohmann::json BenchReport::to_json() const {
  return {{"impressions_scored", impressions_scored},
          {"models", models},
          {"wall_time", wall_time},
          {"qps", qps},
          {"pair_rate", pair_rate},
          {"threads", threads},
          {"reps", reps},
          {"backend", backend_name(backend)},
          {"per_thread_qps", per_thread_qps},
          {"accepted", accepted}};
}

}  // namespace adresp
