#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "adresp/errors.hpp"
#include "adresp/log.hpp"
#include "adresp/model_store.hpp"
#include "adresp/pipeline.hpp"
#include "adresp/scoring.hpp"
#include "adresp/synthetic.hpp"

using namespace adresp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Carries an exit code out of a subcommand.
struct Exit {
  int code;
  std::string message;
};

std::string pretty(const json& doc) { return doc.dump(2) + "\n"; }

void merge(SkipReport& into, const SkipReport& from) {
  into.lines += from.lines;
  into.accepted += from.accepted;
  into.skipped += from.skipped;
  for (const auto& [reason, n] : from.reasons) into.reasons[reason] += n;
  for (auto line : from.sample_lines) {
    if (into.sample_lines.size() < 20) into.sample_lines.push_back(line);
  }
}

IngestResult ingest_all(const std::vector<fs::path>& inputs, std::optional<RecordFormat> format) {
  if (inputs.empty()) throw ConfigError("no input files given");
  std::vector<Impression> clicks;
  SkipReport report;
  for (const auto& path : inputs) {
    auto part = ingest_file(path, format);
    clicks.insert(clicks.end(), std::make_move_iterator(part.pool.clicks.begin()),
                  std::make_move_iterator(part.pool.clicks.end()));
    merge(report, part.report);
    if (log::enabled()) {
      log::emit("ingest", {{"file", path.string()}, {"report", part.report.to_json()}});
    }
  }
  return {ClickPool::from_clicks(std::move(clicks)), std::move(report)};
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file_atomic(path, text);
  }
}

// ---- train ----

struct TrainArgs {
  fs::path config;
  fs::path output;
  std::vector<fs::path> inputs;
  unsigned threads = 0;
};

int cmd_train(const TrainArgs& args) {
  auto config = load_config(args.config);
  if (!args.output.empty()) config.output_dir = args.output;
  if (!args.inputs.empty()) config.inputs = args.inputs;
  if (args.threads > 0) config.threads = args.threads;

  const auto ingested = ingest_all(config.inputs, config.format);
  const auto outcomes = train_all(ingested.pool, config);

  const fs::path out = config.output_dir;
  std::vector<BinaryModel> models;
  json campaigns = json::array();
  for (const auto& o : outcomes) {
    json entry = {{"campaign", o.campaign}, {"status", o.ok() ? "trained" : "failed"}};
    if (o.ok()) {
      models.push_back(*o.model);
      const auto stem = model_file_name(o.campaign);
      const auto base = stem.substr(0, stem.size() - 5);
      write_file_atomic(out / "reports" / (base + ".exploration.json"), pretty(o.report->to_json()));
      std::ostringstream csv;
      write_curve_csv(o.report->curve, csv);
      write_file_atomic(out / "reports" / (base + ".roc.csv"), csv.str());
      entry["auc"] = o.model->auc;
      entry["features"] = o.model->n_features();
      entry["candidate"] = o.report->candidates[o.report->best].candidate.name();
      entry["training_rows"] = o.training_rows;
      entry["calibration_rows"] = o.calibration_rows;
    } else {
      entry["error"] = o.error;
    }
    campaigns.push_back(std::move(entry));
  }
  if (!models.empty()) write_model_dir(out / "models", models);
  const json summary = {{"campaigns", campaigns},
                        {"trained", models.size()},
                        {"failed", outcomes.size() - models.size()},
                        {"ingest", ingested.report.to_json()},
                        {"config", config_to_json(config)}};
  write_file_atomic(out / "train_summary.json", pretty(summary));

  std::cout << "trained " << models.size() << " of " << outcomes.size() << " campaigns into "
            << (out / "models").string() << "\n";
  if (models.empty()) throw Exit{kExitFailure, "no campaign produced a model"};
  return 0;
}

// ---- evaluate ----

struct EvaluateArgs {
  fs::path models;
  fs::path clicks;
  fs::path config;
  fs::path output;
  std::string policy;
  std::string credit;
  std::optional<std::uint64_t> seed;
  std::int64_t bucket = 86'400;
  unsigned threads = 1;
};

int cmd_evaluate(const EvaluateArgs& args) {
  PipelineConfig config;
  if (!args.config.empty()) config = load_config(args.config);
  if (!args.policy.empty()) config.policy = parse_policy(args.policy);
  if (!args.credit.empty()) config.credit = parse_credit(args.credit);
  if (args.seed) config.policy_seed = *args.seed;
  if (args.bucket < 1) throw ConfigError("--bucket must be >= 1");

  auto models = load_model_dir(args.models);
  if (models.empty()) throw InvalidModel("model directory lists no models");
  const PolytomousModel ensemble(std::move(models), config.policy, config.policy_seed);

  auto ingested = ingest_file(args.clicks, config.format);
  if (config.window) {
    std::erase_if(ingested.pool.clicks, [&](const Impression& c) {
      return c.timestamp < config.window->begin || c.timestamp > config.window->end;
    });
    ingested.pool = ClickPool::from_clicks(std::move(ingested.pool.clicks));
  }
  const auto report = evaluate(ensemble, ingested.pool, config.credit);
  const auto cover = coverage(ensemble, ingested.pool.clicks, args.threads);
  const auto series = evaluate_series(ensemble, ingested.pool, args.bucket, config.credit);

  const json doc = {{"metrics", report.to_json()},
                    {"coverage", cover.to_json()},
                    {"ingest", ingested.report.to_json()}};
  std::ostringstream csv;
  write_series_csv(series, csv);
  if (args.output.empty()) {
    std::cout << pretty(doc);
  } else {
    write_file_atomic(args.output / "metrics.json", pretty(doc));
    write_file_atomic(args.output / "series.csv", csv.str());
    std::cout << pretty(doc["metrics"]["total"]);
  }
  return 0;
}

// ---- score ----

struct ScoreArgs {
  fs::path models;
  fs::path batch;
  fs::path output;
  std::string backend = "bsearch";
  std::string policy = "top";
  std::uint64_t seed = 0;
};

int cmd_score(const ScoreArgs& args) {
  auto models = load_model_dir(args.models);
  if (models.empty()) throw InvalidModel("model directory lists no models");
  const auto batch = read_batch_file(args.batch);
  const CompiledEnsemble compiled(models, parse_backend(args.backend));
  const PolytomousModel ensemble(models, parse_policy(args.policy), args.seed);
  const auto encoded = compiled.encode(batch);
  const auto decisions = score_batch(compiled, encoded);
  const auto& names = ensemble.models();

  std::ostringstream out;
  std::vector<std::size_t> accepted;
  const std::size_t m = compiled.size();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    json accepted_by = json::array();
    for (std::size_t j = 0; j < m; ++j) {
      if (decisions[i * m + j]) accepted_by.push_back(compiled[j].campaign());
    }
    const auto chosen = ensemble.assign_indices(ensemble.compiled().encode(batch[i]), i, accepted);
    json line = {{"index", i},
                 {"accepted_by", accepted_by},
                 {"chosen", chosen ? json(names[*chosen].campaign) : json(nullptr)}};
    out << line.dump() << '\n';
  }
  write_text(args.output, out.str());
  return 0;
}

// ---- bench ----

struct BenchArgs {
  fs::path models;
  fs::path batch;
  std::string backend = "bsearch";
  unsigned threads = 1;
  std::size_t reps = 10;
  bool scaling = false;
};

int cmd_bench(const BenchArgs& args) {
  const auto models = load_model_dir(args.models);
  const auto batch = read_batch_file(args.batch);
  // Interning happens here, before anything is timed.
  const CompiledEnsemble compiled(models, parse_backend(args.backend));
  const auto encoded = compiled.encode(batch);

  json doc;
  try {
    doc["report"] = bench(compiled, encoded, {.threads = args.threads, .reps = args.reps}).to_json();
    if (args.scaling) {
      std::vector<unsigned> counts(args.threads);
      std::iota(counts.begin(), counts.end(), 1u);
      const auto table = bench_scaling(compiled, encoded, counts, args.reps);
      json rows = json::array();
      for (const auto& r : table) {
        auto row = r.to_json();
        row["speedup"] = r.qps / table.front().qps;
        rows.push_back(std::move(row));
      }
      doc["scaling"] = rows;
    }
  } catch (const ClockResolution& e) {
    throw Exit{kExitFailure, std::string(e.what()) + "; raise --reps"};
  }
  std::cout << pretty(doc);
  return 0;
}

// ---- roc-export ----

struct RocArgs {
  fs::path model;
  fs::path clicks;
  fs::path output;
};

int cmd_roc_export(const RocArgs& args) {
  const auto model = load_model_file(args.model);
  const auto ingested = ingest_file(args.clicks);
  const auto set = build_labeled_set(ingested.pool, model.campaign);
  const auto curve = roc(model, set);
  const auto choice = select_threshold(curve);
  std::ostringstream csv;
  write_curve_csv(curve, csv);
  if (args.output.empty()) {
    std::cout << csv.str();
  } else {
    write_file_atomic(fs::path(args.output.string() + ".roc.csv"), csv.str());
    json doc = threshold_to_json(choice);
    doc["campaign"] = model.campaign;
    doc["auc"] = curve.auc;
    write_file_atomic(fs::path(args.output.string() + ".threshold.json"), pretty(doc));
  }
  return 0;
}

// ---- synth ----

struct SynthArgs {
  synthetic::Config config;
  fs::path output;
  fs::path batch;
  std::size_t batch_size = 10'000;
  fs::path truth;
};

int cmd_synth(const SynthArgs& args) {
  const auto data = synthetic::generate_clicks(args.config);
  std::ostringstream clicks;
  emit(data.clicks, clicks, format_for(args.output));
  write_text(args.output, clicks.str());
  if (!args.batch.empty()) {
    const auto batch = synthetic::generate_impressions(args.config, args.batch_size, args.config.seed + 1);
    std::ostringstream out;
    emit(batch, out, format_for(args.batch));
    write_file_atomic(args.batch, out.str());
  }
  if (!args.truth.empty()) {
    const json doc = {{"planted_domains", data.truth.planted_domains},
                      {"preferred_hours", data.truth.preferred_hours}};
    write_file_atomic(args.truth, pretty(doc));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-campaign ad response models: train, evaluate, score and benchmark"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress structured logs on stderr");

  const auto positive = CLI::PositiveNumber;
  const auto policy_check = CLI::IsMember({"top", "set"});
  const auto backend_check = CLI::IsMember({"bsearch", "hash"});

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Explore and fit one model per campaign");
  t->add_option("-c,--config", train.config, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  t->add_option("-o,--output", train.output, "Output directory (overrides output_dir)");
  t->add_option("-i,--input", train.inputs, "Click files (override input)");
  t->add_option("-t,--threads", train.threads, "Campaigns trained concurrently")->check(positive);

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Precision, recall, accuracy and coverage of an ensemble");
  e->add_option("-m,--models", ev.models, "Model directory")->required();
  e->add_option("--clicks", ev.clicks, "Click file")->required();
  e->add_option("-c,--config", ev.config, "Pipeline config for policy, credit and window");
  e->add_option("-o,--output", ev.output, "Directory for metrics.json and series.csv");
  e->add_option("--policy", ev.policy, "top or set")->check(policy_check);
  e->add_option("--credit", ev.credit, "chosen or all_acceptors")
      ->check(CLI::IsMember({"chosen", "all_acceptors"}));
  e->add_option("--seed", ev.seed, "Set-policy seed");
  e->add_option("--bucket", ev.bucket, "Series bucket width in seconds");
  e->add_option("-t,--threads", ev.threads, "Coverage threads")->check(positive);

  ScoreArgs sc;
  auto* s = app.add_subcommand("score", "Accept/reject decisions for a batch of impressions");
  s->add_option("-m,--models", sc.models, "Model directory")->required();
  s->add_option("-b,--batch", sc.batch, "Impression file")->required();
  s->add_option("-o,--output", sc.output, "JSONL output (default stdout)");
  s->add_option("--backend", sc.backend, "bsearch or hash")->check(backend_check);
  s->add_option("--policy", sc.policy, "top or set")->check(policy_check);
  s->add_option("--seed", sc.seed, "Set-policy seed");

  BenchArgs bn;
  auto* b = app.add_subcommand("bench", "Scoring throughput of an ensemble over an in-memory batch");
  b->add_option("-m,--models", bn.models, "Model directory")->required();
  b->add_option("-b,--batch", bn.batch, "Impression file")->required();
  b->add_option("-t,--threads", bn.threads, "Scoring threads")->check(positive);
  b->add_option("-r,--reps", bn.reps, "Passes over the batch")->check(positive);
  b->add_option("--backend", bn.backend, "bsearch or hash")->check(backend_check);
  b->add_flag("--scaling", bn.scaling, "Also report every thread count from 1 to --threads");

  RocArgs rc;
  auto* r = app.add_subcommand("roc-export", "ROC curve and threshold of a model on a click file");
  r->add_option("--model", rc.model, "Model file")->required()->check(CLI::ExistingFile);
  r->add_option("--clicks", rc.clicks, "Calibration click file")->required();
  r->add_option("-o,--output", rc.output, "Prefix for <prefix>.roc.csv and <prefix>.threshold.json");

  SynthArgs sy;
  auto* g = app.add_subcommand("synth", "Generate a synthetic click log with planted affinities");
  g->add_option("--campaigns", sy.config.n_campaigns)->check(positive);
  g->add_option("--clicks-per-campaign", sy.config.clicks_per_campaign)->check(positive);
  g->add_option("--domains", sy.config.n_domains)->check(positive);
  g->add_option("--zips", sy.config.n_zips)->check(positive);
  g->add_option("--zipf", sy.config.zipf_exponent, "Exponent of the domain/ZIP popularity law")->check(CLI::NonNegativeNumber);
  g->add_option("--planted-domains", sy.config.planted_domains);
  g->add_option("--domain-affinity", sy.config.domain_affinity)->check(CLI::Range(0.0, 1.0));
  g->add_option("--hour-affinity", sy.config.hour_affinity)->check(CLI::Range(0.0, 1.0));
  g->add_option("--seed", sy.config.seed);
  g->add_option("-o,--output", sy.output, "Click file (.jsonl or .csv)")->required();
  g->add_option("--batch", sy.batch, "Also write unclicked impressions here");
  g->add_option("--batch-size", sy.batch_size)->check(positive);
  g->add_option("--truth", sy.truth, "Write the planted truth as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }
  if (!quiet) log::set_sink(log::stderr_sink());

  try {
    if (*t) return cmd_train(train);
    if (*e) return cmd_evaluate(ev);
    if (*s) return cmd_score(sc);
    if (*b) return cmd_bench(bn);
    if (*r) return cmd_roc_export(rc);
    if (*g) return cmd_synth(sy);
  } catch (const Exit& x) {
    std::cerr << "adresp: " << x.message << "\n";
    return x.code;
  } catch (const ConfigError& err) {
    std::cerr << "adresp: config error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& err) {
    std::cerr << "adresp: " << err.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "adresp: " << err.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
