#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "adresp/binary_model.hpp"
#include "adresp/dataset.hpp"
#include "adresp/errors.hpp"
#include "adresp/irls.hpp"
#include "adresp/model_store.hpp"
#include "adresp/polytomous.hpp"
#include "adresp/roc.hpp"
#include "adresp/scoring.hpp"
#include "adresp/synthetic.hpp"

namespace py = pybind11;
using namespace adresp;

namespace {

// JSON documents cross the boundary as plain Python objects.
py::object to_python(const nlohmann::json& doc) {
  return py::module_::import("json").attr("loads")(doc.dump());
}

nlohmann::json from_python(const py::object& obj) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

FitResult fit_rows(const std::vector<std::vector<std::uint32_t>>& active,
                   const std::vector<std::uint32_t>& response, std::size_t n_features,
                   std::optional<std::vector<std::uint32_t>> trials, double ridge, int max_iterations,
                   double tolerance) {
  if (active.size() != response.size() || (trials && trials->size() != response.size())) {
    throw std::invalid_argument("active, response and trials must have the same length");
  }
  DesignMatrix d;
  d.n_features = n_features;
  for (std::size_t i = 0; i < active.size(); ++i) {
    d.rows.push_back({response[i], trials ? (*trials)[i] : 1u, active[i]});
  }
  FitConfig config;
  config.ridge = ridge;
  config.max_iterations = max_iterations;
  config.tolerance = tolerance;
  py::gil_scoped_release release;
  return fit(d, config);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Per-campaign logistic response models, ROC thresholds and ensemble scoring";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidModel>(m, "InvalidModel", base);
  py::register_exception<DegenerateData>(m, "DegenerateData", base);
  py::register_exception<DegenerateCalibration>(m, "DegenerateCalibration", base);
  py::register_exception<EmptyInput>(m, "EmptyInput", base);
  py::register_exception<EmptyPool>(m, "EmptyPool", base);
  py::register_exception<EmptyBatch>(m, "EmptyBatch", base);
  py::register_exception<DomainError>(m, "DomainError", base);
  py::register_exception<SchemaMismatch>(m, "SchemaMismatch", base);

  m.def("logit", &logit, py::arg("p"));
  m.def("inverse_logit", &inverse_logit, py::arg("eta"));

  py::class_<Impression>(m, "Impression")
      .def(py::init([](std::string exchange, int hour, int day, std::string ad_format,
                       std::string ad_size, std::string domain, std::string zip, std::string campaign,
                       bool clicked, std::int64_t ts) {
             return Impression{std::move(exchange), hour, day, std::move(ad_format), std::move(ad_size),
                               std::move(domain), std::move(zip), std::move(campaign), clicked, ts};
           }),
           py::arg("exchange"), py::arg("hour"), py::arg("day"), py::arg("ad_format"),
           py::arg("ad_size"), py::arg("domain"), py::arg("zip"), py::arg("campaign") = "",
           py::arg("clicked") = false, py::arg("ts") = 0)
      .def_readwrite("exchange", &Impression::exchange)
      .def_readwrite("hour", &Impression::hour)
      .def_readwrite("day", &Impression::day)
      .def_readwrite("ad_format", &Impression::ad_format)
      .def_readwrite("ad_size", &Impression::ad_size)
      .def_readwrite("domain", &Impression::domain)
      .def_readwrite("zip", &Impression::zip)
      .def_readwrite("campaign", &Impression::campaign)
      .def_readwrite("clicked", &Impression::clicked)
      .def_readwrite("ts", &Impression::timestamp)
      .def("__eq__", [](const Impression& a, const Impression& b) { return a == b; })
      .def("__repr__", [](const Impression& i) {
        return "<Impression " + i.domain + " " + i.zip + " h" + std::to_string(i.hour) + " " + i.campaign + ">";
      });

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("beta", &FitResult::beta)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("deviance", &FitResult::final_deviance)
      .def_readonly("standard_errors", &FitResult::standard_errors)
      .def_property_readonly("warnings", [](const FitResult& r) {
        std::vector<std::string> out;
        for (auto w : r.warnings) out.emplace_back(warning_name(w));
        return out;
      });

  m.def("fit", &fit_rows, py::arg("active"), py::arg("response"), py::arg("n_features"),
        py::arg("trials") = py::none(), py::arg("ridge") = 1e-6, py::arg("max_iterations") = 25,
        py::arg("tolerance") = 1e-8,
        "Logistic regression by IRLS. Row i has response[i] successes out of trials[i] "
        "(default 1) and the 1-based indicator columns in active[i]; column 0 is the intercept.");

  py::class_<RocCurve>(m, "RocCurve")
      .def_readonly("auc", &RocCurve::auc)
      .def_readonly("positives", &RocCurve::positives)
      .def_readonly("negatives", &RocCurve::negatives)
      .def_property_readonly("points", [](const RocCurve& c) {
        std::vector<std::tuple<double, double, double>> out;
        for (const auto& p : c.points) out.emplace_back(p.cut, p.fp_rate, p.tp_rate);
        return out;
      })
      .def("threshold", [](const RocCurve& c) { return to_python(threshold_to_json(select_threshold(c))); },
           "Youden point: the cut maximizing tp_rate - fp_rate, ties to the smaller fp_rate.");

  m.def("roc_from_scores",
        [](std::vector<double> pos, std::vector<double> neg) { return roc_from_scores(pos, neg); },
        py::arg("positive_scores"), py::arg("negative_scores"));

  py::class_<BinaryModel>(m, "BinaryModel")
      .def_static("from_json", [](const py::object& doc) { return model_from_json(from_python(doc)); })
      .def_static("load", &load_model_file, py::arg("path"))
      .def("to_json", [](const BinaryModel& b) { return to_python(to_json(b)); })
      .def_readonly("campaign", &BinaryModel::campaign)
      .def_readonly("intercept", &BinaryModel::intercept)
      .def_readonly("threshold", &BinaryModel::threshold)
      .def_readonly("auc", &BinaryModel::auc)
      .def_property_readonly("n_features", &BinaryModel::n_features)
      .def("linear_predictor", [](const BinaryModel& b, const Impression& i) { return linear_predictor(b, i); })
      .def("predict_probability", [](const BinaryModel& b, const Impression& i) { return predict_probability(b, i); })
      .def("accepts", [](const BinaryModel& b, const Impression& i) { return accepts(b, linear_predictor(b, i)); })
      .def("ex_ante", &adjust_intercept_ex_ante, py::arg("tau_pos"), py::arg("tau_neg"));

  m.def("load_model_dir", &load_model_dir, py::arg("path"));
  m.def("write_model_dir",
        [](const std::filesystem::path& dir, const std::vector<BinaryModel>& models) { write_model_dir(dir, models); },
        py::arg("path"), py::arg("models"));

  m.def("read_clicks", [](const std::filesystem::path& path) {
    auto r = ingest_file(path);
    return py::make_tuple(std::move(r.pool.clicks), to_python(r.report.to_json()));
  }, py::arg("path"), "Clicked impressions of a JSONL or CSV file and the skip report.");
  m.def("read_batch", [](const std::filesystem::path& path) { return read_batch_file(path); }, py::arg("path"));

  py::class_<PolytomousModel>(m, "Ensemble")
      .def(py::init([](std::vector<BinaryModel> models, const std::string& policy, std::uint64_t seed) {
             return PolytomousModel(std::move(models), parse_policy(policy), seed);
           }),
           py::arg("models"), py::arg("policy") = "top", py::arg("seed") = 0)
      .def("__len__", &PolytomousModel::size)
      .def_property_readonly("campaigns", [](const PolytomousModel& e) {
        std::vector<std::string> out;
        for (const auto& b : e.models()) out.push_back(b.campaign);
        return out;
      })
      .def("assign", [](const PolytomousModel& e, const Impression& i, std::uint64_t ordinal) {
        const auto a = assign(e, i, ordinal);
        return py::make_tuple(a.accepted_by, a.chosen);
      }, py::arg("impression"), py::arg("ordinal") = 0, "(accepted_by, chosen) for one impression.")
      .def("coverage", [](const PolytomousModel& e, const std::vector<Impression>& pool, unsigned threads) {
        CoverageReport r;
        {
          py::gil_scoped_release release;
          r = coverage(e, pool, threads);
        }
        return to_python(r.to_json());
      }, py::arg("impressions"), py::arg("threads") = 1)
      .def("evaluate", [](const PolytomousModel& e, std::vector<Impression> clicks, const std::string& credit) {
        const auto pool = ClickPool::from_clicks(std::move(clicks));
        MetricsReport r;
        {
          py::gil_scoped_release release;
          r = evaluate(e, pool, parse_credit(credit));
        }
        return to_python(r.to_json());
      }, py::arg("clicks"), py::arg("credit") = "chosen")
      .def("decisions", [](const PolytomousModel& e, const std::vector<Impression>& batch, const std::string& backend) {
        const CompiledEnsemble compiled(e.models(), parse_backend(backend));
        const auto encoded = compiled.encode(batch);
        std::vector<std::uint8_t> d;
        {
          py::gil_scoped_release release;
          d = score_batch(compiled, encoded);
        }
        py::array_t<bool> out({batch.size(), compiled.size()});
        auto view = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < batch.size(); ++i) {
          for (std::size_t j = 0; j < compiled.size(); ++j) view(i, j) = d[i * compiled.size() + j] != 0;
        }
        return out;
      }, py::arg("batch"), py::arg("backend") = "bsearch",
         "Boolean matrix [impression, model] of accept decisions, models in campaign order.");

  m.def("synthetic_clicks", [](std::size_t n_campaigns, std::size_t clicks_per_campaign, std::uint64_t seed,
                               std::size_t n_domains, std::size_t planted_domains, double domain_affinity) {
    synthetic::Config c;
    c.n_campaigns = n_campaigns;
    c.clicks_per_campaign = clicks_per_campaign;
    c.seed = seed;
    c.n_domains = n_domains;
    c.planted_domains = planted_domains;
    c.domain_affinity = domain_affinity;
    auto data = synthetic::generate_clicks(c);
    return py::make_tuple(std::move(data.clicks), data.truth.planted_domains);
  }, py::arg("n_campaigns") = 8, py::arg("clicks_per_campaign") = 250, py::arg("seed") = 0,
     py::arg("n_domains") = 80, py::arg("planted_domains") = 5, py::arg("domain_affinity") = 0.5,
     "Synthetic click log with planted domain affinities: (clicks, planted domains per campaign).");
}
