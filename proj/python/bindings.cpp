#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qoe/analysis.hpp"
#include "qoe/cli.hpp"
#include "qoe/error.hpp"
#include "qoe/io.hpp"
#include "qoe/pipeline.hpp"
#include "qoe/predictor.hpp"
#include "qoe/stats.hpp"
#include "qoe/stream.hpp"
#include "qoe/synth.hpp"

namespace py = pybind11;

namespace {

std::vector<qoe::RatingRecord> parse_records(const std::string& jsonl) {
  std::istringstream in(jsonl);
  return qoe::read_records(in);
}

qoe::analysis::Vector5 to_vec5(const std::vector<double>& v) {
  if (v.size() != qoe::kFeatureCount) throw qoe::Error("bad-feature", "expected 5 values");
  qoe::analysis::Vector5 out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

py::dict pca_dict(const std::vector<std::vector<double>>& samples) {
  std::vector<qoe::analysis::Vector5> xs;
  for (const auto& s : samples) xs.push_back(to_vec5(s));
  const auto p = qoe::analysis::pca(xs);
  py::dict d;
  d["mean"] = p.mean;
  d["scale"] = p.scale;
  d["covariance"] = p.covariance;
  d["eigenvalues"] = p.eigenvalues;
  d["components"] = p.components;
  d["explained_variance_ratio"] = p.explained_variance_ratio;
  d["scores"] = p.scores;
  return d;
}

py::tuple process(const std::string& jsonl, double tau, double gamma) {
  qoe::PipelineParams params;
  params.z_outlier_threshold = tau;
  params.srcc_threshold = gamma;
  qoe::validate(params);
  const auto result = qoe::pipeline::run_pipeline(parse_records(jsonl), params);
  const auto& r = result.report;
  py::dict report;
  report["raters_in"] = r.raters_in;
  report["records_in"] = r.records_in;
  report["records_out"] = r.records_out;
  report["rejected_by_z"] = std::vector<std::string>(r.rejected_by_z.begin(), r.rejected_by_z.end());
  report["rejected_by_srcc"] =
      std::vector<std::string>(r.rejected_by_srcc.begin(), r.rejected_by_srcc.end());
  report["final_raters"] = std::vector<std::string>(r.final_raters.begin(), r.final_raters.end());
  return py::make_tuple(qoe::mos_to_csv(result.mos), report);
}

std::string synth_records(std::size_t raters, std::size_t conditions, std::uint64_t seed) {
  auto world = qoe::synth::default_world();
  world.seed = seed;
  const auto pop =
      qoe::synth::generate(world, qoe::standard_grid(), qoe::standard_question_set(), raters, conditions);
  return qoe::records_to_jsonl(pop.records);
}

py::tuple train(const std::string& jsonl, const std::string& family, std::uint64_t seed,
                const std::string& target) {
  qoe::predict::DatasetOptions opts;
  opts.target = qoe::predict::parse_target_mode(target);
  const auto built = qoe::predict::build_dataset(parse_records(jsonl), opts);
  const auto split = qoe::predict::split_by_category(built.data, seed);
  auto model = qoe::predict::train(qoe::predict::parse_family(family), split.train, {}, seed);
  model.target = opts.target;
  model.anchors = built.anchors;
  const auto m = qoe::predict::evaluate(model, split.test);
  py::dict metrics;
  metrics["srcc"] = m.srcc;
  metrics["plcc"] = m.plcc;
  metrics["krcc"] = m.krcc;
  metrics["rmse"] = m.rmse;
  const auto bytes = qoe::predict::serialize(model);
  return py::make_tuple(py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size()), metrics);
}

py::tuple predict(const py::bytes& model_bytes, const std::vector<double>& x) {
  const std::string raw = model_bytes;
  const auto model = qoe::predict::deserialize(std::vector<std::uint8_t>(raw.begin(), raw.end()));
  const auto p = qoe::predict::predict(model, qoe::predict::masked(to_vec5(x), model.mask));
  return py::make_tuple(p.raw, p.clamped);
}

py::tuple run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = 0;
  {
    py::gil_scoped_release release;
    code = qoe::cli::run(args, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "QoE toolkit core";

  py::register_exception<qoe::Error>(m, "QoeError", PyExc_ValueError);

  m.def("tokenize", [](const std::string& text, const std::string& language) {
    return qoe::stream::tokenize(text, qoe::parse_language(language));
  }, py::arg("text"), py::arg("language") = "en");

  m.def("schedule_emission",
        [](const std::vector<std::string>& tokens, double speed, double pause_pos, double pause_dur) {
          const auto s = qoe::stream::schedule_emission(tokens, {speed, pause_pos, pause_dur});
          std::vector<double> times;
          for (const auto& item : s.items) times.push_back(item.emit_at_s);
          return py::make_tuple(times, s.total_duration_s);
        },
        py::arg("tokens"), py::arg("speed"), py::arg("pause_pos"), py::arg("pause_dur"),
        "Emission offsets (seconds) per token and the total duration.");

  using Vec = std::vector<double>;
  m.def("spearman", [](const Vec& a, const Vec& b) { return qoe::stats::spearman(a, b); });
  m.def("kendall", [](const Vec& a, const Vec& b) { return qoe::stats::kendall(a, b); });
  m.def("pearson", [](const Vec& a, const Vec& b) { return qoe::stats::pearson(a, b); });

  m.def("pca", &pca_dict, py::arg("samples"));
  m.def("process", &process, py::arg("records_jsonl"), py::arg("tau") = 2.0, py::arg("gamma") = 0.5,
        "Runs the label pipeline; returns (mos_csv, report).");
  m.def("synth_records", &synth_records, py::arg("raters") = 21, py::arg("conditions") = 432,
        py::arg("seed") = 1);
  m.def("train", &train, py::arg("records_jsonl"), py::arg("family") = "forest", py::arg("seed") = 1,
        py::arg("target") = "record", "Category split + fit; returns (model_bytes, test metrics).");
  m.def("predict", &predict, py::arg("model_bytes"), py::arg("features"));
  m.def("run_cli", &run_cli, py::arg("args"), "Runs the qoe command line in-process.");
}
