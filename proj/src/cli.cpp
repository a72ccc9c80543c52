#include "qoe/cli.hpp"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "qoe/analysis.hpp"
#include "qoe/error.hpp"
#include "qoe/http.hpp"
#include "qoe/io.hpp"
#include "qoe/pipeline.hpp"
#include "qoe/predictor.hpp"
#include "qoe/session.hpp"
#include "qoe/stream.hpp"
#include "qoe/synth.hpp"

namespace qoe::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Globals {
  std::string log_level = "warn";
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::string config;
};

ordered_json meta(const std::string& command, std::uint64_t seed) {
  ordered_json m;
  m["tool"] = "qoe";
  m["version"] = kVersion;
  m["command"] = command;
  m["seed"] = seed;
  return m;
}

std::string csv_header(const std::string& command, std::uint64_t seed) {
  return "# qoe " + std::string(kVersion) + " " + command + " seed=" + std::to_string(seed) + "\n";
}

void write_json(const fs::path& path, const ordered_json& j) { write_file(path, j.dump(2) + "\n"); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("io-error", "cannot create " + dir.string() + ": " + ec.message());
}

ordered_json load_json(const fs::path& path) {
  const auto text = read_file(path);
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("bad-json", path.string() + ": " + e.what());
  }
}

std::shared_ptr<spdlog::logger> logger() {
  auto l = spdlog::get("qoe");
  if (!l) {
    l = std::make_shared<spdlog::logger>("qoe", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    l->set_pattern("%Y-%m-%dT%H:%M:%S.%eZ %l %v", spdlog::pattern_time_type::utc);
    spdlog::register_logger(l);
  }
  return l;
}

template <typename T>
ordered_json array_json(const T& values) {
  ordered_json a = ordered_json::array();
  for (const auto& v : values) a.push_back(v);
  return a;
}

ordered_json matrix_json(const analysis::Matrix5& m) {
  ordered_json a = ordered_json::array();
  for (const auto& row : m) a.push_back(array_json(row));
  return a;
}

ordered_json feature_names() {
  ordered_json a = ordered_json::array();
  for (auto f : kFeatures) a.push_back(std::string(to_string(f)));
  return a;
}

ordered_json metrics_json(const predict::MetricsBundle& m) {
  return {{"srcc", m.srcc}, {"plcc", m.plcc}, {"krcc", m.krcc}, {"rmse", m.rmse}};
}

ordered_json condition_json(const ConditionId& c) {
  ordered_json j;
  j["question_id"] = c.question_id;
  j["content"] = to_json(c.content);
  j["qos"] = to_json(c.qos);
  return j;
}

ExperimentGrid grid_or_default(const std::string& path) {
  return path.empty() ? standard_grid() : load_grid(path);
}

ContentFixture content_or_default(const std::string& path) {
  return path.empty() ? standard_question_set() : load_content(path);
}

// ---------------------------------------------------------------- serve

struct ServeOpts {
  std::string content, grid, store, host = "127.0.0.1";
  int port = 8080;
  bool virtual_clock = false;
};

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

int cmd_serve(const Globals& g, const ServeOpts& o, std::ostream& out) {
  session::ServiceConfig cfg;
  cfg.content = load_content(o.content);
  cfg.grid = grid_or_default(o.grid);
  if (!o.store.empty()) cfg.store_dir = o.store;
  cfg.seed = g.seed;
  if (o.virtual_clock) {
    cfg.clock = std::make_shared<stream::VirtualClock>();
  } else {
    cfg.clock = std::make_shared<stream::WallClock>();
  }
  session::SessionService service(std::move(cfg));
  http::Server server(service);
  const int port = server.bind(o.host, o.port);
  out << "listening on http://" << o.host << ":" << port << std::endl;
  logger()->info("serve: {} questions, store {}", service.content().questions.size(),
                 o.store.empty() ? "(memory)" : o.store);

  g_stop = false;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::thread watcher([&] {
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
  });
  server.listen();
  g_stop = true;
  watcher.join();
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateOpts {
  std::string text_file, text, language = "en", trace_out;
  double speed = 0.05, pause_at = 0.0, pause_secs = 0.0;
  bool virtual_clock = false;
};

int cmd_simulate(const Globals& g, const SimulateOpts& o, std::ostream& out) {
  if (o.text_file.empty() == o.text.empty()) throw Error("usage", "give exactly one of --text-file or --text");
  const std::string text = o.text_file.empty() ? o.text : read_file(o.text_file);
  const QosConfig qos{o.speed, o.pause_at, o.pause_secs};
  if (auto err = validate_qos(qos)) throw Error(err->code, err->field);
  const auto language = parse_language(o.language);

  const auto schedule = stream::schedule_emission(stream::tokenize(text, language), qos);
  std::unique_ptr<stream::Clock> clock;
  if (o.virtual_clock) {
    clock = std::make_unique<stream::VirtualClock>();
  } else {
    clock = std::make_unique<stream::WallClock>();
  }
  const auto trace = stream::play(schedule, *clock, [&](std::size_t i, std::string_view tok) {
    out << stream::token_event(i, tok) << '\n' << std::flush;
    return static_cast<bool>(out);
  });
  out << stream::done_event(trace.items.size()) << '\n' << std::flush;

  if (!o.trace_out.empty()) {
    ordered_json j;
    j["meta"] = meta("simulate", g.seed);
    j["clock"] = std::string(stream::to_string(trace.clock_kind));
    j["language"] = std::string(to_string(language));
    j["qos"] = to_json(qos);
    j["count"] = trace.items.size();
    j["total_duration_s"] = schedule.total_duration_s;
    j["pause_index"] = stream::pause_index(schedule.items.size(), qos.pause_pos);
    ordered_json items = ordered_json::array();
    for (std::size_t i = 0; i < trace.items.size(); ++i) {
      const auto& t = trace.items[i];
      items.push_back({{"index", i}, {"token", t.token}, {"scheduled_at_s", t.scheduled_at_s},
                       {"actual_at_s", t.actual_at_s}});
    }
    j["items"] = std::move(items);
    if (!trace.items.empty()) {
      j["lateness_s"] = {{"p50", trace.lateness_quantile(0.5)},
                         {"p95", trace.lateness_quantile(0.95)},
                         {"p99", trace.lateness_quantile(0.99)},
                         {"max", trace.lateness_quantile(1.0)}};
    }
    write_json(o.trace_out, j);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- synth

struct SynthOpts {
  std::string world, grid, content, out, profiles_out;
  std::size_t raters = 21;
  std::size_t conditions = 432;
};

int cmd_synth(const Globals& g, const SynthOpts& o, std::ostream&) {
  auto world = o.world.empty() ? synth::default_world() : synth::world_from_json(load_json(o.world));
  if (g.seed_given) world.seed = g.seed;
  const auto grid = grid_or_default(o.grid);
  const auto content = content_or_default(o.content);
  const auto pop = synth::generate(world, grid, content, o.raters, o.conditions);

  save_records(o.out, pop.records);
  ordered_json m;
  m["meta"] = meta("synth", world.seed);
  m["world"] = synth::to_json(world);
  m["raters"] = o.raters;
  m["conditions"] = pop.utility.size();
  m["records"] = pop.records.size();
  write_json(o.out + ".meta.json", m);
  if (!o.profiles_out.empty()) save_profiles(o.profiles_out, pop.profiles);
  logger()->info("synth: {} raters x {} conditions -> {} records", o.raters, pop.utility.size(),
                 pop.records.size());
  return kExitOk;
}

// ---------------------------------------------------------------- process

struct PipelineOpts {
  double tau = 2.0;
  double gamma = 0.5;
  PipelineParams params() const {
    PipelineParams p;
    p.z_outlier_threshold = tau;
    p.srcc_threshold = gamma;
    validate(p);
    return p;
  }
};

struct ProcessOpts {
  std::string in, out, report, anchors, clean_out;
  PipelineOpts pipe;
};

RescaleAnchors load_anchors(const std::string& path) {
  auto j = load_json(path);
  if (j.contains("anchors")) j = j["anchors"];
  return anchors_from_json(j);
}

ordered_json report_json(const pipeline::PipelineReport& r, const PipelineParams& p,
                         const RescaleAnchors& anchors, std::uint64_t seed) {
  ordered_json j;
  j["meta"] = meta("process", seed);
  j["params"] = {{"tau", p.z_outlier_threshold}, {"gamma", p.srcc_threshold}};
  j["raters_in"] = r.raters_in;
  j["raters_out"] = r.final_raters.size();
  j["records_in"] = r.records_in;
  j["records_out"] = r.records_out;
  j["records_removed"] = r.records_in - r.records_out;
  j["rejected_by_z"] = array_json(r.rejected_by_z);
  j["rejected_by_srcc"] = array_json(r.rejected_by_srcc);
  j["insufficient_overlap"] = array_json(r.insufficient_overlap);
  ordered_json srcc = ordered_json::object();
  for (const auto& [id, v] : r.rater_srcc) srcc[id] = v;
  j["rater_srcc"] = std::move(srcc);
  ordered_json empty = ordered_json::array();
  for (const auto& c : r.empty_conditions) empty.push_back(condition_json(c));
  j["empty_conditions"] = std::move(empty);
  j["anchors"] = to_json(anchors);
  return j;
}

int cmd_process(const Globals& g, const ProcessOpts& o, std::ostream&) {
  const auto records = load_records(o.in);
  const auto params = o.pipe.params();
  std::optional<RescaleAnchors> frozen;
  if (!o.anchors.empty()) frozen = load_anchors(o.anchors);
  const auto result = pipeline::run_pipeline(records, params, frozen);

  write_file(o.out, csv_header("process", g.seed) + mos_to_csv(result.mos));
  if (!o.report.empty()) write_json(o.report, report_json(result.report, params, result.mos.anchors, g.seed));
  if (!o.clean_out.empty()) {
    save_records(o.clean_out, pipeline::surviving_records(records, result.report));
  }
  logger()->info("process: {} records in, {} out; {} raters rejected by z, {} by srcc",
                 result.report.records_in, result.report.records_out,
                 result.report.rejected_by_z.size(), result.report.rejected_by_srcc.size());
  return kExitOk;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeOpts {
  std::string kind, in, records, raters, content, grid, out, dimension = "overall", by;
  PipelineOpts pipe;
};

ordered_json pca_json(const analysis::PcaResult& p, std::size_t n, bool with_scores) {
  ordered_json j;
  j["features"] = feature_names();
  j["samples"] = n;
  j["standardized"] = true;
  j["mean"] = array_json(p.mean);
  j["scale"] = array_json(p.scale);
  j["covariance"] = matrix_json(p.covariance);
  j["eigenvalues"] = array_json(p.eigenvalues);
  j["components"] = matrix_json(p.components);
  j["explained_variance_ratio"] = array_json(p.explained_variance_ratio);
  if (with_scores) {
    ordered_json s = ordered_json::array();
    for (const auto& row : p.scores) s.push_back(array_json(row));
    j["scores"] = std::move(s);
  }
  return j;
}

ordered_json corr_json(const analysis::CorrelationMatrix& c) {
  ordered_json j;
  ordered_json dims = ordered_json::array();
  for (auto d : c.dims) dims.push_back(std::string(to_string(d)));
  j["dims"] = std::move(dims);
  ordered_json v = ordered_json::array();
  for (const auto& row : c.values) v.push_back(array_json(row));
  j["values"] = std::move(v);
  return j;
}

std::vector<analysis::Vector5> record_samples(const std::vector<RatingRecord>& records) {
  std::vector<analysis::Vector5> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(to_feature_vector(r.content, r.qos));
  return out;
}

std::vector<analysis::Vector5> mos_samples(const MosTable& mos, Dimension dim) {
  std::vector<analysis::Vector5> out;
  for (const auto& [key, e] : mos.entries) {
    if (key.dimension == dim) out.push_back(to_feature_vector(key.condition.content, key.condition.qos));
  }
  return out;
}

void analyze_mbti(const AnalyzeOpts& o, const ordered_json& m, const fs::path& dir) {
  if (o.records.empty()) throw Error("missing-field", "analyze mbti needs --records");
  if (o.raters.empty()) throw Error("missing-field", "analyze mbti needs --raters");
  const auto records = load_records(o.records);
  std::map<std::string, RaterProfile> profiles;
  for (auto& p : load_profiles(o.raters)) profiles[p.rater_id] = std::move(p);
  const auto params = o.pipe.params();

  ordered_json j;
  j["meta"] = m;
  ordered_json axes = ordered_json::array();
  for (int axis = 0; axis < 4; ++axis) {
    const auto split = analysis::group_by_mbti(records, profiles, axis);
    ordered_json a;
    a["axis"] = std::string{split.first_letter, '/', split.second_letter};
    ordered_json groups = ordered_json::array();
    for (const auto* part : {&split.first, &split.second}) {
      ordered_json grp;
      grp["letter"] = std::string(1, part == &split.first ? split.first_letter : split.second_letter);
      grp["records"] = part->size();
      std::set<std::string> raters;
      for (const auto& r : *part) raters.insert(r.rater_id);
      grp["raters"] = raters.size();
      try {
        const auto result = pipeline::run_pipeline(*part, params);
        const auto survivors = pipeline::surviving_records(*part, result.report);
        grp["records_out"] = survivors.size();
        const auto samples = record_samples(survivors);
        grp["pca"] = pca_json(analysis::pca(samples), samples.size(), false);
        grp["correlations"] = corr_json(analysis::dimension_correlations(result.mos));
      } catch (const Error& e) {
        grp["error"] = e.what();
      }
      groups.push_back(std::move(grp));
    }
    a["groups"] = std::move(groups);
    axes.push_back(std::move(a));
  }
  j["axes"] = std::move(axes);
  write_json(dir / "mbti.json", j);
}

void analyze_topics(const AnalyzeOpts& o, const MosTable& mos, const std::string& header,
                    const fs::path& dir) {
  std::map<std::string, Category> categories;
  if (!o.records.empty()) {
    for (const auto& r : load_records(o.records)) categories.emplace(r.question_id, r.category);
  } else if (!o.content.empty()) {
    for (const auto& q : load_content(o.content).questions) categories.emplace(q.question_id, q.category);
  } else {
    for (const auto& q : standard_question_set().questions) categories.emplace(q.question_id, q.category);
  }
  const auto dim = parse_dimension(o.dimension);
  std::vector<analysis::TierSample> samples;
  for (const auto& [key, e] : mos.entries) {
    if (key.dimension != dim) continue;
    auto it = categories.find(key.condition.question_id);
    if (it == categories.end()) throw Error("unknown-question", key.condition.question_id);
    samples.push_back({e.mos_scaled, it->second});
  }
  const auto summary = analysis::topic_tiers(samples);
  std::string csv = header + "tier,category,mean_mos,count\n";
  for (auto tier : {analysis::Tier::kHigh, analysis::Tier::kMid, analysis::Tier::kLow}) {
    auto it = summary.mean.find(tier);
    if (it == summary.mean.end()) continue;
    for (const auto& [cat, mean] : it->second) {
      csv += std::string(analysis::to_string(tier)) + ',' + std::string(to_string(cat)) + ',' +
             format_double(mean) + ',' + std::to_string(summary.count.at(tier).at(cat)) + '\n';
    }
  }
  write_file(dir / "topics.csv", csv);
}

void analyze_dist(const AnalyzeOpts& o, const MosTable& mos, const ordered_json& m,
                  const std::string& header, const fs::path& dir) {
  const auto dim = parse_dimension(o.dimension);
  const auto grid = grid_or_default(o.grid);
  std::vector<Feature> groupings;
  if (o.by.empty()) {
    groupings.assign(kFeatures.begin(), kFeatures.end());
  } else {
    groupings.push_back(parse_feature(o.by));
  }
  for (auto f : groupings) {
    const auto ex = analysis::distribution_export(mos, f, dim, analysis::grid_levels(grid, f));
    const std::string name(to_string(f));
    std::string csv = header + "level,n,min,q1,median,q3,max\n";
    ordered_json j;
    j["meta"] = m;
    j["grouping"] = name;
    j["dimension"] = std::string(to_string(dim));
    ordered_json levels = ordered_json::array();
    for (const auto& l : ex.levels) {
      const auto& s = l.summary;
      csv += l.level + ',' + std::to_string(l.samples.size()) + ',' + format_double(s.min) + ',' +
             format_double(s.q1) + ',' + format_double(s.median) + ',' + format_double(s.q3) + ',' +
             format_double(s.max) + '\n';
      levels.push_back({{"level", l.level},
                        {"summary", {{"min", s.min}, {"q1", s.q1}, {"median", s.median}, {"q3", s.q3}, {"max", s.max}}},
                        {"samples", array_json(l.samples)}});
    }
    j["levels"] = std::move(levels);
    j["warnings"] = array_json(ex.warnings);
    write_file(dir / ("dist_" + name + ".csv"), csv);
    write_json(dir / ("dist_" + name + ".json"), j);
  }
}

int cmd_analyze(const Globals& g, const AnalyzeOpts& o, std::ostream&) {
  const auto mos = mos_from_csv(read_file(o.in));
  const fs::path dir = o.out;
  ensure_dir(dir);
  const auto m = meta("analyze " + o.kind, g.seed);
  const auto header = csv_header("analyze " + o.kind, g.seed);

  if (o.kind == "pca") {
    const auto samples = o.records.empty() ? mos_samples(mos, parse_dimension(o.dimension))
                                           : record_samples(load_records(o.records));
    auto j = pca_json(analysis::pca(samples), samples.size(), true);
    j["source"] = o.records.empty() ? "mos" : "records";
    ordered_json wrapped;
    wrapped["meta"] = m;
    for (auto it = j.begin(); it != j.end(); ++it) wrapped[it.key()] = it.value();
    write_json(dir / "pca.json", wrapped);
  } else if (o.kind == "corr") {
    auto j = corr_json(analysis::dimension_correlations(mos));
    ordered_json wrapped;
    wrapped["meta"] = m;
    for (auto it = j.begin(); it != j.end(); ++it) wrapped[it.key()] = it.value();
    write_json(dir / "corr.json", wrapped);
  } else if (o.kind == "mbti") {
    analyze_mbti(o, m, dir);
  } else if (o.kind == "topics") {
    analyze_topics(o, mos, header, dir);
  } else {
    analyze_dist(o, mos, m, header, dir);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- models

struct ModelOpts {
  std::string in, model = "forest", out, target = "record", dimension = "overall", metrics_out;
  std::string split = "category";
  PipelineOpts pipe;
  predict::Hyperparameters hyper;
};

predict::BuiltDataset dataset_for(const std::vector<RatingRecord>& records, const ModelOpts& o) {
  predict::DatasetOptions d;
  d.dimension = parse_dimension(o.dimension);
  d.target = predict::parse_target_mode(o.target);
  d.params = o.pipe.params();
  return predict::build_dataset(records, d);
}

int cmd_train(const Globals& g, const ModelOpts& o, std::ostream& out) {
  const auto family = predict::parse_family(o.model);
  const auto records = load_records(o.in);
  const auto built = dataset_for(records, o);

  ordered_json j;
  j["meta"] = meta("train", g.seed);
  j["model"] = std::string(predict::to_string(family));
  j["target"] = o.target;
  j["dimension"] = o.dimension;

  auto finish = [&](predict::PredictorModel model) {
    model.target = predict::parse_target_mode(o.target);
    model.dimension = parse_dimension(o.dimension);
    model.anchors = built.anchors;
    return model;
  };
  predict::PredictorModel model;
  if (o.split == "none") {
    model = finish(predict::train(family, built.data, o.hyper, g.seed));
    j["train_rows"] = built.data.rows.size();
  } else {
    const auto split = predict::split_by_category(built.data, g.seed);
    model = finish(predict::train(family, split.train, o.hyper, g.seed));
    j["train_rows"] = split.train.rows.size();
    j["test_rows"] = split.test.rows.size();
    j["test_questions"] = array_json(split.test_questions);
    j["metrics"] = metrics_json(predict::evaluate(model, split.test));
  }
  predict::save_model(o.out, model);

  const auto text = j.dump(2) + "\n";
  out << text;
  if (!o.metrics_out.empty()) write_file(o.metrics_out, text);
  return kExitOk;
}

struct EvaluateOpts {
  std::string model, in, training_grid;
  PipelineOpts pipe;
};

int cmd_evaluate(const Globals& g, const EvaluateOpts& o, std::ostream& out) {
  const auto model = predict::load_model(o.model);
  const auto records = load_records(o.in);
  predict::DatasetOptions d;
  d.dimension = model.dimension;
  d.target = model.target;
  d.params = o.pipe.params();
  if (model.target == predict::TargetMode::kMos) d.anchors = model.anchors;
  const auto built = predict::build_dataset(records, d);
  const auto metrics = o.training_grid.empty()
                           ? predict::evaluate(model, built.data)
                           : predict::verify_held_out(model, built.data, load_grid(o.training_grid));
  ordered_json j;
  j["meta"] = meta("evaluate", g.seed);
  j["model"] = std::string(predict::to_string(model.family));
  j["rows"] = built.data.rows.size();
  j["metrics"] = metrics_json(metrics);
  out << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_ablate(const Globals& g, const ModelOpts& o, std::ostream&) {
  const auto family = predict::parse_family(o.model);
  const auto built = dataset_for(load_records(o.in), o);
  const auto rows = predict::ablate(built.data, family, o.hyper, g.seed);
  std::string csv = csv_header("ablate", g.seed) + "dropped_feature,srcc,plcc,krcc,rmse\n";
  for (const auto& r : rows) {
    csv += (r.dropped ? std::string(to_string(*r.dropped)) : std::string("none")) + ',' +
           format_double(r.metrics.srcc) + ',' + format_double(r.metrics.plcc) + ',' +
           format_double(r.metrics.krcc) + ',' + format_double(r.metrics.rmse) + '\n';
  }
  write_file(o.out, csv);
  return kExitOk;
}

struct PredictOpts {
  std::string model;
  std::optional<double> rho, alpha, speed, pos, dur;
};

int cmd_predict(const PredictOpts& o, std::ostream& out) {
  const auto model = predict::load_model(o.model);
  const predict::MaskedFeatures x{o.rho, o.alpha, o.speed, o.pos, o.dur};
  const auto p = predict::predict(model, x);
  ordered_json j;
  j["prediction"] = p.clamped;
  j["raw"] = p.raw;
  j["target"] = std::string(predict::to_string(model.target));
  // Record-mode models predict a rating z-score; map it onto the MOS scale too.
  auto range = model.anchors.range.find(model.dimension);
  if (model.target == predict::TargetMode::kRecord && range != model.anchors.range.end()) {
    j["mos_scaled"] = pipeline::rescale(p.raw, range->second.first, range->second.second);
  }
  out << j.dump() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- config

// Appends `--key value` pairs from the JSON config for options of the selected
// subcommand that the command line does not already set.
std::vector<std::string> inject_config(const std::vector<std::string>& args, const ordered_json& cfg,
                                       CLI::App& app) {
  CLI::App* sub = nullptr;
  for (const auto& a : args) {
    if (a.rfind("-", 0) == 0) continue;
    if (auto* s = app.get_subcommand_no_throw(a)) {
      sub = s;
      break;
    }
  }
  std::vector<std::string> out = args;
  auto given = [&](const std::string& flag) {
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    const std::string flag = "--" + it.key();
    if (flag == "--config" || given(flag)) continue;
    CLI::Option* opt = sub != nullptr ? sub->get_option_no_throw(flag) : nullptr;
    if (opt == nullptr) opt = app.get_option_no_throw(flag);
    if (opt == nullptr) continue;
    const auto& v = it.value();
    if (v.is_boolean()) {
      if (v.get<bool>()) out.push_back(flag);
    } else if (v.is_string()) {
      out.push_back(flag);
      out.push_back(v.get<std::string>());
    } else if (v.is_number()) {
      out.push_back(flag);
      out.push_back(v.dump());
    } else {
      throw Error("bad-config", "unsupported value for " + it.key());
    }
  }
  return out;
}

void add_pipeline_flags(CLI::App* c, PipelineOpts& p) {
  c->add_option("--tau", p.tau, "z-score outlier threshold")->capture_default_str();
  c->add_option("--gamma", p.gamma, "rater SRCC threshold")->capture_default_str();
}

void add_model_flags(CLI::App* c, ModelOpts& o) {
  c->add_option("--in", o.in, "ratings JSON Lines")->required();
  c->add_option("--model", o.model, "linear | knn | forest")->capture_default_str();
  c->add_option("--target", o.target, "record | mos")->capture_default_str();
  c->add_option("--dimension", o.dimension, "overall | content | response")->capture_default_str();
  c->add_option("--lambda", o.hyper.ridge_lambda, "ridge penalty")->capture_default_str();
  c->add_option("--k", o.hyper.knn_k, "neighbours for knn")->capture_default_str();
  c->add_option("--trees", o.hyper.trees, "trees in the forest")->capture_default_str();
  c->add_option("--max-depth", o.hyper.max_depth, "tree depth limit")->capture_default_str();
  c->add_option("--min-leaf", o.hyper.min_samples_leaf, "minimum rows per leaf")->capture_default_str();
  c->add_option("--max-features", o.hyper.max_features, "features per split (0 = 2/3)")->capture_default_str();
  add_pipeline_flags(c, o.pipe);
}

std::string first_line(const std::string& s) {
  auto nl = s.find('\n');
  return nl == std::string::npos ? s : s.substr(0, nl);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"QoE toolkit for streaming text services", "qoe"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--log-level", g.log_level, "trace | debug | info | warn | error | off")
      ->capture_default_str();
  auto* seed_opt = app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--config", g.config, "JSON file with option defaults");

  ServeOpts serve;
  auto* c_serve = app.add_subcommand("serve", "run the rating session HTTP service");
  c_serve->add_option("--content", serve.content, "content.json fixture")->required();
  c_serve->add_option("--grid", serve.grid, "grid.json (default: standard grid)");
  c_serve->add_option("--store", serve.store, "record store directory");
  c_serve->add_option("--host", serve.host)->capture_default_str();
  c_serve->add_option("--port", serve.port, "0 picks a free port")->capture_default_str();
  c_serve->add_flag("--virtual-clock", serve.virtual_clock, "stream without real delays");

  SimulateOpts sim;
  auto* c_sim = app.add_subcommand("simulate", "stream a text through the shaper");
  c_sim->add_option("--text-file", sim.text_file);
  c_sim->add_option("--text", sim.text);
  c_sim->add_option("--language", sim.language, "en | zh")->capture_default_str();
  c_sim->add_option("--speed", sim.speed, "seconds per token")->capture_default_str();
  c_sim->add_option("--pause-at", sim.pause_at, "pause position in [0,1)")->capture_default_str();
  c_sim->add_option("--pause-secs", sim.pause_secs, "pause length in seconds")->capture_default_str();
  c_sim->add_flag("--virtual-clock", sim.virtual_clock);
  c_sim->add_option("--trace-out", sim.trace_out, "write the emission trace as JSON");

  SynthOpts syn;
  auto* c_syn = app.add_subcommand("synth", "generate synthetic ratings");
  c_syn->add_option("--world", syn.world, "world.json (default: built-in world)");
  c_syn->add_option("--grid", syn.grid, "grid.json (default: standard grid)");
  c_syn->add_option("--content", syn.content, "content.json (default: 54 standard question ids)");
  c_syn->add_option("--raters", syn.raters)->capture_default_str();
  c_syn->add_option("--conditions", syn.conditions, "conditions per rater (0 = all)")->capture_default_str();
  c_syn->add_option("--out", syn.out, "ratings JSON Lines")->required();
  c_syn->add_option("--profiles-out", syn.profiles_out, "rater profiles JSON Lines");

  ProcessOpts proc;
  auto* c_proc = app.add_subcommand("process", "clean ratings into MOS");
  c_proc->add_option("--in", proc.in, "ratings JSON Lines")->required();
  c_proc->add_option("--out", proc.out, "mos.csv")->required();
  c_proc->add_option("--report", proc.report, "report.json");
  c_proc->add_option("--anchors", proc.anchors, "frozen rescale anchors (JSON)");
  c_proc->add_option("--clean-out", proc.clean_out, "surviving records JSON Lines");
  add_pipeline_flags(c_proc, proc.pipe);

  AnalyzeOpts ana;
  auto* c_ana = app.add_subcommand("analyze", "descriptive analyses over a MOS table");
  c_ana->add_option("kind", ana.kind, "pca | corr | mbti | topics | dist")
      ->required()
      ->check(CLI::IsMember({"pca", "corr", "mbti", "topics", "dist"}));
  c_ana->add_option("--in", ana.in, "mos.csv")->required();
  c_ana->add_option("--records", ana.records, "ratings JSON Lines");
  c_ana->add_option("--raters", ana.raters, "rater profiles JSON Lines (mbti)");
  c_ana->add_option("--content", ana.content, "content.json (topics)");
  c_ana->add_option("--grid", ana.grid, "grid.json (dist levels)");
  c_ana->add_option("--dimension", ana.dimension)->capture_default_str();
  c_ana->add_option("--by", ana.by, "dist grouping feature (default: all)");
  c_ana->add_option("--out", ana.out, "output directory")->required();
  add_pipeline_flags(c_ana, ana.pipe);

  ModelOpts tr;
  auto* c_train = app.add_subcommand("train", "fit a QoE predictor");
  add_model_flags(c_train, tr);
  c_train->add_option("--out", tr.out, "model.bin")->required();
  c_train->add_option("--split", tr.split, "category | none")
      ->capture_default_str()
      ->check(CLI::IsMember({"category", "none"}));
  c_train->add_option("--metrics-out", tr.metrics_out, "write the summary JSON");

  EvaluateOpts ev;
  auto* c_eval = app.add_subcommand("evaluate", "score a model on ratings");
  c_eval->add_option("--model", ev.model, "model.bin")->required();
  c_eval->add_option("--in", ev.in, "ratings JSON Lines")->required();
  c_eval->add_option("--training-grid", ev.training_grid, "require records off this grid");
  add_pipeline_flags(c_eval, ev.pipe);

  ModelOpts ab;
  auto* c_abl = app.add_subcommand("ablate", "drop-one-feature study");
  add_model_flags(c_abl, ab);
  c_abl->add_option("--out", ab.out, "ablation.csv")->required();

  PredictOpts pr;
  auto* c_pred = app.add_subcommand("predict", "predict QoE for one configuration");
  c_pred->add_option("--model", pr.model, "model.bin")->required();
  c_pred->add_option("--rho", pr.rho, "information density (0/1)");
  c_pred->add_option("--alpha", pr.alpha, "content accuracy (0/1)");
  c_pred->add_option("--speed", pr.speed, "seconds per token");
  c_pred->add_option("--pos", pr.pos, "pause position");
  c_pred->add_option("--dur", pr.dur, "pause length in seconds");

  std::vector<std::string> argv = args;
  try {
    // --config is read before parsing so its values can fill unset flags.
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
      if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
      if (!path.empty()) {
        const auto cfg = load_json(path);
        if (!cfg.is_object()) throw Error("bad-config", "config must be a JSON object");
        argv = inject_config(args, cfg, app);
      }
    }
  } catch (const Error& e) {
    err << "error: " << first_line(e.what()) << "\n";
    return kExitDomainError;
  }

  try {
    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage-error: " << first_line(e.what()) << "\n";
    err << "run 'qoe --help' for usage\n";
    return kExitUsage;
  }
  g.seed_given = seed_opt->count() > 0;

  auto log = logger();
  const auto level = spdlog::level::from_str(g.log_level);
  if (level == spdlog::level::off && g.log_level != "off") {
    err << "usage-error: unknown log level " << g.log_level << "\n";
    return kExitUsage;
  }
  log->set_level(level);

  try {
    if (c_serve->parsed()) return cmd_serve(g, serve, out);
    if (c_sim->parsed()) return cmd_simulate(g, sim, out);
    if (c_syn->parsed()) return cmd_synth(g, syn, out);
    if (c_proc->parsed()) return cmd_process(g, proc, out);
    if (c_ana->parsed()) return cmd_analyze(g, ana, out);
    if (c_train->parsed()) return cmd_train(g, tr, out);
    if (c_eval->parsed()) return cmd_evaluate(g, ev, out);
    if (c_abl->parsed()) return cmd_ablate(g, ab, out);
    if (c_pred->parsed()) return cmd_predict(pr, out);
  } catch (const Error& e) {
    if (e.code() == "usage") {
      err << "usage-error: " << first_line(e.detail()) << "\n";
      return kExitUsage;
    }
    err << "error: " << first_line(e.what()) << "\n";
    return kExitDomainError;
  } catch (const std::exception& e) {
    err << "error: internal: " << first_line(e.what()) << "\n";
    return kExitDomainError;
  }
  return kExitUsage;
}

}  // namespace qoe::cli
