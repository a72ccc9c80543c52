#include "qoe/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "qoe/error.hpp"

namespace qoe {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw Error("format-error", "cannot format double");
  return std::string(buf, ptr);
}

ordered_json to_json(const QosConfig& qos) {
  ordered_json j;
  j["speed"] = qos.speed_s_per_token;
  j["pause_pos"] = qos.pause_pos;
  j["pause_dur"] = qos.pause_dur_s;
  return j;
}

ordered_json to_json(const ContentConfig& content) {
  ordered_json j;
  j["density"] = content.density ? 1 : 0;
  j["accuracy"] = content.accuracy ? 1 : 0;
  return j;
}

ordered_json to_json(const RaterProfile& profile) {
  ordered_json j;
  j["rater_id"] = profile.rater_id;
  j["language"] = to_string(profile.language);
  j["mbti"] = profile.mbti;
  j["patience"] = profile.patience;
  j["sessions_completed"] = profile.sessions_completed;
  return j;
}

ordered_json to_json(const RatingRecord& record) {
  ordered_json j;
  j["session_id"] = record.session_id;
  j["rater_id"] = record.rater_id;
  j["question_id"] = record.question_id;
  j["category"] = to_string(record.category);
  j["content"] = to_json(record.content);
  j["qos"] = to_json(record.qos);
  ordered_json scores = ordered_json::object();
  for (auto d : kDimensions) {
    if (auto it = record.scores.find(d); it != record.scores.end()) {
      scores[std::string(to_string(d))] = it->second;
    }
  }
  j["scores"] = std::move(scores);
  j["timestamp"] = format_timestamp(record.timestamp);
  return j;
}

ordered_json to_json(const ExperimentGrid& grid) {
  ordered_json j;
  j["speeds"] = grid.speeds;
  j["pause_positions"] = grid.pause_positions;
  j["pause_durations"] = grid.pause_durations;
  j["content_configs"] = ordered_json::array();
  for (const auto& c : grid.content_configs) j["content_configs"].push_back(to_json(c));
  return j;
}

ordered_json to_json(const ContentFixture& fixture) {
  ordered_json arr = ordered_json::array();
  for (const auto& q : fixture.questions) {
    ordered_json j;
    j["question_id"] = q.question_id;
    j["category"] = to_string(q.category);
    j["language"] = to_string(q.language);
    j["question_text"] = q.question_text;
    j["variants"] = ordered_json::array();
    for (const auto& [cfg, text] : q.variants) {
      ordered_json v;
      v["density"] = cfg.density ? 1 : 0;
      v["accuracy"] = cfg.accuracy ? 1 : 0;
      v["answer_text"] = text;
      j["variants"].push_back(std::move(v));
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

namespace {

const ordered_json& field(const ordered_json& j, const char* key) {
  if (!j.is_object()) throw Error("bad-json", std::string("expected object holding '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) throw Error("missing-field", key);
  return *it;
}

bool flag_from_json(const ordered_json& j, const char* key) {
  const auto& v = field(j, key);
  if (v.is_boolean()) return v.get<bool>();
  if (!v.is_number_integer()) throw Error("bad-content", std::string(key) + " must be 0 or 1");
  const auto x = v.get<long long>();
  if (x != 0 && x != 1) throw Error("bad-content", std::string(key) + " must be 0 or 1");
  return x == 1;
}

double number(const ordered_json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number()) throw Error("bad-json", std::string(key) + " must be a number");
  return v.get<double>();
}

std::string text(const ordered_json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_string()) throw Error("bad-json", std::string(key) + " must be a string");
  return v.get<std::string>();
}

std::vector<double> numbers(const ordered_json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_array()) throw Error("bad-grid", std::string(key) + " must be an array");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw Error("bad-grid", std::string(key) + " must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

QosConfig qos_from_json(const ordered_json& j) {
  QosConfig q{number(j, "speed"), number(j, "pause_pos"), number(j, "pause_dur")};
  if (auto err = validate_qos(q)) throw Error(err->code, err->field);
  return q;
}

ContentConfig content_from_json(const ordered_json& j) {
  return {flag_from_json(j, "density"), flag_from_json(j, "accuracy")};
}

RaterProfile profile_from_json(const ordered_json& j) {
  RaterProfile p;
  if (j.contains("rater_id")) p.rater_id = text(j, "rater_id");
  p.language = j.contains("language") ? parse_language(text(j, "language")) : Language::kEn;
  p.mbti = text(j, "mbti");
  const auto& patience = field(j, "patience");
  if (!patience.is_number_integer()) throw Error("bad-patience", "patience must be an integer");
  p.patience = patience.get<int>();
  if (j.contains("sessions_completed")) p.sessions_completed = field(j, "sessions_completed").get<int>();
  return p;
}

std::map<Dimension, int> scores_from_json(const ordered_json& j) {
  if (!j.is_object()) throw Error("bad-json", "scores must be an object");
  std::map<Dimension, int> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto dim = parse_dimension(it.key());
    const auto& v = it.value();
    if (!v.is_number_integer()) {
      if (v.is_number()) throw Error("score-out-of-range", it.key() + " must be an integer");
      throw Error("bad-json", it.key() + " must be an integer");
    }
    const auto x = v.get<long long>();
    out[dim] = (x < -1000 || x > 1000) ? 0 : static_cast<int>(x);
  }
  return out;
}

RatingRecord record_from_json(const ordered_json& j) {
  RatingRecord r;
  r.session_id = text(j, "session_id");
  r.rater_id = text(j, "rater_id");
  r.question_id = text(j, "question_id");
  r.category = parse_category(text(j, "category"));
  r.content = content_from_json(field(j, "content"));
  r.qos = qos_from_json(field(j, "qos"));
  r.scores = scores_from_json(field(j, "scores"));
  r.timestamp = parse_timestamp(text(j, "timestamp"));
  return r;
}

ExperimentGrid grid_from_json(const ordered_json& j) {
  ExperimentGrid g;
  g.speeds = numbers(j, "speeds");
  g.pause_positions = numbers(j, "pause_positions");
  g.pause_durations = numbers(j, "pause_durations");
  for (const auto& c : field(j, "content_configs")) g.content_configs.push_back(content_from_json(c));
  if (g.speeds.empty() || g.pause_positions.empty() || g.pause_durations.empty() ||
      g.content_configs.empty()) {
    throw Error("bad-grid", "every grid axis needs at least one level");
  }
  for (const auto& q : g.qos_points()) {
    if (auto err = validate_qos(q)) throw Error("bad-grid", err->field);
  }
  return g;
}

ContentFixture content_fixture_from_json(const ordered_json& j) {
  const ordered_json& arr = j.is_object() ? field(j, "questions") : j;
  if (!arr.is_array()) throw Error("bad-content", "expected an array of questions");
  ContentFixture fixture;
  for (const auto& item : arr) {
    Question q;
    q.question_id = text(item, "question_id");
    q.category = parse_category(text(item, "category"));
    q.language = parse_language(text(item, "language"));
    q.question_text = text(item, "question_text");
    for (const auto& v : field(item, "variants")) {
      q.variants[{flag_from_json(v, "density"), flag_from_json(v, "accuracy")}] =
          text(v, "answer_text");
    }
    if (q.variants.size() != 4) {
      throw Error("bad-content", "question " + q.question_id + " must provide all four variants");
    }
    if (fixture.find(q.question_id) != nullptr) {
      throw Error("bad-content", "duplicate question_id " + q.question_id);
    }
    fixture.questions.push_back(std::move(q));
  }
  return fixture;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("file-not-found", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io-error", "cannot write " + path.string());
  out << data;
  if (!out) throw Error("io-error", "short write to " + path.string());
}

namespace {
ordered_json parse_json(const std::string& s, const std::string& what) {
  try {
    return ordered_json::parse(s);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("bad-json", what + ": " + e.what());
  }
}
}  // namespace

ExperimentGrid load_grid(const std::filesystem::path& path) {
  return grid_from_json(parse_json(read_file(path), path.string()));
}

ContentFixture load_content(const std::filesystem::path& path) {
  return content_fixture_from_json(parse_json(read_file(path), path.string()));
}

std::vector<RatingRecord> read_records(std::istream& in) {
  std::vector<RatingRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(ordered_json::parse(line)));
    } catch (const Error& e) {
      throw Error("bad-record", "line " + std::to_string(n) + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw Error("bad-record", "line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::vector<RatingRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("file-not-found", path.string());
  return read_records(in);
}

std::string records_to_jsonl(const std::vector<RatingRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

void save_records(const std::filesystem::path& path, const std::vector<RatingRecord>& records) {
  write_file(path, records_to_jsonl(records));
}

std::vector<RaterProfile> load_profiles(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<RaterProfile> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(profile_from_json(parse_json(line, path.string())));
  }
  return out;
}

void save_profiles(const std::filesystem::path& path, const std::vector<RaterProfile>& profiles) {
  std::string out;
  for (const auto& p : profiles) out += to_json(p).dump() + "\n";
  write_file(path, out);
}

std::string mos_to_csv(const MosTable& table) {
  std::string out =
      "question_id,density,accuracy,speed,pause_pos,pause_dur,dimension,mos_z,mos_scaled,n_valid\n";
  for (const auto& [key, e] : table.entries) {
    const auto& c = key.condition;
    out += c.question_id + ',' + (c.content.density ? "1" : "0") + ',' +
           (c.content.accuracy ? "1" : "0") + ',' + format_double(c.qos.speed_s_per_token) + ',' +
           format_double(c.qos.pause_pos) + ',' + format_double(c.qos.pause_dur_s) + ',' +
           std::string(to_string(key.dimension)) + ',' + format_double(e.mos_z) + ',' +
           format_double(e.mos_scaled) + ',' + std::to_string(e.n_valid) + '\n';
  }
  return out;
}

namespace {
double parse_number(const std::string& s, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error("bad-csv", "line " + std::to_string(line) + ": not a number: " + s);
  }
  return v;
}
}  // namespace

MosTable mos_from_csv(const std::string& csv) {
  MosTable table;
  std::istringstream in(csv);
  std::string line;
  std::size_t n = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 10) throw Error("bad-csv", "line " + std::to_string(n) + ": expected 10 columns");
    MosKey key;
    key.condition.question_id = cells[0];
    key.condition.content = {cells[1] == "1", cells[2] == "1"};
    key.condition.qos = {parse_number(cells[3], n), parse_number(cells[4], n),
                         parse_number(cells[5], n)};
    key.dimension = parse_dimension(cells[6]);
    MosEntry e{parse_number(cells[7], n), parse_number(cells[8], n),
               static_cast<std::size_t>(parse_number(cells[9], n))};
    auto& range = table.anchors.range;
    auto it = range.find(key.dimension);
    if (it == range.end()) {
      range[key.dimension] = {e.mos_z, e.mos_z};
    } else {
      it->second.first = std::min(it->second.first, e.mos_z);
      it->second.second = std::max(it->second.second, e.mos_z);
    }
    table.entries[key] = e;
  }
  return table;
}

ordered_json to_json(const RescaleAnchors& anchors) {
  ordered_json j = ordered_json::object();
  for (const auto& [dim, mm] : anchors.range) {
    j[std::string(to_string(dim))] = {{"min", mm.first}, {"max", mm.second}};
  }
  return j;
}

RescaleAnchors anchors_from_json(const ordered_json& j) {
  RescaleAnchors a;
  if (!j.is_object()) throw Error("bad-anchors", "expected object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    a.range[parse_dimension(it.key())] = {number(it.value(), "min"), number(it.value(), "max")};
  }
  return a;
}

}  // namespace qoe
