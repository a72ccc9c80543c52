#include "qoe/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <set>

#include "qoe/error.hpp"

namespace qoe {

std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::kOverall:
      return "overall";
    case Dimension::kContent:
      return "content";
    case Dimension::kResponse:
      return "response";
  }
  return "overall";
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::kKnowledgeReasoning:
      return "knowledge_reasoning";
    case Category::kCreativeTasks:
      return "creative_tasks";
    case Category::kLifestyleEntertainment:
      return "lifestyle_entertainment";
    case Category::kEmpathyPersonalGrowth:
      return "empathy_personal_growth";
    case Category::kSocietyProfessional:
      return "society_professional";
  }
  return "knowledge_reasoning";
}

std::string_view to_string(Language l) { return l == Language::kZh ? "zh" : "en"; }

Dimension parse_dimension(std::string_view s) {
  for (auto d : kDimensions) {
    if (to_string(d) == s) return d;
  }
  throw Error("unknown-dimension", std::string(s));
}

Category parse_category(std::string_view s) {
  for (auto c : kCategories) {
    if (to_string(c) == s) return c;
  }
  throw Error("unknown-category", std::string(s));
}

Language parse_language(std::string_view s) {
  if (s == "zh") return Language::kZh;
  if (s == "en") return Language::kEn;
  throw Error("bad-language", std::string(s));
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto secs = floor<seconds>(t);
  const auto millis = (t - secs).count();
  const std::time_t tt = secs.time_since_epoch().count();
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<int>(millis));
  return buf;
}

Timestamp parse_timestamp(std::string_view s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0, ms = 0;
  const std::string str(s);
  char tail = 0;
  const int n = std::sscanf(str.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3d%c", &y, &mo, &d, &h, &mi,
                            &sec, &ms, &tail);
  if (n != 8 || tail != 'Z' || str.size() != 24) {
    throw Error("bad-timestamp", str);
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw Error("bad-timestamp", str);
  return time_point_cast<milliseconds>(sys_days{ymd}) + hours{h} + minutes{mi} + seconds{sec} +
         milliseconds{ms};
}

Timestamp now_utc() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

bool is_valid_mbti(std::string_view code) {
  static constexpr std::array<std::string_view, 4> kAxes{"EI", "SN", "TF", "JP"};
  if (code.size() != 4) return false;
  for (std::size_t i = 0; i < 4; ++i) {
    if (kAxes[i].find(code[i]) == std::string_view::npos) return false;
  }
  return true;
}

char mbti_letter(std::string_view code, int axis) {
  if (!is_valid_mbti(code)) throw Error("bad-mbti", std::string(code));
  if (axis < 0 || axis > 3) throw Error("bad-axis", std::to_string(axis));
  return code[static_cast<std::size_t>(axis)];
}

std::optional<ValidationError> validate_scores(const std::map<Dimension, int>& scores) {
  for (auto d : kDimensions) {
    auto it = scores.find(d);
    if (it == scores.end()) return ValidationError{"missing-dimension", std::string(to_string(d))};
    if (it->second < kMinScore || it->second > kMaxScore) {
      return ValidationError{"score-out-of-range", std::string(to_string(d))};
    }
  }
  return std::nullopt;
}

std::optional<ValidationError> validate_qos(const QosConfig& qos) {
  if (!(qos.speed_s_per_token > 0.0) || !std::isfinite(qos.speed_s_per_token)) {
    return ValidationError{"bad-qos", "speed"};
  }
  if (!(qos.pause_pos >= 0.0 && qos.pause_pos < 1.0)) return ValidationError{"bad-qos", "pause_pos"};
  if (!(qos.pause_dur_s >= 0.0) || !std::isfinite(qos.pause_dur_s)) {
    return ValidationError{"bad-qos", "pause_dur"};
  }
  return std::nullopt;
}

std::optional<ValidationError> validate_record(const RatingRecord& record,
                                               const ContentFixture* fixture) {
  if (auto err = validate_scores(record.scores)) return err;
  if (record.scores.size() != kDimensions.size()) {
    return ValidationError{"missing-dimension", "scores"};
  }
  if (auto err = validate_qos(record.qos)) return err;
  if (record.rater_id.empty()) return ValidationError{"missing-field", "rater_id"};
  if (record.question_id.empty()) return ValidationError{"missing-field", "question_id"};
  if (fixture != nullptr && fixture->find(record.question_id) == nullptr) {
    return ValidationError{"unknown-question", "question_id"};
  }
  return std::nullopt;
}

std::optional<ValidationError> validate_profile(const RaterProfile& profile) {
  if (!is_valid_mbti(profile.mbti)) return ValidationError{"bad-mbti", "mbti"};
  if (profile.patience < 1 || profile.patience > 5) {
    return ValidationError{"bad-patience", "patience"};
  }
  if (profile.sessions_completed < 0 || profile.sessions_completed > kMaxSessionsPerRater) {
    return ValidationError{"bad-sessions", "sessions_completed"};
  }
  return std::nullopt;
}

void validate_store(const std::vector<RatingRecord>& records, const ContentFixture* fixture) {
  std::set<std::pair<std::string, ConditionId>> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (auto err = validate_record(r, fixture)) {
      throw Error(err->code, "record " + std::to_string(i + 1) + ": " + err->field);
    }
    if (!seen.emplace(r.rater_id, r.condition()).second) {
      throw Error("duplicate-rating", "record " + std::to_string(i + 1) + ": rater " + r.rater_id +
                                          " already rated question " + r.question_id +
                                          " under this condition");
    }
  }
}

std::string_view to_string(Feature f) {
  switch (f) {
    case Feature::kDensity:
      return "density";
    case Feature::kAccuracy:
      return "accuracy";
    case Feature::kSpeed:
      return "speed";
    case Feature::kPausePos:
      return "pause_pos";
    case Feature::kPauseDur:
      return "pause_dur";
  }
  return "density";
}

Feature parse_feature(std::string_view s) {
  for (auto f : kFeatures) {
    if (to_string(f) == s) return f;
  }
  throw Error("unknown-feature", std::string(s));
}

FeatureVector to_feature_vector(const ContentConfig& content, const QosConfig& qos) {
  return {content.density ? 1.0 : 0.0, content.accuracy ? 1.0 : 0.0, qos.speed_s_per_token,
          qos.pause_pos, qos.pause_dur_s};
}

std::pair<ContentConfig, QosConfig> from_feature_vector(const FeatureVector& x) {
  auto flag = [](double v, const char* name) {
    if (v == 0.0) return false;
    if (v == 1.0) return true;
    throw Error("bad-feature", std::string(name) + " must be 0 or 1");
  };
  return {ContentConfig{flag(x[0], "density"), flag(x[1], "accuracy")},
          QosConfig{x[2], x[3], x[4]}};
}

void validate(const PipelineParams& params) {
  if (!(params.z_outlier_threshold > 0.0)) throw Error("bad-params", "tau must be > 0");
  if (!(params.srcc_threshold >= -1.0 && params.srcc_threshold <= 1.0)) {
    throw Error("bad-params", "gamma must lie in [-1, 1]");
  }
}

std::vector<QosConfig> ExperimentGrid::qos_points() const {
  std::vector<QosConfig> out;
  out.reserve(speeds.size() * pause_positions.size() * pause_durations.size());
  for (double v : speeds) {
    for (double p : pause_positions) {
      for (double t : pause_durations) out.push_back({v, p, t});
    }
  }
  return out;
}

std::vector<std::pair<ContentConfig, QosConfig>> ExperimentGrid::combinations() const {
  std::vector<std::pair<ContentConfig, QosConfig>> out;
  const auto qos = qos_points();
  for (const auto& c : content_configs) {
    for (const auto& q : qos) out.emplace_back(c, q);
  }
  return out;
}

bool ExperimentGrid::contains(const QosConfig& qos) const {
  auto has = [](const std::vector<double>& xs, double x) {
    return std::find(xs.begin(), xs.end(), x) != xs.end();
  };
  return has(speeds, qos.speed_s_per_token) && has(pause_positions, qos.pause_pos) &&
         has(pause_durations, qos.pause_dur_s);
}

namespace {
std::vector<ContentConfig> all_content_configs() {
  return {{false, false}, {false, true}, {true, false}, {true, true}};
}
}  // namespace

ExperimentGrid standard_grid() {
  return {{0.01, 0.05, 0.1}, {0.0, 0.25, 0.5, 0.75}, {3.0, 5.0, 7.0}, all_content_configs()};
}

ExperimentGrid held_out_grid() {
  return {{0.03, 0.06}, {0.3, 0.6}, {1.0, 9.0}, all_content_configs()};
}

const Question* ContentFixture::find(std::string_view question_id) const {
  for (const auto& q : questions) {
    if (q.question_id == question_id) return &q;
  }
  return nullptr;
}

ContentFixture standard_question_set() {
  static constexpr std::array<int, 5> kSizes{14, 5, 10, 10, 15};
  ContentFixture fixture;
  int n = 0;
  for (std::size_t c = 0; c < kCategories.size(); ++c) {
    for (int i = 0; i < kSizes[c]; ++i) {
      ++n;
      char id[16];
      std::snprintf(id, sizeof id, "q%02d", n);
      Question q;
      q.question_id = id;
      q.category = kCategories[c];
      q.question_text = "Question " + std::to_string(n);
      for (const auto& cc : all_content_configs()) {
        q.variants[cc] = "Answer " + std::to_string(n) + " (density " +
                         std::to_string(cc.density) + ", accuracy " +
                         std::to_string(cc.accuracy) + ").";
      }
      fixture.questions.push_back(std::move(q));
    }
  }
  return fixture;
}

}  // namespace qoe
