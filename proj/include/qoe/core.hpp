#pragma once

#include <array>
#include <chrono>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qoe {

/// Service-quality tuple governing stream timing: seconds per token, the
/// fractional position of the pause, and the pause length in seconds.
struct QosConfig {
  double speed_s_per_token = 0.05;
  double pause_pos = 0.0;
  double pause_dur_s = 3.0;

  auto operator<=>(const QosConfig&) const = default;
};

/// Binary content-quality tuple: information density and content accuracy.
struct ContentConfig {
  bool density = false;
  bool accuracy = false;

  auto operator<=>(const ContentConfig&) const = default;
};

struct ConditionId {
  std::string question_id;
  ContentConfig content;
  QosConfig qos;

  auto operator<=>(const ConditionId&) const = default;
};

enum class Dimension { kOverall, kContent, kResponse };
inline constexpr std::array<Dimension, 3> kDimensions{Dimension::kOverall, Dimension::kContent,
                                                      Dimension::kResponse};

enum class Category {
  kKnowledgeReasoning,
  kCreativeTasks,
  kLifestyleEntertainment,
  kEmpathyPersonalGrowth,
  kSocietyProfessional,
};
inline constexpr std::array<Category, 5> kCategories{
    Category::kKnowledgeReasoning, Category::kCreativeTasks, Category::kLifestyleEntertainment,
    Category::kEmpathyPersonalGrowth, Category::kSocietyProfessional};

enum class Language { kZh, kEn };

std::string_view to_string(Dimension d);
std::string_view to_string(Category c);
std::string_view to_string(Language l);
Dimension parse_dimension(std::string_view s);
Category parse_category(std::string_view s);
Language parse_language(std::string_view s);

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

/// ISO-8601 UTC with millisecond precision, e.g. "2025-01-01T00:00:00.000Z".
std::string format_timestamp(Timestamp t);
Timestamp parse_timestamp(std::string_view s);
Timestamp now_utc();

struct RaterProfile {
  std::string rater_id;
  Language language = Language::kEn;
  std::string mbti;
  int patience = 3;
  int sessions_completed = 0;

  bool operator==(const RaterProfile&) const = default;
};

inline constexpr int kMaxSessionsPerRater = 4;
inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 5;

/// True iff `code` is one of the 16 four-letter types over {E|I}{S|N}{T|F}{J|P}.
bool is_valid_mbti(std::string_view code);

/// MBTI axis index 0..3 (E/I, S/N, T/F, J/P); returns the rater's letter on it.
char mbti_letter(std::string_view code, int axis);

struct RatingRecord {
  std::string session_id;
  std::string rater_id;
  std::string question_id;
  Category category = Category::kKnowledgeReasoning;
  ContentConfig content;
  QosConfig qos;
  std::map<Dimension, int> scores;
  Timestamp timestamp{};

  ConditionId condition() const { return {question_id, content, qos}; }
  bool operator==(const RatingRecord&) const = default;
};

struct ValidationError {
  std::string code;
  std::string field;
};

struct ContentFixture;

/// First violated RatingRecord invariant, or nullopt when the record is valid.
/// Question existence is only checked when a fixture is supplied.
std::optional<ValidationError> validate_record(const RatingRecord& record,
                                               const ContentFixture* fixture = nullptr);
std::optional<ValidationError> validate_scores(const std::map<Dimension, int>& scores);
std::optional<ValidationError> validate_qos(const QosConfig& qos);
std::optional<ValidationError> validate_profile(const RaterProfile& profile);
/// Validates every record plus the store-wide rule that a (rater, question,
/// content, qos) tuple appears at most once. Throws Error on the first violation.
void validate_store(const std::vector<RatingRecord>& records,
                    const ContentFixture* fixture = nullptr);

enum class Feature { kDensity, kAccuracy, kSpeed, kPausePos, kPauseDur };
inline constexpr std::size_t kFeatureCount = 5;
inline constexpr std::array<Feature, kFeatureCount> kFeatures{
    Feature::kDensity, Feature::kAccuracy, Feature::kSpeed, Feature::kPausePos, Feature::kPauseDur};
std::string_view to_string(Feature f);
Feature parse_feature(std::string_view s);

/// Ordered (density, accuracy, speed, pause_pos, pause_dur).
using FeatureVector = std::array<double, kFeatureCount>;

FeatureVector to_feature_vector(const ContentConfig& content, const QosConfig& qos);
std::pair<ContentConfig, QosConfig> from_feature_vector(const FeatureVector& x);

struct PipelineParams {
  double z_outlier_threshold = 2.0;
  double srcc_threshold = 0.5;
};
void validate(const PipelineParams& params);

struct MosEntry {
  double mos_z = 0.0;
  double mos_scaled = 0.0;
  std::size_t n_valid = 0;
};

struct MosKey {
  ConditionId condition;
  Dimension dimension = Dimension::kOverall;
  auto operator<=>(const MosKey&) const = default;
};

/// Min/max of per-condition mos_z per dimension, used for the linear map to [0,5].
struct RescaleAnchors {
  std::map<Dimension, std::pair<double, double>> range;
};

struct MosTable {
  std::map<MosKey, MosEntry> entries;
  RescaleAnchors anchors;
};

struct ExperimentGrid {
  std::vector<double> speeds;
  std::vector<double> pause_positions;
  std::vector<double> pause_durations;
  std::vector<ContentConfig> content_configs;

  /// All QoS points, speed-major then position then duration.
  std::vector<QosConfig> qos_points() const;
  /// Every (content, qos) combination, content-major.
  std::vector<std::pair<ContentConfig, QosConfig>> combinations() const;
  bool contains(const QosConfig& qos) const;
};

/// 3 speeds x 4 pause positions x 3 pause durations x 4 content configs.
ExperimentGrid standard_grid();
/// Off-grid QoS points used for held-out verification.
ExperimentGrid held_out_grid();

struct Question {
  std::string question_id;
  Category category = Category::kKnowledgeReasoning;
  Language language = Language::kEn;
  std::string question_text;
  std::map<ContentConfig, std::string> variants;
};

struct ContentFixture {
  std::vector<Question> questions;

  const Question* find(std::string_view question_id) const;
};

/// 54 placeholder questions with the 14/5/10/10/15 category layout.
ContentFixture standard_question_set();

}  // namespace qoe
