#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qoe/core.hpp"

namespace qoe::predict {

enum class Family { kLinearRidge, kKnn, kTreeEnsemble };
std::string_view to_string(Family f);
/// Accepts "linear"/"linear-ridge", "knn", "forest"/"tree-ensemble".
Family parse_family(std::string_view s);

/// kRecord: one row per surviving rating, target = that rating's z-score.
/// kMos: one row per condition, target = mos_scaled.
enum class TargetMode { kRecord, kMos };
std::string_view to_string(TargetMode m);
TargetMode parse_target_mode(std::string_view s);

using FeatureMask = std::array<bool, kFeatureCount>;
inline constexpr FeatureMask kAllFeatures{true, true, true, true, true};

struct Row {
  FeatureVector x{};
  double target = 0.0;
  std::string question_id;
  Category category = Category::kKnowledgeReasoning;
  Dimension dimension = Dimension::kOverall;
};

struct Dataset {
  std::vector<Row> rows;
  FeatureMask mask = kAllFeatures;
};

struct DatasetOptions {
  Dimension dimension = Dimension::kOverall;
  TargetMode target = TargetMode::kRecord;
  PipelineParams params;
  /// Frozen rescale anchors for kMos targets (e.g. taken from a trained model).
  std::optional<RescaleAnchors> anchors;
};

struct BuiltDataset {
  Dataset data;
  RescaleAnchors anchors;
};

/// Cleans `records` with the label pipeline and turns the survivors into rows
/// for one rating dimension.
BuiltDataset build_dataset(const std::vector<RatingRecord>& records, const DatasetOptions& options);

struct Split {
  Dataset train;
  Dataset test;
  std::vector<std::string> test_questions;
};

/// One question per category (seeded choice over the sorted question ids) goes
/// to test with all of its rows; every other question trains. Throws
/// category-too-small when a category holds fewer than two questions.
Split split_by_category(const Dataset& dataset, std::uint64_t seed);

struct Hyperparameters {
  double ridge_lambda = 1e-6;
  int knn_k = 5;
  int trees = 100;
  int max_depth = 8;
  int min_samples_leaf = 5;
  /// Features considered per split; 0 selects ceil(2/3 of the active features).
  int max_features = 0;
  /// Bootstrap sample size as a fraction of the training rows.
  double sample_fraction = 1.0;
};

struct LinearState {
  std::vector<double> weights;  // raw units, one per active feature
  double intercept = 0.0;
};

struct KnnState {
  int k = 5;
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<std::vector<double>> points;  // standardized active features
  std::vector<double> targets;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;
};

struct ForestState {
  std::vector<Tree> trees;
};

struct Fingerprint {
  std::uint64_t seed = 0;
  std::size_t rows = 0;
};

struct PredictorModel {
  Family family = Family::kLinearRidge;
  FeatureMask mask = kAllFeatures;
  Fingerprint fingerprint;
  Hyperparameters hyper;
  TargetMode target = TargetMode::kRecord;
  Dimension dimension = Dimension::kOverall;
  RescaleAnchors anchors;
  std::variant<LinearState, KnnState, ForestState> state;
};

/// Throws empty-train, or singular-system for a rank-deficient linear design
/// with ridge_lambda == 0.
PredictorModel train(Family family, const Dataset& train_set, const Hyperparameters& hyper,
                     std::uint64_t seed);

/// Explicit linear model (weights over the active features of `mask`).
PredictorModel linear_model(const std::vector<double>& weights, double intercept,
                            const FeatureMask& mask = kAllFeatures);

/// Feature input with explicit presence; a value for a masked-out feature or a
/// missing value for an active one is a mask-mismatch.
using MaskedFeatures = std::array<std::optional<double>, kFeatureCount>;
MaskedFeatures masked(const FeatureVector& x, const FeatureMask& mask);

struct Prediction {
  double raw = 0.0;
  double clamped = 0.0;  // raw clamped to [0, 5]
};

Prediction predict(const PredictorModel& model, const MaskedFeatures& features);
/// Applies the model's mask to a full feature vector.
double predict_full(const PredictorModel& model, const FeatureVector& x);

struct MetricsBundle {
  double srcc = 0.0;
  double plcc = 0.0;
  double krcc = 0.0;
  double rmse = 0.0;
};

/// SRCC/PLCC/KRCC (tau-b)/RMSE between predictions and targets. Throws
/// degenerate-test for empty input or when both sides are constant; a single
/// constant side yields zero correlations.
MetricsBundle compute_metrics(const std::vector<double>& predictions,
                              const std::vector<double>& targets);

MetricsBundle evaluate(const PredictorModel& model, const Dataset& test_set);

struct AblationRow {
  std::optional<Feature> dropped;  // nullopt = full feature set
  MetricsBundle metrics;
};

/// Full-feature row first, then one row per dropped feature; every row uses the
/// same category split.
std::vector<AblationRow> ablate(const Dataset& dataset, Family family, const Hyperparameters& hyper,
                                std::uint64_t seed);

/// Evaluates on records whose QoS points all lie off `training_grid`.
MetricsBundle verify_held_out(const PredictorModel& model, const Dataset& held_out,
                              const ExperimentGrid& training_grid);

std::vector<std::uint8_t> serialize(const PredictorModel& model);
PredictorModel deserialize(const std::vector<std::uint8_t>& bytes);
void save_model(const std::filesystem::path& path, const PredictorModel& model);
PredictorModel load_model(const std::filesystem::path& path);

}  // namespace qoe::predict
