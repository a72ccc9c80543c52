#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qoe/core.hpp"

namespace qoe::analysis {

using Vector5 = std::array<double, kFeatureCount>;
using Matrix5 = std::array<Vector5, kFeatureCount>;

struct Covariance {
  Vector5 mean{};
  Matrix5 sigma{};
};

/// Sigma = (1/n) sum (x_i - mean)(x_i - mean)^T. Throws too-few-samples for n < 2.
Covariance covariance(const std::vector<Vector5>& samples);

struct Eigen {
  Vector5 values{};   // descending
  Matrix5 vectors{};  // vectors[k] is the k-th unit eigenvector
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
/// 1e-12 relative to the matrix scale. Eigenvectors are sign-normalized so the
/// largest-magnitude entry is non-negative.
Eigen eigen_symmetric(const Matrix5& m);

struct PcaResult {
  Vector5 mean{};
  Vector5 scale{};  // per-feature population sd used for standardization (1 when constant)
  Matrix5 covariance{};
  Vector5 eigenvalues{};
  Matrix5 components{};
  Vector5 explained_variance_ratio{};
  std::vector<Vector5> scores;
};

/// Decomposition of an already computed covariance matrix (no samples/scores).
PcaResult pca_from_covariance(const Matrix5& sigma);

/// Standardizes each feature (zero mean, unit population variance; constant
/// features are only centered), then decomposes the covariance and projects:
/// score_k = w_k . (z - mean(z)).
PcaResult pca(const std::vector<Vector5>& samples);

/// Projects raw samples with the standardization and components of `fit`.
std::vector<Vector5> project(const PcaResult& fit, const std::vector<Vector5>& samples);

struct CorrelationMatrix {
  std::array<Dimension, 3> dims = kDimensions;
  std::array<std::array<double, 3>, 3> values{};
};

/// Pairwise Pearson correlation of per-condition MOS (mos_scaled) across the
/// three rating dimensions, over conditions carrying all three.
CorrelationMatrix dimension_correlations(const MosTable& mos);

struct MbtiSplit {
  char first_letter = 'E';
  char second_letter = 'I';
  std::vector<RatingRecord> first;
  std::vector<RatingRecord> second;
};

/// Partitions records by each rater's letter on `axis` (0 E/I, 1 S/N, 2 T/F,
/// 3 J/P), preserving input order. Throws unknown-rater for records whose
/// rater has no profile.
MbtiSplit group_by_mbti(const std::vector<RatingRecord>& records,
                        const std::map<std::string, RaterProfile>& profiles, int axis);
int parse_mbti_axis(std::string_view axis);

enum class Tier { kLow, kMid, kHigh };
std::string_view to_string(Tier t);
/// high: mos > 4.0; mid: 2.0 <= mos <= 4.0; low: mos < 2.0.
Tier tier_of(double mos);

struct TierSample {
  double mos = 0.0;
  Category category = Category::kKnowledgeReasoning;
};

struct TierSummary {
  std::map<Tier, std::map<Category, double>> mean;
  std::map<Tier, std::map<Category, std::size_t>> count;
};

/// Mean MOS per category within each tier. Empty tiers are absent.
TierSummary topic_tiers(const std::vector<TierSample>& samples);

struct FiveNumber {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

/// Nearest-rank quartiles: Q_p = sorted[ceil(p * n) - 1]. Requires a non-empty input.
FiveNumber five_number_summary(std::vector<double> values);

struct LevelDistribution {
  std::string level;  // e.g. "A1", "S0.05", "P0.0", "T3"
  std::vector<double> samples;
  FiveNumber summary;
};

struct DistributionExport {
  Feature grouping = Feature::kAccuracy;
  std::vector<LevelDistribution> levels;
  std::vector<std::string> warnings;
};

/// Parameter id for a feature level: D0/D1, A0/A1, S<speed>, P<pos>, T<dur>.
std::string level_label(Feature f, double value);

/// Groups the mos_scaled values of `dimension` by the level of `grouping`.
/// Levels listed in `expected_levels` that have no samples are reported as
/// warnings and omitted.
DistributionExport distribution_export(const MosTable& mos, Feature grouping, Dimension dimension,
                                       const std::vector<double>& expected_levels = {});

/// Feature levels of `grouping` on a grid.
std::vector<double> grid_levels(const ExperimentGrid& grid, Feature grouping);

}  // namespace qoe::analysis
