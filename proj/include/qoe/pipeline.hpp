#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qoe/core.hpp"

namespace qoe::pipeline {

struct NormalizedRating {
  std::string rater_id;
  ConditionId condition;
  Dimension dimension = Dimension::kOverall;
  double z = 0.0;
};

/// Per (rater, dimension): z = (x - mean) / sd with the population sd; groups
/// with sd == 0 map to z == 0. Output order follows the input records, one
/// entry per (record, dimension).
std::vector<NormalizedRating> zscore_normalize(const std::vector<RatingRecord>& records);

struct RaterSplit {
  std::set<std::string> valid;
  std::set<std::string> rejected;
};

/// Keeps a rater iff max |z| over all of their (condition, dimension) cells is <= tau.
RaterSplit filter_outlier_raters(const std::vector<NormalizedRating>& normalized, double tau);

struct ConsistencyResult {
  std::set<std::string> retained;
  std::set<std::string> rejected;
  /// Raters sharing fewer than kMinOverlap conditions with the rest of the group.
  std::set<std::string> insufficient_overlap;
  std::map<std::string, double> srcc;
};

inline constexpr std::size_t kMinOverlap = 3;

/// For each rater in `valid`, Spearman correlation between the rater's z-scores
/// and the leave-one-out mean z of the other valid raters, over the shared
/// (condition, dimension) cells. Retained iff srcc >= gamma.
ConsistencyResult filter_inconsistent_raters(const std::vector<NormalizedRating>& normalized,
                                             const std::set<std::string>& valid, double gamma);

struct MosResult {
  MosTable table;
  /// Conditions present in the input with no rating from a final rater.
  std::vector<ConditionId> empty_conditions;
};

/// Mean z over final raters per (condition, dimension), then the linear map
/// 5 * (mos_z - min) / (max - min) per dimension (2.5 when max == min). When
/// `frozen` anchors are supplied they replace the per-dataset min/max and the
/// result is clamped to [0, 5].
MosResult compute_mos(const std::vector<NormalizedRating>& normalized,
                      const std::set<std::string>& final_raters,
                      const std::optional<RescaleAnchors>& frozen = std::nullopt);

double rescale(double mos_z, double lo, double hi);

struct PipelineReport {
  std::size_t raters_in = 0;
  std::set<std::string> rejected_by_z;
  std::set<std::string> rejected_by_srcc;
  std::set<std::string> insufficient_overlap;
  std::size_t records_in = 0;
  std::size_t records_out = 0;
  std::map<std::string, double> rater_srcc;
  std::vector<ConditionId> empty_conditions;
  std::set<std::string> final_raters;
};

struct PipelineResult {
  MosTable mos;
  PipelineReport report;
  std::vector<NormalizedRating> normalized;
};

/// zscore_normalize -> filter_outlier_raters -> filter_inconsistent_raters -> compute_mos.
PipelineResult run_pipeline(const std::vector<RatingRecord>& records, const PipelineParams& params,
                            const std::optional<RescaleAnchors>& frozen = std::nullopt);

/// Records belonging to the report's final raters, in input order.
std::vector<RatingRecord> surviving_records(const std::vector<RatingRecord>& records,
                                            const PipelineReport& report);

}  // namespace qoe::pipeline
