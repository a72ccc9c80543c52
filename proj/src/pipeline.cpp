#include "qoe/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "qoe/error.hpp"
#include "qoe/stats.hpp"

namespace qoe::pipeline {

std::vector<NormalizedRating> zscore_normalize(const std::vector<RatingRecord>& records) {
  struct Moments {
    double sum = 0.0;
    std::size_t n = 0;
    double mean = 0.0;
    double ss = 0.0;
  };
  std::map<std::pair<std::string, Dimension>, Moments> groups;
  for (const auto& r : records) {
    for (const auto& [dim, score] : r.scores) {
      auto& g = groups[{r.rater_id, dim}];
      g.sum += score;
      ++g.n;
    }
  }
  for (auto& [key, g] : groups) g.mean = g.sum / static_cast<double>(g.n);
  for (const auto& r : records) {
    for (const auto& [dim, score] : r.scores) {
      auto& g = groups[{r.rater_id, dim}];
      g.ss += (score - g.mean) * (score - g.mean);
    }
  }

  std::vector<NormalizedRating> out;
  out.reserve(records.size() * kDimensions.size());
  for (const auto& r : records) {
    for (const auto& [dim, score] : r.scores) {
      const auto& g = groups.at({r.rater_id, dim});
      const double sd = std::sqrt(g.ss / static_cast<double>(g.n));
      const double z = sd > 0.0 ? (score - g.mean) / sd : 0.0;
      out.push_back({r.rater_id, r.condition(), dim, z});
    }
  }
  return out;
}

RaterSplit filter_outlier_raters(const std::vector<NormalizedRating>& normalized, double tau) {
  if (!(tau > 0.0)) throw Error("bad-params", "tau must be > 0");
  std::map<std::string, double> max_abs;
  for (const auto& n : normalized) {
    auto& m = max_abs[n.rater_id];
    m = std::max(m, std::abs(n.z));
  }
  RaterSplit split;
  for (const auto& [rater, m] : max_abs) {
    (m <= tau ? split.valid : split.rejected).insert(rater);
  }
  return split;
}

ConsistencyResult filter_inconsistent_raters(const std::vector<NormalizedRating>& normalized,
                                             const std::set<std::string>& valid, double gamma) {
  struct Cell {
    double sum = 0.0;
    std::size_t n = 0;
  };
  std::map<MosKey, Cell> cells;
  std::map<std::string, std::vector<std::pair<MosKey, double>>> by_rater;
  for (const auto& n : normalized) {
    if (!valid.contains(n.rater_id)) continue;
    MosKey key{n.condition, n.dimension};
    auto& c = cells[key];
    c.sum += n.z;
    ++c.n;
    by_rater[n.rater_id].emplace_back(std::move(key), n.z);
  }

  ConsistencyResult result;
  for (const auto& rater : valid) {
    auto it = by_rater.find(rater);
    std::vector<double> own;
    std::vector<double> group;
    std::set<ConditionId> shared;
    if (it != by_rater.end()) {
      for (const auto& [key, z] : it->second) {
        const auto& c = cells.at(key);
        if (c.n < 2) continue;  // nobody else rated this cell
        own.push_back(z);
        group.push_back((c.sum - z) / static_cast<double>(c.n - 1));
        shared.insert(key.condition);
      }
    }
    if (shared.size() < kMinOverlap) {
      result.insufficient_overlap.insert(rater);
      result.rejected.insert(rater);
      continue;
    }
    double r = 0.0;
    try {
      r = stats::spearman(own, group);
    } catch (const Error&) {
      r = 0.0;  // both sides constant: no rank information
    }
    result.srcc[rater] = r;
    (r >= gamma ? result.retained : result.rejected).insert(rater);
  }
  return result;
}

double rescale(double mos_z, double lo, double hi) {
  if (!(hi > lo)) return 2.5;
  return std::clamp(5.0 * (mos_z - lo) / (hi - lo), 0.0, 5.0);
}

MosResult compute_mos(const std::vector<NormalizedRating>& normalized,
                      const std::set<std::string>& final_raters,
                      const std::optional<RescaleAnchors>& frozen) {
  struct Cell {
    double sum = 0.0;
    std::size_t n = 0;
  };
  std::map<MosKey, Cell> cells;
  std::set<ConditionId> seen;
  for (const auto& n : normalized) {
    seen.insert(n.condition);
    if (!final_raters.contains(n.rater_id)) continue;
    auto& c = cells[{n.condition, n.dimension}];
    c.sum += n.z;
    ++c.n;
  }

  MosResult result;
  std::set<ConditionId> covered;
  for (const auto& [key, c] : cells) {
    result.table.entries[key] = {c.sum / static_cast<double>(c.n), 0.0, c.n};
    covered.insert(key.condition);
  }
  for (const auto& cond : seen) {
    if (!covered.contains(cond)) result.empty_conditions.push_back(cond);
  }

  auto& range = result.table.anchors.range;
  if (frozen) {
    range = frozen->range;
  } else {
    for (const auto& [key, e] : result.table.entries) {
      auto it = range.find(key.dimension);
      if (it == range.end()) {
        range[key.dimension] = {e.mos_z, e.mos_z};
      } else {
        it->second.first = std::min(it->second.first, e.mos_z);
        it->second.second = std::max(it->second.second, e.mos_z);
      }
    }
  }
  for (auto& [key, e] : result.table.entries) {
    auto it = range.find(key.dimension);
    if (it == range.end()) throw Error("bad-anchors", "no anchors for " + std::string(to_string(key.dimension)));
    e.mos_scaled = rescale(e.mos_z, it->second.first, it->second.second);
  }
  return result;
}

PipelineResult run_pipeline(const std::vector<RatingRecord>& records, const PipelineParams& params,
                            const std::optional<RescaleAnchors>& frozen) {
  validate(params);
  PipelineResult result;
  auto& report = result.report;
  report.records_in = records.size();

  result.normalized = zscore_normalize(records);
  const auto z_split = filter_outlier_raters(result.normalized, params.z_outlier_threshold);
  report.raters_in = z_split.valid.size() + z_split.rejected.size();
  report.rejected_by_z = z_split.rejected;

  auto consistency =
      filter_inconsistent_raters(result.normalized, z_split.valid, params.srcc_threshold);
  report.rejected_by_srcc = consistency.rejected;
  report.insufficient_overlap = consistency.insufficient_overlap;
  report.rater_srcc = std::move(consistency.srcc);
  report.final_raters = std::move(consistency.retained);

  auto mos = compute_mos(result.normalized, report.final_raters, frozen);
  result.mos = std::move(mos.table);
  report.empty_conditions = std::move(mos.empty_conditions);

  report.records_out = static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(),
                    [&](const RatingRecord& r) { return report.final_raters.contains(r.rater_id); }));
  return result;
}

std::vector<RatingRecord> surviving_records(const std::vector<RatingRecord>& records,
                                            const PipelineReport& report) {
  std::vector<RatingRecord> out;
  for (const auto& r : records) {
    if (report.final_raters.contains(r.rater_id)) out.push_back(r);
  }
  return out;
}

}  // namespace qoe::pipeline
