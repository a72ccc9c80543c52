#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "qoe/error.hpp"
#include "qoe/pipeline.hpp"
#include "test_util.hpp"

using namespace qoe;
using namespace qoe::pipeline;
using qoe::testing::bookkeeping_store;
using qoe::testing::make_record;

namespace {

ConditionId cond(int i) {
  return {"q" + std::to_string(i), {true, true}, {0.05, 0.25, 3.0}};
}

NormalizedRating nz(const std::string& rater, int c, double z, Dimension d = Dimension::kOverall) {
  return {rater, cond(c), d, z};
}

std::vector<RatingRecord> rater_rows(const std::string& rater, const std::vector<int>& scores) {
  std::vector<RatingRecord> out;
  const auto combos = standard_grid().combinations();
  for (std::size_t k = 0; k < scores.size(); ++k) {
    out.push_back(make_record(rater, "q01", combos[k].first, combos[k].second, scores[k], scores[k], scores[k]));
  }
  return out;
}

// Independent per-(rater, dimension) z oracle over the raw records.
double oracle_z(const std::vector<RatingRecord>& records, const std::string& rater, Dimension d, int x) {
  double sum = 0.0, n = 0.0;
  for (const auto& r : records)
    if (r.rater_id == rater) {
      sum += r.scores.at(d);
      n += 1.0;
    }
  const double mean = sum / n;
  double ss = 0.0;
  for (const auto& r : records)
    if (r.rater_id == rater) ss += (r.scores.at(d) - mean) * (r.scores.at(d) - mean);
  const double sd = std::sqrt(ss / n);
  return sd == 0.0 ? 0.0 : (x - mean) / sd;
}

}  // namespace

TEST(ZScore, ThreePointExample) {
  const auto z = zscore_normalize(rater_rows("r1", {1, 3, 5}));
  ASSERT_EQ(z.size(), 9u);
  const double e = std::sqrt(1.5);
  EXPECT_NEAR(z[0].z, -e, 1e-15);
  EXPECT_NEAR(z[3].z, 0.0, 1e-15);
  EXPECT_NEAR(z[6].z, e, 1e-15);
}

TEST(ZScore, ConstantRaterMapsToZero) {
  for (const auto& n : zscore_normalize(rater_rows("flat", {4, 4, 4, 4}))) EXPECT_EQ(n.z, 0.0);
}

TEST(ZScore, MatchesOracleAndHasZeroMeanUnitVariance) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> s(1, 5);
  std::vector<RatingRecord> records;
  for (int r = 0; r < 6; ++r) {
    std::vector<int> scores(30);
    for (auto& x : scores) x = s(rng);
    auto rows = rater_rows("r" + std::to_string(r), scores);
    for (auto& row : rows) row.scores[Dimension::kContent] = s(rng);
    records.insert(records.end(), rows.begin(), rows.end());
  }
  const auto z = zscore_normalize(records);
  ASSERT_EQ(z.size(), records.size() * 3);
  std::map<std::pair<std::string, Dimension>, std::pair<double, double>> moments;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto& rec = records[i / 3];
    EXPECT_EQ(z[i].rater_id, rec.rater_id);
    EXPECT_NEAR(z[i].z, oracle_z(records, rec.rater_id, z[i].dimension, rec.scores.at(z[i].dimension)), 1e-12);
    auto& m = moments[{z[i].rater_id, z[i].dimension}];
    m.first += z[i].z;
    m.second += z[i].z * z[i].z;
  }
  for (const auto& [key, m] : moments) {
    EXPECT_NEAR(m.first / 30.0, 0.0, 1e-12);
    EXPECT_NEAR(m.second / 30.0, 1.0, 1e-12);
  }
}

TEST(OutlierFilter, ThresholdIsInclusive) {
  const std::vector<NormalizedRating> z{nz("at", 0, 2.0), nz("at", 1, -1.0), nz("over", 0, -2.0000001),
                                        nz("under", 0, 1.99)};
  const auto split = filter_outlier_raters(z, 2.0);
  EXPECT_EQ(split.valid, (std::set<std::string>{"at", "under"}));
  EXPECT_EQ(split.rejected, (std::set<std::string>{"over"}));
}

TEST(OutlierFilter, MonotoneInTau) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd(0.0, 1.2);
  std::vector<NormalizedRating> z;
  for (int r = 0; r < 40; ++r)
    for (int c = 0; c < 20; ++c) z.push_back(nz("r" + std::to_string(r), c, nd(rng)));
  std::size_t prev = 0;
  for (double tau : {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0}) {
    const auto split = filter_outlier_raters(z, tau);
    EXPECT_GE(split.valid.size(), prev);
    prev = split.valid.size();
  }
}

TEST(ConsistencyFilter, ReversedRaterRejected) {
  std::vector<NormalizedRating> z;
  for (int c = 0; c < 5; ++c) {
    for (const auto* r : {"a", "b", "c"}) z.push_back(nz(r, c, c - 2.0));
    z.push_back(nz("rev", c, 2.0 - c));
  }
  const auto res = filter_inconsistent_raters(z, {"a", "b", "c", "rev"}, 0.5);
  EXPECT_EQ(res.retained, (std::set<std::string>{"a", "b", "c"}));
  EXPECT_EQ(res.rejected, (std::set<std::string>{"rev"}));
  EXPECT_NEAR(res.srcc.at("rev"), -1.0, 1e-12);
  EXPECT_NEAR(res.srcc.at("a"), 1.0, 1e-12);
}

TEST(ConsistencyFilter, ThresholdIsInclusive) {
  // Leave-one-out mean of "x" is ranked (2,1,4,3) against its own (1,2,3,4): srcc = 0.6.
  std::vector<NormalizedRating> z;
  const double own[] = {1, 2, 3, 4};
  const double other[] = {2, 1, 4, 3};
  for (int c = 0; c < 4; ++c) {
    z.push_back(nz("x", c, own[c]));
    z.push_back(nz("y", c, other[c]));
  }
  const auto at = filter_inconsistent_raters(z, {"x", "y"}, 0.6);
  EXPECT_NEAR(at.srcc.at("x"), 0.6, 1e-12);
  const auto above = filter_inconsistent_raters(z, {"x", "y"}, 0.6000001);
  EXPECT_TRUE(above.rejected.contains("x"));
  EXPECT_EQ(filter_inconsistent_raters(z, {"x", "y"}, 0.5).retained, (std::set<std::string>{"x", "y"}));
}

TEST(ConsistencyFilter, InsufficientOverlapRejected) {
  std::vector<NormalizedRating> z;
  for (int c = 0; c < 6; ++c) {
    z.push_back(nz("a", c, c));
    z.push_back(nz("b", c, c));
  }
  z.push_back(nz("lonely", 0, 1.0));
  z.push_back(nz("lonely", 1, 2.0));
  z.push_back(nz("lonely", 99, 3.0));
  const auto res = filter_inconsistent_raters(z, {"a", "b", "lonely"}, 0.5);
  EXPECT_TRUE(res.insufficient_overlap.contains("lonely"));
  EXPECT_TRUE(res.rejected.contains("lonely"));
  EXPECT_TRUE(res.retained.contains("a"));
}

TEST(ComputeMos, MinMaxRescale) {
  const std::vector<NormalizedRating> z{nz("a", 0, -1.0), nz("b", 0, -1.0), nz("a", 1, 0.0),
                                        nz("b", 1, 1.0),  nz("a", 2, 1.0),  nz("b", 2, 1.0)};
  const auto res = compute_mos(z, {"a", "b"});
  const auto& e = res.table.entries;
  EXPECT_EQ(e.at({cond(0), Dimension::kOverall}).mos_scaled, 0.0);
  EXPECT_DOUBLE_EQ(e.at({cond(1), Dimension::kOverall}).mos_scaled, 3.75);
  EXPECT_EQ(e.at({cond(2), Dimension::kOverall}).mos_scaled, 5.0);
  EXPECT_EQ(e.at({cond(1), Dimension::kOverall}).n_valid, 2u);
  EXPECT_EQ(res.table.anchors.range.at(Dimension::kOverall), (std::pair<double, double>{-1.0, 1.0}));
}

TEST(ComputeMos, DegenerateRangeIsMidpoint) {
  const auto res = compute_mos({nz("a", 0, 0.3), nz("a", 1, 0.3)}, {"a"});
  for (const auto& [k, e] : res.table.entries) EXPECT_EQ(e.mos_scaled, 2.5);
}

TEST(ComputeMos, FrozenAnchorsClamp) {
  RescaleAnchors frozen;
  frozen.range[Dimension::kOverall] = {0.0, 1.0};
  const auto res = compute_mos({nz("a", 0, 0.5), nz("a", 1, 3.0), nz("a", 2, -1.0)}, {"a"}, frozen);
  const auto& e = res.table.entries;
  EXPECT_DOUBLE_EQ(e.at({cond(0), Dimension::kOverall}).mos_scaled, 2.5);
  EXPECT_EQ(e.at({cond(1), Dimension::kOverall}).mos_scaled, 5.0);
  EXPECT_EQ(e.at({cond(2), Dimension::kOverall}).mos_scaled, 0.0);
  RescaleAnchors missing;
  EXPECT_THROW(compute_mos({nz("a", 0, 0.5)}, {"a"}, missing), Error);
}

TEST(ComputeMos, EmptyConditionsReported) {
  const auto res = compute_mos({nz("a", 0, 1.0), nz("gone", 1, 1.0)}, {"a"});
  ASSERT_EQ(res.empty_conditions.size(), 1u);
  EXPECT_EQ(res.empty_conditions[0], cond(1));
  EXPECT_FALSE(res.table.entries.contains({cond(1), Dimension::kOverall}));
}

TEST(RunPipeline, EmptyInput) {
  const auto res = run_pipeline({}, PipelineParams{});
  EXPECT_TRUE(res.mos.entries.empty());
  EXPECT_EQ(res.report.records_in, 0u);
  EXPECT_EQ(res.report.records_out, 0u);
}

TEST(RunPipeline, BookkeepingOnFixedStore) {
  const auto store = bookkeeping_store(281, 8, 3, 54);
  ASSERT_EQ(store.records.size(), 15768u);
  const auto res = run_pipeline(store.records, PipelineParams{});
  const auto& rep = res.report;
  EXPECT_EQ(rep.raters_in, 292u);
  EXPECT_EQ(rep.records_in, 15768u);
  EXPECT_EQ(rep.rejected_by_z, std::set<std::string>(store.z_outliers.begin(), store.z_outliers.end()));
  EXPECT_EQ(rep.rejected_by_srcc, std::set<std::string>(store.srcc_outliers.begin(), store.srcc_outliers.end()));
  EXPECT_EQ(rep.records_in - rep.records_out, 594u);
  EXPECT_EQ(rep.records_out, 15174u);
  EXPECT_EQ(surviving_records(store.records, rep).size(), 15174u);
  EXPECT_EQ(rep.final_raters.size(), 281u);
  EXPECT_EQ(res.mos.entries.size(), 54u * 3u);
}

TEST(RunPipeline, IdempotentOnSurvivors) {
  const auto store = bookkeeping_store(30, 2, 2, 54);
  const auto first = run_pipeline(store.records, PipelineParams{});
  const auto survivors = surviving_records(store.records, first.report);
  const auto second = run_pipeline(survivors, PipelineParams{});
  EXPECT_TRUE(second.report.rejected_by_z.empty());
  EXPECT_TRUE(second.report.rejected_by_srcc.empty());
  EXPECT_EQ(second.report.records_out, survivors.size());
  for (const auto& [key, e] : first.mos.entries) {
    EXPECT_NEAR(second.mos.entries.at(key).mos_scaled, e.mos_scaled, 1e-12);
  }
}

TEST(RunPipeline, AllAdversarialLeavesEmptyConditions) {
  // Two mutually reversed raters disagree with each other's leave-one-out mean.
  auto records = rater_rows("up", {1, 2, 3, 4, 5});
  const auto down = rater_rows("down", {5, 4, 3, 2, 1});
  records.insert(records.end(), down.begin(), down.end());
  const auto res = run_pipeline(records, PipelineParams{});
  EXPECT_TRUE(res.report.final_raters.empty());
  EXPECT_TRUE(res.mos.entries.empty());
  EXPECT_EQ(res.report.empty_conditions.size(), 5u);
  EXPECT_EQ(res.report.records_out, 0u);
}

TEST(RunPipeline, RejectsBadParams) {
  EXPECT_THROW(run_pipeline({}, PipelineParams{-1.0, 0.5}), Error);
}
