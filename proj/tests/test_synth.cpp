#include <gtest/gtest.h>

#include "qoe/error.hpp"
#include "qoe/pipeline.hpp"
#include "qoe/stats.hpp"
#include "qoe/synth.hpp"

using namespace qoe;
using namespace qoe::synth;

TEST(Synth, DeterministicForSeed) {
  const auto world = default_world();
  const auto a = generate(world, standard_grid(), standard_question_set(), 5, 100);
  const auto b = generate(world, standard_grid(), standard_question_set(), 5, 100);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.profiles, b.profiles);
  auto other = world;
  other.seed = 2;
  EXPECT_NE(generate(other, standard_grid(), standard_question_set(), 5, 100).records, a.records);
}

TEST(Synth, ShapeAndValidity) {
  const auto pop = generate(default_world(), standard_grid(), standard_question_set(), 4, 120);
  EXPECT_EQ(pop.records.size(), 4u * 120u);
  EXPECT_EQ(pop.profiles.size(), 4u);
  EXPECT_EQ(pop.utility.size(), 120u);
  const auto fixture = standard_question_set();
  for (const auto& r : pop.records) EXPECT_FALSE(validate_record(r, &fixture).has_value());
  EXPECT_NO_THROW(validate_store(pop.records));
  for (const auto& p : pop.profiles) EXPECT_FALSE(validate_profile(p).has_value());
}

TEST(Synth, NoiselessScoresAreMonotoneInUtility) {
  auto world = default_world();
  world.noise_sd = 0.0;
  world.bias_sd = 0.0;
  world.scale_min = world.scale_max = 1.0;
  world.adversarial_raters.clear();
  const auto pop = generate(world, standard_grid(), standard_question_set(), 3, 300);
  for (const auto& a : pop.records) {
    for (const auto& b : pop.records) {
      if (a.rater_id != b.rater_id) continue;
      const double ua = pop.utility.at({a.question_id, a.content, a.qos});
      const double ub = pop.utility.at({b.question_id, b.content, b.qos});
      if (ua < ub) {
        EXPECT_LE(a.scores.at(Dimension::kOverall), b.scores.at(Dimension::kOverall));
      }
    }
  }
}

TEST(Synth, AdversaryRejectedAndHonestRecovered) {
  const auto pop = generate(default_world(), standard_grid(), standard_question_set(), 21, 432);
  const auto res = pipeline::run_pipeline(pop.records, PipelineParams{});
  EXPECT_TRUE(res.report.rejected_by_srcc.contains("synth-r020") || res.report.rejected_by_z.contains("synth-r020"));
  EXPECT_EQ(res.report.final_raters.size(), 20u);
  std::vector<double> mos, truth;
  for (const auto& [key, e] : res.mos.entries) {
    if (key.dimension != Dimension::kOverall) continue;
    mos.push_back(e.mos_scaled);
    truth.push_back(pop.utility.at(key.condition));
  }
  EXPECT_GE(stats::spearman(mos, truth), 0.9);
}

TEST(Synth, WorldJsonRoundTrip) {
  auto world = default_world();
  world.adversarial_raters[3] = AdversaryKind::kInverted;
  const auto back = world_from_json(to_json(world));
  EXPECT_EQ(back.weights, world.weights);
  EXPECT_EQ(back.seed, world.seed);
  EXPECT_EQ(back.adversarial_raters, world.adversarial_raters);
  EXPECT_EQ(back.spread, world.spread);
}

TEST(Synth, InvalidInputs) {
  EXPECT_THROW(generate(default_world(), standard_grid(), standard_question_set(), 0, 10), Error);
  auto w = default_world();
  w.noise_sd = -1;
  EXPECT_THROW(generate(w, standard_grid(), standard_question_set(), 2, 10), Error);
}
