#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "qoe/core.hpp"
#include "qoe/io.hpp"

namespace qoe::synth {

enum class AdversaryKind { kUniform, kInverted };

/// Ground truth for synthetic raters. Utility is linear in the feature vector,
/// u(x) = w . x. Each rating dimension scores a grid-centred partial utility:
/// content uses (density, accuracy) weights, response uses (speed, pause_pos,
/// pause_dur) weights, overall uses all five.
///
/// Each partial utility is rescaled to standard deviation `spread` over the
/// grid (u_m below), which keeps every rater's score distribution wide enough
/// that honest raters do not trip the |z| <= 2 outlier rule.
///
/// Honest rater r scores dimension m of condition x as
///   round(clamp(midpoint + scale_r * (u_m(x) + bias_r + eps), 1, 5)),
/// eps ~ Normal(0, noise_sd), bias_r ~ Normal(0, bias_sd),
/// scale_r ~ Uniform(scale_min, scale_max).
/// Uniform adversaries draw each score uniformly from 1..5; inverted ones
/// score as an honest rater with the utility sign flipped.
struct SyntheticWorld {
  FeatureVector weights{0.4, 1.6, -15.0, 0.0, -0.15};
  double noise_sd = 0.3;
  double midpoint = 3.0;
  double spread = 1.4;
  double bias_sd = 0.2;
  double scale_min = 0.8;
  double scale_max = 1.2;
  /// Rater index -> adversary behaviour.
  std::map<std::size_t, AdversaryKind> adversarial_raters;
  std::uint64_t seed = 1;
};

/// Accuracy-dominant weights with speed second; adversary at index 20
/// (20 honest raters + 1 adversary when generating 21 raters).
SyntheticWorld default_world();

double utility(const SyntheticWorld& world, const FeatureVector& x);

struct Population {
  std::vector<RatingRecord> records;
  std::vector<RaterProfile> profiles;
  /// Ground-truth utility u(x) per condition.
  std::map<ConditionId, double> utility;
};

/// Every rater scores the same `n_conditions` conditions. Conditions pair the
/// questions with the grid's (content, qos) combinations: condition i uses
/// question i mod Q and combination perm[i mod C] of a seeded permutation, so
/// each question sees distinct combinations. n_conditions == 0 means Q x C
/// (every question with every combination).
Population generate(const SyntheticWorld& world, const ExperimentGrid& grid,
                    const ContentFixture& questions, std::size_t n_raters,
                    std::size_t n_conditions);

ordered_json to_json(const SyntheticWorld& world);
SyntheticWorld world_from_json(const ordered_json& j);

}  // namespace qoe::synth
