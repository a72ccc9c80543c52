#include "qoe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "qoe/error.hpp"

namespace qoe::synth {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::array<std::size_t, 2> kContentFeatures{0, 1};
constexpr std::array<std::size_t, 3> kResponseFeatures{2, 3, 4};

// Partial utility of the features used by `dim`, centred on the grid mean.
double centred_utility(const SyntheticWorld& w, const FeatureVector& x, const FeatureVector& centre,
                       Dimension dim) {
  double u = 0.0;
  auto add = [&](std::size_t f) { u += w.weights[f] * (x[f] - centre[f]); };
  switch (dim) {
    case Dimension::kContent:
      for (auto f : kContentFeatures) add(f);
      break;
    case Dimension::kResponse:
      for (auto f : kResponseFeatures) add(f);
      break;
    case Dimension::kOverall:
      for (std::size_t f = 0; f < kFeatureCount; ++f) add(f);
      break;
  }
  return u;
}

int to_score(double v) {
  return static_cast<int>(std::lround(std::clamp(v, double(kMinScore), double(kMaxScore))));
}

const char* adversary_name(AdversaryKind k) { return k == AdversaryKind::kUniform ? "uniform" : "inverted"; }

}  // namespace

SyntheticWorld default_world() {
  SyntheticWorld w;
  w.adversarial_raters[20] = AdversaryKind::kUniform;
  return w;
}

double utility(const SyntheticWorld& world, const FeatureVector& x) {
  double u = 0.0;
  for (std::size_t f = 0; f < kFeatureCount; ++f) u += world.weights[f] * x[f];
  return u;
}

Population generate(const SyntheticWorld& world, const ExperimentGrid& grid,
                    const ContentFixture& questions, std::size_t n_raters,
                    std::size_t n_conditions) {
  if (n_raters < 1) throw Error("bad-synth", "need at least one rater");
  if (questions.questions.empty()) throw Error("bad-synth", "no questions");
  if (world.noise_sd < 0.0 || world.spread < 0.0 || world.bias_sd < 0.0 || world.scale_min > world.scale_max) {
    throw Error("bad-synth", "invalid world parameters");
  }
  const auto combos = grid.combinations();
  if (combos.empty()) throw Error("bad-synth", "empty grid");
  const std::size_t q_count = questions.questions.size();
  const std::size_t c_count = combos.size();
  const std::size_t max_conditions = q_count * c_count;
  if (n_conditions == 0 || n_conditions > max_conditions) n_conditions = max_conditions;

  std::mt19937_64 layout_rng(mix(world.seed));
  std::vector<std::size_t> perm(c_count);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), layout_rng);

  struct Cond {
    const Question* question;
    ConditionId id;
    FeatureVector x;
  };
  std::vector<Cond> conds;
  conds.reserve(n_conditions);
  FeatureVector centre{};
  for (const auto& [content, qos] : combos) {
    const auto x = to_feature_vector(content, qos);
    for (std::size_t f = 0; f < kFeatureCount; ++f) centre[f] += x[f] / static_cast<double>(c_count);
  }
  std::map<Dimension, double> dim_sd;
  for (auto dim : kDimensions) {
    double ss = 0.0;
    for (const auto& [content, qos] : combos) {
      const double u = centred_utility(world, to_feature_vector(content, qos), centre, dim);
      ss += u * u;
    }
    dim_sd[dim] = std::sqrt(ss / static_cast<double>(c_count));
  }
  auto shaped = [&](const FeatureVector& x, Dimension dim) {
    const double sd = dim_sd.at(dim);
    return sd > 0.0 ? world.spread * centred_utility(world, x, centre, dim) / sd : 0.0;
  };

  Population pop;
  for (std::size_t i = 0; i < n_conditions; ++i) {
    const std::size_t q = i % q_count;
    const std::size_t j = i / q_count;
    const auto& [content, qos] = combos[perm[(j + q * 7) % c_count]];
    const Question* question = &questions.questions[q];
    Cond c{question, {question->question_id, content, qos}, to_feature_vector(content, qos)};
    pop.utility[c.id] = utility(world, c.x);
    conds.push_back(std::move(c));
  }

  static constexpr std::array<const char*, 16> kMbti{
      "ISTJ", "ISFJ", "INFJ", "INTJ", "ISTP", "ISFP", "INFP", "INTP",
      "ESTP", "ESFP", "ENFP", "ENTP", "ESTJ", "ESFJ", "ENFJ", "ENTJ"};
  const auto base = parse_timestamp("2025-01-01T00:00:00.000Z");

  pop.records.reserve(n_raters * n_conditions);
  for (std::size_t r = 0; r < n_raters; ++r) {
    std::mt19937_64 rng(mix(world.seed ^ mix(r + 1)));
    char id[32];
    std::snprintf(id, sizeof id, "synth-r%03zu", r);
    RaterProfile profile;
    profile.rater_id = id;
    profile.mbti = kMbti[std::uniform_int_distribution<std::size_t>(0, 15)(rng)];
    profile.patience = std::uniform_int_distribution<int>(1, 5)(rng);
    profile.sessions_completed = 1;
    pop.profiles.push_back(profile);

    std::normal_distribution<double> bias_dist(0.0, world.bias_sd);
    std::uniform_real_distribution<double> scale_dist(world.scale_min, world.scale_max);
    const double bias = world.bias_sd > 0.0 ? bias_dist(rng) : 0.0;
    const double scale = world.scale_max > world.scale_min ? scale_dist(rng) : world.scale_min;
    std::normal_distribution<double> noise(0.0, world.noise_sd);
    std::uniform_int_distribution<int> uniform_score(kMinScore, kMaxScore);

    const auto adv = world.adversarial_raters.find(r);
    for (std::size_t i = 0; i < conds.size(); ++i) {
      const auto& c = conds[i];
      RatingRecord rec;
      rec.session_id = std::string("synth-s") + (id + 7);
      rec.rater_id = id;
      rec.question_id = c.id.question_id;
      rec.category = c.question->category;
      rec.content = c.id.content;
      rec.qos = c.id.qos;
      rec.timestamp = base + std::chrono::seconds(static_cast<long long>(r * conds.size() + i));
      for (auto dim : kDimensions) {
        if (adv != world.adversarial_raters.end() && adv->second == AdversaryKind::kUniform) {
          rec.scores[dim] = uniform_score(rng);
          continue;
        }
        double u = shaped(c.x, dim);
        if (adv != world.adversarial_raters.end()) u = -u;
        const double eps = world.noise_sd > 0.0 ? noise(rng) : 0.0;
        rec.scores[dim] = to_score(world.midpoint + scale * (u + bias + eps));
      }
      pop.records.push_back(std::move(rec));
    }
  }
  return pop;
}

ordered_json to_json(const SyntheticWorld& world) {
  ordered_json j;
  j["weights"] = world.weights;
  j["noise_sd"] = world.noise_sd;
  j["midpoint"] = world.midpoint;
  j["spread"] = world.spread;
  j["bias_sd"] = world.bias_sd;
  j["scale_min"] = world.scale_min;
  j["scale_max"] = world.scale_max;
  j["adversarial_raters"] = ordered_json::array();
  for (const auto& [idx, kind] : world.adversarial_raters) {
    j["adversarial_raters"].push_back({{"index", idx}, {"kind", adversary_name(kind)}});
  }
  j["seed"] = world.seed;
  return j;
}

SyntheticWorld world_from_json(const ordered_json& j) {
  SyntheticWorld w;
  w.adversarial_raters.clear();
  try {
    if (j.contains("weights")) w.weights = j.at("weights").get<FeatureVector>();
    if (j.contains("noise_sd")) w.noise_sd = j.at("noise_sd").get<double>();
    if (j.contains("midpoint")) w.midpoint = j.at("midpoint").get<double>();
    if (j.contains("spread")) w.spread = j.at("spread").get<double>();
    if (j.contains("bias_sd")) w.bias_sd = j.at("bias_sd").get<double>();
    if (j.contains("scale_min")) w.scale_min = j.at("scale_min").get<double>();
    if (j.contains("scale_max")) w.scale_max = j.at("scale_max").get<double>();
    if (j.contains("seed")) w.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("adversarial_raters")) {
      for (const auto& a : j.at("adversarial_raters")) {
        const auto kind = a.at("kind").get<std::string>();
        if (kind != "uniform" && kind != "inverted") throw Error("bad-world", "unknown adversary " + kind);
        w.adversarial_raters[a.at("index").get<std::size_t>()] =
            kind == "uniform" ? AdversaryKind::kUniform : AdversaryKind::kInverted;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad-world", e.what());
  }
  return w;
}

}  // namespace qoe::synth
