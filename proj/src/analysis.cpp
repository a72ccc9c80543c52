#include "qoe/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qoe/error.hpp"
#include "qoe/io.hpp"
#include "qoe/stats.hpp"

namespace qoe::analysis {

namespace {

constexpr std::size_t kN = kFeatureCount;

Matrix5 identity() {
  Matrix5 m{};
  for (std::size_t i = 0; i < kN; ++i) m[i][i] = 1.0;
  return m;
}

double off_diagonal_norm(const Matrix5& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < kN; ++i) {
    for (std::size_t j = 0; j < kN; ++j) {
      if (i != j) s += a[i][j] * a[i][j];
    }
  }
  return std::sqrt(s);
}

double frobenius(const Matrix5& a) {
  double s = 0.0;
  for (const auto& row : a) {
    for (double v : row) s += v * v;
  }
  return std::sqrt(s);
}

// a <- J^T a J and v <- v J for the rotation acting on the (p, q) plane.
void rotate(Matrix5& a, Matrix5& v, std::size_t p, std::size_t q) {
  const double apq = a[p][q];
  if (apq == 0.0) return;
  const double theta = (a[q][q] - a[p][p]) / (2.0 * apq);
  const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  for (std::size_t k = 0; k < kN; ++k) {  // columns
    const double akp = a[k][p];
    const double akq = a[k][q];
    a[k][p] = c * akp - s * akq;
    a[k][q] = s * akp + c * akq;
  }
  for (std::size_t k = 0; k < kN; ++k) {  // rows
    const double apk = a[p][k];
    const double aqk = a[q][k];
    a[p][k] = c * apk - s * aqk;
    a[q][k] = s * apk + c * aqk;
  }
  a[p][q] = 0.0;
  a[q][p] = 0.0;
  for (std::size_t k = 0; k < kN; ++k) {
    const double vkp = v[k][p];
    const double vkq = v[k][q];
    v[k][p] = c * vkp - s * vkq;
    v[k][q] = s * vkp + c * vkq;
  }
}

double dot(const Vector5& a, const Vector5& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < kN; ++i) s += a[i] * b[i];
  return s;
}

void fill_ratios(PcaResult& r) {
  double total = 0.0;
  for (double ev : r.eigenvalues) total += std::max(ev, 0.0);
  for (std::size_t k = 0; k < kN; ++k) {
    r.explained_variance_ratio[k] = total > 0.0 ? std::max(r.eigenvalues[k], 0.0) / total : 0.0;
  }
}

}  // namespace

Covariance covariance(const std::vector<Vector5>& samples) {
  if (samples.size() < 2) throw Error("too-few-samples", "covariance needs at least two samples");
  Covariance c;
  const double n = static_cast<double>(samples.size());
  for (const auto& x : samples) {
    for (std::size_t i = 0; i < kN; ++i) c.mean[i] += x[i];
  }
  for (double& m : c.mean) m /= n;
  for (const auto& x : samples) {
    for (std::size_t i = 0; i < kN; ++i) {
      const double di = x[i] - c.mean[i];
      for (std::size_t j = i; j < kN; ++j) c.sigma[i][j] += di * (x[j] - c.mean[j]);
    }
  }
  for (std::size_t i = 0; i < kN; ++i) {
    for (std::size_t j = i; j < kN; ++j) {
      c.sigma[i][j] /= n;
      c.sigma[j][i] = c.sigma[i][j];
    }
  }
  return c;
}

Eigen eigen_symmetric(const Matrix5& m) {
  Matrix5 a = m;
  for (std::size_t i = 0; i < kN; ++i) {  // symmetrize against round-off in the input
    for (std::size_t j = i + 1; j < kN; ++j) {
      const double avg = 0.5 * (a[i][j] + a[j][i]);
      a[i][j] = a[j][i] = avg;
    }
  }
  Matrix5 v = identity();
  const double scale = std::max(frobenius(a), 1.0);
  for (int sweep = 0; sweep < 100 && off_diagonal_norm(a) >= 1e-12 * scale; ++sweep) {
    for (std::size_t p = 0; p < kN; ++p) {
      for (std::size_t q = p + 1; q < kN; ++q) rotate(a, v, p, q);
    }
  }

  std::array<std::size_t, kN> order{};
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a[i][i] > a[j][j]; });
  Eigen e;
  for (std::size_t k = 0; k < kN; ++k) {
    const std::size_t src = order[k];
    e.values[k] = a[src][src];
    Vector5 vec{};
    std::size_t big = 0;
    for (std::size_t i = 0; i < kN; ++i) {
      vec[i] = v[i][src];
      if (std::abs(vec[i]) > std::abs(vec[big])) big = i;
    }
    if (vec[big] < 0.0) {
      for (double& x : vec) x = -x;
    }
    e.vectors[k] = vec;
  }
  return e;
}

PcaResult pca_from_covariance(const Matrix5& sigma) {
  PcaResult r;
  r.scale.fill(1.0);
  r.covariance = sigma;
  const auto e = eigen_symmetric(sigma);
  r.eigenvalues = e.values;
  r.components = e.vectors;
  fill_ratios(r);
  return r;
}

std::vector<Vector5> project(const PcaResult& fit, const std::vector<Vector5>& samples) {
  std::vector<Vector5> out;
  out.reserve(samples.size());
  for (const auto& x : samples) {
    Vector5 z{};
    for (std::size_t i = 0; i < kN; ++i) z[i] = (x[i] - fit.mean[i]) / fit.scale[i];
    Vector5 s{};
    for (std::size_t k = 0; k < kN; ++k) s[k] = dot(fit.components[k], z);
    out.push_back(s);
  }
  return out;
}

PcaResult pca(const std::vector<Vector5>& samples) {
  if (samples.size() < 2) throw Error("too-few-samples", "pca needs at least two samples");
  const auto raw = covariance(samples);
  PcaResult r;
  r.mean = raw.mean;
  for (std::size_t i = 0; i < kN; ++i) {
    const bool constant = std::all_of(samples.begin(), samples.end(),
                                      [&](const Vector5& x) { return x[i] == samples.front()[i]; });
    const double sd = std::sqrt(raw.sigma[i][i]);
    r.scale[i] = constant || !(sd > 0.0) ? 1.0 : sd;
  }
  std::vector<Vector5> standardized;
  standardized.reserve(samples.size());
  for (const auto& x : samples) {
    Vector5 z{};
    for (std::size_t i = 0; i < kN; ++i) z[i] = (x[i] - r.mean[i]) / r.scale[i];
    standardized.push_back(z);
  }
  const auto cov = covariance(standardized);
  r.covariance = cov.sigma;
  const auto e = eigen_symmetric(cov.sigma);
  r.eigenvalues = e.values;
  r.components = e.vectors;
  fill_ratios(r);
  // centre on the standardized mean (zero up to round-off) so scores have zero mean
  r.scores.reserve(samples.size());
  for (const auto& z : standardized) {
    Vector5 centred{};
    for (std::size_t i = 0; i < kN; ++i) centred[i] = z[i] - cov.mean[i];
    Vector5 s{};
    for (std::size_t k = 0; k < kN; ++k) s[k] = dot(r.components[k], centred);
    r.scores.push_back(s);
  }
  return r;
}

CorrelationMatrix dimension_correlations(const MosTable& mos) {
  std::map<ConditionId, std::map<Dimension, double>> rows;
  for (const auto& [key, e] : mos.entries) rows[key.condition][key.dimension] = e.mos_scaled;
  std::array<std::vector<double>, 3> cols;
  for (const auto& [cond, dims] : rows) {
    if (dims.size() != kDimensions.size()) continue;
    for (std::size_t d = 0; d < 3; ++d) cols[d].push_back(dims.at(kDimensions[d]));
  }
  if (cols[0].size() < 2) {
    throw Error("degenerate-input", "need at least two conditions with all three dimensions");
  }
  CorrelationMatrix m;
  for (std::size_t i = 0; i < 3; ++i) {
    m.values[i][i] = 1.0;
    for (std::size_t j = i + 1; j < 3; ++j) {
      m.values[i][j] = m.values[j][i] = stats::pearson(cols[i], cols[j]);
    }
  }
  return m;
}

int parse_mbti_axis(std::string_view axis) {
  static constexpr std::array<std::string_view, 4> kNames{"EI", "SN", "TF", "JP"};
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    const auto& n = kNames[i];
    if (axis == n || (axis.size() == 3 && axis[0] == n[0] && axis[1] == '/' && axis[2] == n[1])) {
      return static_cast<int>(i);
    }
  }
  throw Error("bad-axis", std::string(axis));
}

MbtiSplit group_by_mbti(const std::vector<RatingRecord>& records,
                        const std::map<std::string, RaterProfile>& profiles, int axis) {
  static constexpr std::array<std::string_view, 4> kNames{"EI", "SN", "TF", "JP"};
  if (axis < 0 || axis > 3) throw Error("bad-axis", std::to_string(axis));
  MbtiSplit split;
  split.first_letter = kNames[static_cast<std::size_t>(axis)][0];
  split.second_letter = kNames[static_cast<std::size_t>(axis)][1];
  for (const auto& r : records) {
    auto it = profiles.find(r.rater_id);
    if (it == profiles.end()) throw Error("unknown-rater", r.rater_id);
    const char letter = mbti_letter(it->second.mbti, axis);
    (letter == split.first_letter ? split.first : split.second).push_back(r);
  }
  return split;
}

std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::kLow:
      return "low";
    case Tier::kMid:
      return "mid";
    case Tier::kHigh:
      return "high";
  }
  return "mid";
}

Tier tier_of(double mos) {
  if (mos > 4.0) return Tier::kHigh;
  if (mos < 2.0) return Tier::kLow;
  return Tier::kMid;
}

TierSummary topic_tiers(const std::vector<TierSample>& samples) {
  TierSummary out;
  std::map<Tier, std::map<Category, double>> sums;
  for (const auto& s : samples) {
    const Tier t = tier_of(s.mos);
    sums[t][s.category] += s.mos;
    ++out.count[t][s.category];
  }
  for (const auto& [tier, cats] : sums) {
    for (const auto& [cat, sum] : cats) {
      out.mean[tier][cat] = sum / static_cast<double>(out.count[tier][cat]);
    }
  }
  return out;
}

FiveNumber five_number_summary(std::vector<double> values) {
  if (values.empty()) throw Error("degenerate-input", "empty sample");
  std::sort(values.begin(), values.end());
  const auto at = [&](double p) {
    const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(values.size())));
    return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
  };
  return {values.front(), at(0.25), at(0.5), at(0.75), values.back()};
}

std::string level_label(Feature f, double value) {
  switch (f) {
    case Feature::kDensity:
      return "D" + std::to_string(static_cast<int>(value));
    case Feature::kAccuracy:
      return "A" + std::to_string(static_cast<int>(value));
    case Feature::kSpeed:
      return "S" + format_double(value);
    case Feature::kPausePos: {
      auto s = format_double(value);
      if (s.find('.') == std::string::npos && s.find('e') == std::string::npos) s += ".0";
      return "P" + s;
    }
    case Feature::kPauseDur:
      return "T" + format_double(value);
  }
  return "?";
}

std::vector<double> grid_levels(const ExperimentGrid& grid, Feature grouping) {
  switch (grouping) {
    case Feature::kDensity:
    case Feature::kAccuracy:
      return {0.0, 1.0};
    case Feature::kSpeed:
      return grid.speeds;
    case Feature::kPausePos:
      return grid.pause_positions;
    case Feature::kPauseDur:
      return grid.pause_durations;
  }
  return {};
}

DistributionExport distribution_export(const MosTable& mos, Feature grouping, Dimension dimension,
                                       const std::vector<double>& expected_levels) {
  std::map<double, std::vector<double>> by_level;
  for (double lvl : expected_levels) by_level[lvl];
  for (const auto& [key, e] : mos.entries) {
    if (key.dimension != dimension) continue;
    const auto x = to_feature_vector(key.condition.content, key.condition.qos);
    by_level[x[static_cast<std::size_t>(grouping)]].push_back(e.mos_scaled);
  }
  DistributionExport out;
  out.grouping = grouping;
  for (auto& [lvl, samples] : by_level) {
    const auto label = level_label(grouping, lvl);
    if (samples.empty()) {
      out.warnings.push_back("level " + label + " has no samples");
      continue;
    }
    LevelDistribution d;
    d.level = label;
    d.summary = five_number_summary(samples);
    d.samples = std::move(samples);
    out.levels.push_back(std::move(d));
  }
  return out;
}

}  // namespace qoe::analysis
