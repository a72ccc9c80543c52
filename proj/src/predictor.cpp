#include "qoe/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"
#include "qoe/error.hpp"
#include "qoe/io.hpp"
#include "qoe/pipeline.hpp"
#include "qoe/stats.hpp"

namespace qoe::predict {

std::string_view to_string(Family f) {
  switch (f) {
    case Family::kLinearRidge:
      return "linear-ridge";
    case Family::kKnn:
      return "knn";
    case Family::kTreeEnsemble:
      return "tree-ensemble";
  }
  return "linear-ridge";
}

Family parse_family(std::string_view s) {
  if (s == "linear" || s == "linear-ridge") return Family::kLinearRidge;
  if (s == "knn") return Family::kKnn;
  if (s == "forest" || s == "tree-ensemble") return Family::kTreeEnsemble;
  throw Error("unknown-model", std::string(s));
}

std::string_view to_string(TargetMode m) { return m == TargetMode::kRecord ? "record" : "mos"; }

TargetMode parse_target_mode(std::string_view s) {
  if (s == "record") return TargetMode::kRecord;
  if (s == "mos") return TargetMode::kMos;
  throw Error("bad-target", std::string(s));
}

BuiltDataset build_dataset(const std::vector<RatingRecord>& records, const DatasetOptions& options) {
  std::map<std::string, Category> categories;
  for (const auto& r : records) categories.emplace(r.question_id, r.category);

  const auto frozen =
      options.target == TargetMode::kMos ? options.anchors : std::optional<RescaleAnchors>{};
  auto result = pipeline::run_pipeline(records, options.params, frozen);

  BuiltDataset out;
  out.anchors = result.mos.anchors;
  if (options.target == TargetMode::kRecord) {
    for (const auto& n : result.normalized) {
      if (n.dimension != options.dimension || !result.report.final_raters.contains(n.rater_id)) {
        continue;
      }
      out.data.rows.push_back({to_feature_vector(n.condition.content, n.condition.qos), n.z,
                               n.condition.question_id, categories.at(n.condition.question_id),
                               n.dimension});
    }
  } else {
    for (const auto& [key, e] : result.mos.entries) {
      if (key.dimension != options.dimension) continue;
      const auto& c = key.condition;
      out.data.rows.push_back({to_feature_vector(c.content, c.qos), e.mos_scaled, c.question_id,
                               categories.at(c.question_id), key.dimension});
    }
  }
  return out;
}

Split split_by_category(const Dataset& dataset, std::uint64_t seed) {
  std::map<Category, std::set<std::string>> questions;
  for (const auto& r : dataset.rows) questions[r.category].insert(r.question_id);

  std::mt19937_64 rng(seed);
  std::set<std::string> test_questions;
  for (const auto& [cat, qs] : questions) {
    if (qs.size() < 2) {
      throw Error("category-too-small",
                  std::string(to_string(cat)) + " has " + std::to_string(qs.size()) + " question(s)");
    }
    std::uniform_int_distribution<std::size_t> pick(0, qs.size() - 1);
    test_questions.insert(*std::next(qs.begin(), static_cast<std::ptrdiff_t>(pick(rng))));
  }

  Split split;
  split.train.mask = split.test.mask = dataset.mask;
  for (const auto& r : dataset.rows) {
    (test_questions.contains(r.question_id) ? split.test : split.train).rows.push_back(r);
  }
  split.test_questions.assign(test_questions.begin(), test_questions.end());
  for (const auto& r : split.train.rows) {
    if (test_questions.contains(r.question_id)) {
      throw Error("split-overlap", r.question_id);  // unreachable by construction
    }
  }
  return split;
}

namespace {

std::vector<std::size_t> active_indices(const FeatureMask& mask) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (mask[i]) out.push_back(i);
  }
  return out;
}

std::vector<double> active_values(const FeatureVector& x, const FeatureMask& mask) {
  std::vector<double> out;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (mask[i]) out.push_back(x[i]);
  }
  return out;
}

// Solves A x = b in place by Gaussian elimination with partial pivoting.
// Returns false when a pivot is (numerically) zero.
bool solve(std::vector<std::vector<double>> a, std::vector<double> b, std::vector<double>& x) {
  const std::size_t n = b.size();
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a[i][i]));
  const double tiny = 1e-12 * std::max(scale, 1e-300);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    if (!(std::abs(a[piv][col]) > tiny)) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return true;
}

void column_moments(const std::vector<std::vector<double>>& x, std::vector<double>& mean,
                    std::vector<double>& sd) {
  const std::size_t d = x.empty() ? 0 : x.front().size();
  mean.assign(d, 0.0);
  sd.assign(d, 0.0);
  for (const auto& row : x) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
  }
  for (double& m : mean) m /= static_cast<double>(x.size());
  for (const auto& row : x) {
    for (std::size_t j = 0; j < d; ++j) sd[j] += (row[j] - mean[j]) * (row[j] - mean[j]);
  }
  for (double& s : sd) s = std::sqrt(s / static_cast<double>(x.size()));
}

LinearState fit_linear(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                       double lambda) {
  const std::size_t n = x.size();
  const std::size_t d = x.front().size();
  std::vector<double> mean, sd;
  column_moments(x, mean, sd);
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

  // normal equations on standardized columns; the penalty acts on standardized weights
  std::vector<std::vector<double>> a(d, std::vector<double>(d, 0.0));
  std::vector<double> b(d, 0.0);
  std::vector<double> z(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) z[j] = sd[j] > 0.0 ? (x[i][j] - mean[j]) / sd[j] : 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      b[j] += z[j] * (y[i] - ybar);
      for (std::size_t k = 0; k < d; ++k) a[j][k] += z[j] * z[k];
    }
  }
  for (std::size_t j = 0; j < d; ++j) a[j][j] += lambda;

  std::vector<double> beta;
  if (!solve(a, b, beta)) {
    throw Error("singular-system", "degenerate design matrix; use a positive ridge term");
  }
  LinearState s;
  s.weights.resize(d);
  s.intercept = ybar;
  for (std::size_t j = 0; j < d; ++j) {
    s.weights[j] = sd[j] > 0.0 ? beta[j] / sd[j] : 0.0;
    s.intercept -= s.weights[j] * mean[j];
  }
  return s;
}

KnnState fit_knn(const std::vector<std::vector<double>>& x, const std::vector<double>& y, int k) {
  if (k < 1) throw Error("bad-hyperparameter", "knn k must be >= 1");
  KnnState s;
  s.k = k;
  column_moments(x, s.mean, s.scale);
  for (double& sc : s.scale) {
    if (!(sc > 0.0)) sc = 1.0;
  }
  s.points.reserve(x.size());
  for (const auto& row : x) {
    std::vector<double> p(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) p[j] = (row[j] - s.mean[j]) / s.scale[j];
    s.points.push_back(std::move(p));
  }
  s.targets = y;
  return s;
}

double knn_predict(const KnnState& s, const std::vector<double>& x) {
  std::vector<double> q(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) q[j] = (x[j] - s.mean[j]) / s.scale[j];
  std::vector<double> dist(s.points.size());
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      const double diff = s.points[i][j] - q[j];
      d2 += diff * diff;
    }
    dist[i] = d2;
  }
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(s.k), dist.size());
  std::vector<double> sorted = dist;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  const double kth = sorted[k - 1];
  // every point tied with the k-th distance joins the average
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] <= kth) {
      sum += s.targets[i];
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
              const Hyperparameters& hyper)
      : x_(x), y_(y), hyper_(hyper) {
    const std::size_t d = x.front().size();
    levels_.resize(d);
    bins_.assign(d, std::vector<int>(x.size()));
    for (std::size_t j = 0; j < d; ++j) {
      std::vector<double> vals;
      vals.reserve(x.size());
      for (const auto& row : x) vals.push_back(row[j]);
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      levels_[j] = vals;
      for (std::size_t i = 0; i < x.size(); ++i) {
        bins_[j][i] = static_cast<int>(std::lower_bound(vals.begin(), vals.end(), x[i][j]) - vals.begin());
      }
    }
    mtry_ = hyper.max_features > 0
                ? std::min<std::size_t>(static_cast<std::size_t>(hyper.max_features), d)
                : std::max<std::size_t>(1, (2 * d + 2) / 3);
  }

  Tree build(std::mt19937_64& rng) const {
    const std::size_t n = x_.size();
    const auto m = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(hyper_.sample_fraction * static_cast<double>(n))));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> sample(m);
    for (auto& s : sample) s = pick(rng);
    Tree tree;
    grow(tree, sample, 0, rng);
    return tree;
  }

 private:
  int grow(Tree& tree, std::vector<std::size_t>& idx, int depth, std::mt19937_64& rng) const {
    double sum = 0.0, sumsq = 0.0;
    for (auto i : idx) {
      sum += y_[i];
      sumsq += y_[i] * y_[i];
    }
    const double n = static_cast<double>(idx.size());
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({-1, 0.0, -1, -1, sum / n});

    const auto min_leaf = static_cast<std::size_t>(std::max(1, hyper_.min_samples_leaf));
    const double sse = sumsq - sum * sum / n;
    if (depth >= hyper_.max_depth || idx.size() < 2 * min_leaf || sse <= 1e-12 * std::max(1.0, sumsq)) {
      return node_id;
    }

    std::vector<std::size_t> features(levels_.size());
    std::iota(features.begin(), features.end(), std::size_t{0});
    std::shuffle(features.begin(), features.end(), rng);
    features.resize(mtry_);
    std::sort(features.begin(), features.end());

    double best_gain = 1e-12 * std::max(1.0, sse);
    int best_feature = -1;
    double best_threshold = 0.0;
    for (auto j : features) {
      const auto& lv = levels_[j];
      if (lv.size() < 2) continue;
      std::vector<double> bsum(lv.size(), 0.0);
      std::vector<std::size_t> bcount(lv.size(), 0);
      for (auto i : idx) {
        const auto b = static_cast<std::size_t>(bins_[j][i]);
        bsum[b] += y_[i];
        ++bcount[b];
      }
      double lsum = 0.0;
      std::size_t lcount = 0;
      std::size_t last = lv.size();
      for (std::size_t b = 0; b < lv.size(); ++b) {
        if (bcount[b] == 0) continue;
        if (last != lv.size()) {
          const std::size_t rcount = idx.size() - lcount;
          if (lcount >= min_leaf && rcount >= min_leaf) {
            const double rsum = sum - lsum;
            const double gain = lsum * lsum / static_cast<double>(lcount) +
                                rsum * rsum / static_cast<double>(rcount) - sum * sum / n;
            if (gain > best_gain) {
              best_gain = gain;
              best_feature = static_cast<int>(j);
              best_threshold = 0.5 * (lv[last] + lv[b]);
            }
          }
        }
        lsum += bsum[b];
        lcount += bcount[b];
        last = b;
      }
    }
    if (best_feature < 0) return node_id;

    std::vector<std::size_t> left, right;
    for (auto i : idx) {
      (x_[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? left : right).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(tree, left, depth + 1, rng);
    const int r = grow(tree, right, depth + 1, rng);
    auto& node = tree.nodes[static_cast<std::size_t>(node_id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return node_id;
  }

  const std::vector<std::vector<double>>& x_;
  const std::vector<double>& y_;
  const Hyperparameters& hyper_;
  std::vector<std::vector<double>> levels_;
  std::vector<std::vector<int>> bins_;
  std::size_t mtry_ = 1;
};

double tree_predict(const Tree& t, const std::vector<double>& x) {
  std::size_t i = 0;
  while (t.nodes[i].feature >= 0) {
    const auto& n = t.nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return t.nodes[i].value;
}

double predict_active(const PredictorModel& model, const std::vector<double>& x) {
  if (const auto* lin = std::get_if<LinearState>(&model.state)) {
    double s = lin->intercept;
    for (std::size_t j = 0; j < x.size(); ++j) s += lin->weights[j] * x[j];
    return s;
  }
  if (const auto* knn = std::get_if<KnnState>(&model.state)) return knn_predict(*knn, x);
  const auto& forest = std::get<ForestState>(model.state);
  double s = 0.0;
  for (const auto& t : forest.trees) s += tree_predict(t, x);
  return s / static_cast<double>(forest.trees.size());
}

}  // namespace

PredictorModel train(Family family, const Dataset& train_set, const Hyperparameters& hyper,
                     std::uint64_t seed) {
  if (train_set.rows.empty()) throw Error("empty-train", "training set has no rows");
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  x.reserve(train_set.rows.size());
  y.reserve(train_set.rows.size());
  for (const auto& r : train_set.rows) {
    x.push_back(active_values(r.x, train_set.mask));
    y.push_back(r.target);
  }
  if (x.front().empty()) throw Error("empty-train", "feature mask removes every feature");

  PredictorModel model;
  model.family = family;
  model.mask = train_set.mask;
  model.fingerprint = {seed, train_set.rows.size()};
  model.hyper = hyper;
  model.dimension = train_set.rows.front().dimension;
  switch (family) {
    case Family::kLinearRidge:
      model.state = fit_linear(x, y, hyper.ridge_lambda);
      break;
    case Family::kKnn:
      model.state = fit_knn(x, y, hyper.knn_k);
      break;
    case Family::kTreeEnsemble: {
      if (hyper.trees < 1) throw Error("bad-hyperparameter", "trees must be >= 1");
      TreeBuilder builder(x, y, hyper);
      ForestState forest;
      forest.trees.reserve(static_cast<std::size_t>(hyper.trees));
      for (int t = 0; t < hyper.trees; ++t) {
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(t))));
        forest.trees.push_back(builder.build(rng));
      }
      model.state = std::move(forest);
      break;
    }
  }
  return model;
}

PredictorModel linear_model(const std::vector<double>& weights, double intercept,
                            const FeatureMask& mask) {
  if (weights.size() != active_indices(mask).size()) {
    throw Error("mask-mismatch", "one weight per active feature required");
  }
  PredictorModel m;
  m.family = Family::kLinearRidge;
  m.mask = mask;
  m.state = LinearState{weights, intercept};
  return m;
}

MaskedFeatures masked(const FeatureVector& x, const FeatureMask& mask) {
  MaskedFeatures out;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (mask[i]) out[i] = x[i];
  }
  return out;
}

Prediction predict(const PredictorModel& model, const MaskedFeatures& features) {
  std::vector<double> x;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (model.mask[i] != features[i].has_value()) {
      throw Error("mask-mismatch", std::string(to_string(kFeatures[i])) +
                                       (model.mask[i] ? " is required by the model"
                                                      : " is not used by the model"));
    }
    if (features[i]) x.push_back(*features[i]);
  }
  const double raw = predict_active(model, x);
  return {raw, std::clamp(raw, 0.0, 5.0)};
}

double predict_full(const PredictorModel& model, const FeatureVector& x) {
  return predict_active(model, active_values(x, model.mask));
}

MetricsBundle compute_metrics(const std::vector<double>& predictions,
                              const std::vector<double>& targets) {
  if (predictions.size() != targets.size()) throw Error("degenerate-test", "length mismatch");
  if (predictions.size() < 2) throw Error("degenerate-test", "need at least two test rows");
  const bool cp = stats::is_constant(predictions);
  const bool ct = stats::is_constant(targets);
  if (cp && ct) throw Error("degenerate-test", "predictions and targets are both constant");
  MetricsBundle m;
  if (!cp && !ct) {
    m.srcc = stats::spearman(predictions, targets);
    m.plcc = stats::pearson(predictions, targets);
    m.krcc = stats::kendall(predictions, targets);
  }
  double se = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    se += (predictions[i] - targets[i]) * (predictions[i] - targets[i]);
  }
  m.rmse = std::sqrt(se / static_cast<double>(targets.size()));
  return m;
}

MetricsBundle evaluate(const PredictorModel& model, const Dataset& test_set) {
  if (test_set.rows.empty()) throw Error("degenerate-test", "test set has no rows");
  std::vector<double> pred, target;
  pred.reserve(test_set.rows.size());
  target.reserve(test_set.rows.size());
  for (const auto& r : test_set.rows) {
    pred.push_back(predict_full(model, r.x));
    target.push_back(r.target);
  }
  return compute_metrics(pred, target);
}

std::vector<AblationRow> ablate(const Dataset& dataset, Family family, const Hyperparameters& hyper,
                                std::uint64_t seed) {
  const auto split = split_by_category(dataset, seed);
  std::vector<AblationRow> rows;
  auto run = [&](std::optional<Feature> dropped) {
    Dataset train_set = split.train;
    Dataset test_set = split.test;
    FeatureMask mask = kAllFeatures;
    if (dropped) mask[static_cast<std::size_t>(*dropped)] = false;
    train_set.mask = test_set.mask = mask;
    const auto model = train(family, train_set, hyper, seed);
    rows.push_back({dropped, evaluate(model, test_set)});
  };
  run(std::nullopt);
  for (auto f : kFeatures) run(f);
  return rows;
}

MetricsBundle verify_held_out(const PredictorModel& model, const Dataset& held_out,
                              const ExperimentGrid& training_grid) {
  if (held_out.rows.empty()) throw Error("degenerate-test", "no held-out rows");
  for (const auto& r : held_out.rows) {
    if (training_grid.contains(QosConfig{r.x[2], r.x[3], r.x[4]})) {
      throw Error("on-grid-record", "question " + r.question_id + " uses a training-grid QoS point");
    }
  }
  return evaluate(model, held_out);
}

namespace {

using json = nlohmann::json;

json hyper_to_json(const Hyperparameters& h) {
  return {{"ridge_lambda", h.ridge_lambda}, {"knn_k", h.knn_k},
          {"trees", h.trees},               {"max_depth", h.max_depth},
          {"min_samples_leaf", h.min_samples_leaf}, {"max_features", h.max_features},
          {"sample_fraction", h.sample_fraction}};
}

Hyperparameters hyper_from_json(const json& j) {
  Hyperparameters h;
  h.ridge_lambda = j.at("ridge_lambda").get<double>();
  h.knn_k = j.at("knn_k").get<int>();
  h.trees = j.at("trees").get<int>();
  h.max_depth = j.at("max_depth").get<int>();
  h.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  h.max_features = j.at("max_features").get<int>();
  h.sample_fraction = j.at("sample_fraction").get<double>();
  return h;
}

}  // namespace

std::vector<std::uint8_t> serialize(const PredictorModel& model) {
  json j;
  j["format"] = "qoe-model";
  j["version"] = 1;
  j["family"] = std::string(to_string(model.family));
  j["mask"] = model.mask;
  j["seed"] = model.fingerprint.seed;
  j["rows"] = model.fingerprint.rows;
  j["hyper"] = hyper_to_json(model.hyper);
  j["target"] = std::string(to_string(model.target));
  j["dimension"] = std::string(to_string(model.dimension));
  json anchors = json::object();
  for (const auto& [dim, mm] : model.anchors.range) {
    anchors[std::string(to_string(dim))] = {mm.first, mm.second};
  }
  j["anchors"] = anchors;
  if (const auto* lin = std::get_if<LinearState>(&model.state)) {
    j["state"] = {{"weights", lin->weights}, {"intercept", lin->intercept}};
  } else if (const auto* knn = std::get_if<KnnState>(&model.state)) {
    j["state"] = {{"k", knn->k},           {"mean", knn->mean},        {"scale", knn->scale},
                  {"points", knn->points}, {"targets", knn->targets}};
  } else {
    json trees = json::array();
    for (const auto& t : std::get<ForestState>(model.state).trees) {
      std::vector<int> feature, left, right;
      std::vector<double> threshold, value;
      for (const auto& n : t.nodes) {
        feature.push_back(n.feature);
        left.push_back(n.left);
        right.push_back(n.right);
        threshold.push_back(n.threshold);
        value.push_back(n.value);
      }
      trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left},
                       {"right", right},     {"value", value}});
    }
    j["state"] = {{"trees", trees}};
  }
  return json::to_cbor(j);
}

PredictorModel deserialize(const std::vector<std::uint8_t>& bytes) {
  json j;
  try {
    j = json::from_cbor(bytes);
  } catch (const json::exception& e) {
    throw Error("bad-model", e.what());
  }
  try {
    if (j.at("format") != "qoe-model" || j.at("version") != 1) {
      throw Error("bad-model", "unsupported model format");
    }
    PredictorModel m;
    m.family = parse_family(j.at("family").get<std::string>());
    m.mask = j.at("mask").get<FeatureMask>();
    m.fingerprint = {j.at("seed").get<std::uint64_t>(), j.at("rows").get<std::size_t>()};
    m.hyper = hyper_from_json(j.at("hyper"));
    m.target = parse_target_mode(j.at("target").get<std::string>());
    m.dimension = parse_dimension(j.at("dimension").get<std::string>());
    for (auto it = j.at("anchors").begin(); it != j.at("anchors").end(); ++it) {
      m.anchors.range[parse_dimension(it.key())] = {it.value()[0].get<double>(),
                                                    it.value()[1].get<double>()};
    }
    const auto& s = j.at("state");
    switch (m.family) {
      case Family::kLinearRidge:
        m.state = LinearState{s.at("weights").get<std::vector<double>>(),
                              s.at("intercept").get<double>()};
        break;
      case Family::kKnn: {
        KnnState k;
        k.k = s.at("k").get<int>();
        k.mean = s.at("mean").get<std::vector<double>>();
        k.scale = s.at("scale").get<std::vector<double>>();
        k.points = s.at("points").get<std::vector<std::vector<double>>>();
        k.targets = s.at("targets").get<std::vector<double>>();
        m.state = std::move(k);
        break;
      }
      case Family::kTreeEnsemble: {
        ForestState f;
        for (const auto& t : s.at("trees")) {
          const auto feature = t.at("feature").get<std::vector<int>>();
          const auto threshold = t.at("threshold").get<std::vector<double>>();
          const auto left = t.at("left").get<std::vector<int>>();
          const auto right = t.at("right").get<std::vector<int>>();
          const auto value = t.at("value").get<std::vector<double>>();
          Tree tree;
          for (std::size_t i = 0; i < feature.size(); ++i) {
            tree.nodes.push_back({feature[i], threshold[i], left[i], right[i], value[i]});
          }
          f.trees.push_back(std::move(tree));
        }
        m.state = std::move(f);
        break;
      }
    }
    return m;
  } catch (const json::exception& e) {
    throw Error("bad-model", e.what());
  }
}

void save_model(const std::filesystem::path& path, const PredictorModel& model) {
  const auto bytes = serialize(model);
  write_file(path, std::string(bytes.begin(), bytes.end()));
}

PredictorModel load_model(const std::filesystem::path& path) {
  const auto data = read_file(path);
  return deserialize(std::vector<std::uint8_t>(data.begin(), data.end()));
}

}  // namespace qoe::predict
