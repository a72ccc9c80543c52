#pragma once

// Shared fixtures and brute-force reference implementations for the tests.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "qoe/core.hpp"

namespace qoe::testing {

// Pearson from pairwise differences: sum_{i<j} da*db / sqrt(sum da^2 * sum db^2).
inline double brute_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      sab += da * db;
      saa += da * da;
      sbb += db * db;
    }
  }
  return sab / std::sqrt(saa * sbb);
}

// Rank = 1 + (#strictly smaller) + (#equal others) / 2.
inline std::vector<double> brute_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0.0, equal = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (j == i) continue;
      if (v[j] < v[i]) less += 1.0;
      if (v[j] == v[i]) equal += 1.0;
    }
    r[i] = 1.0 + less + equal / 2.0;
  }
  return r;
}

inline bool all_equal(const std::vector<double>& v) {
  for (double x : v) {
    if (x != v.front()) return false;
  }
  return true;
}

inline double brute_spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (all_equal(a) || all_equal(b)) return 0.0;
  return brute_pearson(brute_ranks(a), brute_ranks(b));
}

// Kendall tau-b by counting every pair.
inline double brute_kendall(const std::vector<double>& a, const std::vector<double>& b) {
  double concordant = 0.0, discordant = 0.0, ties_a = 0.0, ties_b = 0.0, n0 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      n0 += 1.0;
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      if (da == 0.0) ties_a += 1.0;
      if (db == 0.0) ties_b += 1.0;
      if (da == 0.0 || db == 0.0) continue;
      if ((da > 0) == (db > 0)) {
        concordant += 1.0;
      } else {
        discordant += 1.0;
      }
    }
  }
  return (concordant - discordant) / std::sqrt((n0 - ties_a) * (n0 - ties_b));
}

inline RatingRecord make_record(const std::string& rater, const std::string& question,
                                ContentConfig content, QosConfig qos, int overall, int content_score,
                                int response) {
  RatingRecord r;
  r.session_id = "s-" + rater;
  r.rater_id = rater;
  r.question_id = question;
  r.category = Category::kKnowledgeReasoning;
  r.content = content;
  r.qos = qos;
  r.scores = {{Dimension::kOverall, overall},
              {Dimension::kContent, content_score},
              {Dimension::kResponse, response}};
  r.timestamp = parse_timestamp("2025-01-01T00:00:00.000Z");
  return r;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("qoe-test-" + name + "-" + std::to_string(std::random_device{}()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Deterministic store of raters x conditions records for pipeline bookkeeping.
// Honest raters score (1 + (k mod 5)) on every dimension for condition k.
// z-outliers give a flat 3 everywhere except a single 5 (one |z| far above 2);
// srcc-outliers score the reversed pattern.
struct BookkeepingStore {
  std::vector<RatingRecord> records;
  std::vector<std::string> z_outliers;
  std::vector<std::string> srcc_outliers;
};

inline BookkeepingStore bookkeeping_store(std::size_t honest, std::size_t z_out, std::size_t srcc_out,
                                          std::size_t conditions) {
  BookkeepingStore store;
  const auto combos = standard_grid().combinations();
  const auto questions = standard_question_set();
  auto condition = [&](std::size_t k) {
    const auto& q = questions.questions[k % questions.questions.size()];
    const auto& [content, qos] = combos[(k * 7) % combos.size()];
    return std::tuple{q.question_id, q.category, content, qos};
  };
  auto add_rater = [&](const std::string& id, auto score_of) {
    for (std::size_t k = 0; k < conditions; ++k) {
      const auto [qid, cat, content, qos] = condition(k);
      const int s = score_of(k);
      auto r = make_record(id, qid, content, qos, s, s, s);
      r.category = cat;
      store.records.push_back(std::move(r));
    }
  };
  char id[32];
  for (std::size_t i = 0; i < honest; ++i) {
    std::snprintf(id, sizeof id, "honest-%03zu", i);
    add_rater(id, [](std::size_t k) { return 1 + static_cast<int>(k % 5); });
  }
  for (std::size_t i = 0; i < z_out; ++i) {
    std::snprintf(id, sizeof id, "spike-%03zu", i);
    store.z_outliers.push_back(id);
    add_rater(id, [](std::size_t k) { return k == 0 ? 5 : 3; });
  }
  for (std::size_t i = 0; i < srcc_out; ++i) {
    std::snprintf(id, sizeof id, "reversed-%03zu", i);
    store.srcc_outliers.push_back(id);
    add_rater(id, [](std::size_t k) { return 5 - static_cast<int>(k % 5); });
  }
  return store;
}

}  // namespace qoe::testing
