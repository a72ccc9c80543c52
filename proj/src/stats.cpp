#include "qoe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "qoe/error.hpp"

namespace qoe::stats {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("degenerate-input", "inputs differ in length");
  if (a.size() < 2) throw Error("degenerate-input", "need at least two observations");
}

// Centered product-moment correlation; caller guarantees non-constant inputs.
double centered_correlation(std::span<const double> a, std::span<const double> b) {
  const double ma = mean(a);
  const double mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  const double r = sab / std::sqrt(saa * sbb);
  return std::clamp(r, -1.0, 1.0);
}

// Number of tied pairs within runs of equal values in an already sorted range,
// where `same(i, j)` decides equality of neighbours.
template <typename Same>
std::int64_t tied_pairs(std::size_t n, Same same) {
  std::int64_t total = 0;
  std::int64_t run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (same(i - 1, i)) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  total += run * (run - 1) / 2;
  return total;
}

// Counts inversions of `v` while merge-sorting it.
std::int64_t count_swaps(std::vector<double>& v, std::vector<double>& buf, std::size_t lo,
                         std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = count_swaps(v, buf, lo, mid) + count_swaps(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

std::vector<double> fractional_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 (0-based) share rank mean((i+1)..j)
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double population_sd(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

bool is_constant(std::span<const double> values) {
  return std::adjacent_find(values.begin(), values.end(), std::not_equal_to<>()) == values.end();
}

double pearson(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  if (is_constant(a) || is_constant(b)) throw Error("degenerate-input", "constant input");
  return centered_correlation(a, b);
}

double spearman(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  const bool ca = is_constant(a);
  const bool cb = is_constant(b);
  if (ca && cb) throw Error("degenerate-input", "both inputs constant");
  if (ca || cb) return 0.0;
  const auto ra = fractional_ranks(a);
  const auto rb = fractional_ranks(b);
  return centered_correlation(ra, rb);
}

double kendall(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  const std::size_t n = a.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a[i] < a[j] || (a[i] == a[j] && b[i] < b[j]);
  });

  const auto n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t ties_a =
      tied_pairs(n, [&](std::size_t i, std::size_t j) { return a[order[i]] == a[order[j]]; });
  const std::int64_t ties_ab = tied_pairs(n, [&](std::size_t i, std::size_t j) {
    return a[order[i]] == a[order[j]] && b[order[i]] == b[order[j]];
  });

  std::vector<double> bs(n);
  for (std::size_t i = 0; i < n; ++i) bs[i] = b[order[i]];
  std::vector<double> buf(n);
  const std::int64_t swaps = count_swaps(bs, buf, 0, n);
  const std::int64_t ties_b =
      tied_pairs(n, [&](std::size_t i, std::size_t j) { return bs[i] == bs[j]; });

  if (ties_a == n0 || ties_b == n0) throw Error("degenerate-input", "all pairs tied");
  // concordant - discordant = n0 - ties_a - ties_b + ties_ab - 2*swaps
  const double num = static_cast<double>(n0 - ties_a - ties_b + ties_ab - 2 * swaps);
  const double den = std::sqrt(static_cast<double>(n0 - ties_a) * static_cast<double>(n0 - ties_b));
  return std::clamp(num / den, -1.0, 1.0);
}

}  // namespace qoe::stats
