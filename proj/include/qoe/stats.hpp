#pragma once

#include <span>
#include <vector>

namespace qoe::stats {

/// 1-based average fractional ranks; tied values share the mean of the
/// positions they occupy.
std::vector<double> fractional_ranks(std::span<const double> values);

double mean(std::span<const double> values);
/// Population standard deviation (divides by n).
double population_sd(std::span<const double> values);

bool is_constant(std::span<const double> values);

/// Product-moment correlation. Throws Error("degenerate-input") when the
/// lengths differ, n < 2, or either side is constant.
double pearson(std::span<const double> a, std::span<const double> b);

/// Spearman rank correlation as the Pearson correlation of fractional ranks.
/// Throws Error("degenerate-input") for n < 2, unequal lengths, or both sides
/// constant; returns 0 when exactly one side is constant.
double spearman(std::span<const double> a, std::span<const double> b);

/// Kendall tau-b, O(n log n) (Knight's merge-sort count). Throws
/// Error("degenerate-input") for n < 2, unequal lengths, or when either side
/// is constant (tau-b denominator zero).
double kendall(std::span<const double> a, std::span<const double> b);

}  // namespace qoe::stats
