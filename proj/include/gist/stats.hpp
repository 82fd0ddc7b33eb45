#pragma once

#include "gist/similarity.hpp"

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace gist {

enum class PValueMethod { Exact, NormalApprox };

std::string_view to_string(PValueMethod m);

struct CorrelationStat {
  double tau = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  PValueMethod method = PValueMethod::NormalApprox;
};

/// Largest tie-free sample size for which the exact null distribution is used.
inline constexpr std::size_t kExactKendallMaxN = 9;

/// Kendall tau-b with a two-sided p-value. Throws TooFewSamples (n < 3),
/// LengthMismatch, or AllTied when either input is constant.
CorrelationStat kendall_tau_b(std::span<const double> x, std::span<const double> y);

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

/// Linearly interpolated quantile (type 7) of unsorted values.
double quantile(std::span<const double> values, double q);
Quartiles quartiles(std::span<const double> values);

/// 1 = best: largest value for SimilarityUp, smallest for DistanceUp; ties share the mean rank.
std::vector<double> rank_vector(std::span<const double> values, Orientation orientation);

}  // namespace gist
