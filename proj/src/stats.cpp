#include "gist/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace gist {
namespace {

struct TieSums {
  double pairs = 0;  // Σ t(t-1)/2
  double v = 0;      // Σ t(t-1)(2t+5)
  double t1 = 0;     // Σ t(t-1)
  double t2 = 0;     // Σ t(t-1)(t-2)
};

void add_run(TieSums& s, double t) {
  s.pairs += t * (t - 1) / 2;
  s.v += t * (t - 1) * (2 * t + 5);
  s.t1 += t * (t - 1);
  s.t2 += t * (t - 1) * (t - 2);
}

TieSums tie_sums(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  TieSums s;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    add_run(s, static_cast<double>(j - i));
    i = j;
  }
  return s;
}

// Merge sort that counts exchanges (strict inversions).
std::uint64_t sort_count_swaps(std::vector<double>& a, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = sort_count_swaps(a, buf, lo, mid) + sort_count_swaps(a, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (a[j] < a[i]) {
      swaps += mid - i;
      buf[k++] = a[j++];
    } else {
      buf[k++] = a[i++];
    }
  }
  while (i < mid) buf[k++] = a[i++];
  while (j < hi) buf[k++] = a[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            a.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

// Two-sided exact p for tie-free n via the inversion-count (Mahonian) distribution.
double exact_p(std::size_t n, double s) {
  std::vector<double> counts{1.0};
  for (std::size_t m = 2; m <= n; ++m) {
    std::vector<double> next(counts.size() + m - 1, 0.0);
    for (std::size_t i = 0; i < counts.size(); ++i) {
      for (std::size_t j = 0; j < m; ++j) next[i + j] += counts[i];
    }
    counts.swap(next);
  }
  const double n0 = static_cast<double>(n * (n - 1) / 2);
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  double tail = 0.0;
  for (std::size_t inv = 0; inv < counts.size(); ++inv) {
    const double si = n0 - 2.0 * static_cast<double>(inv);
    if (std::abs(si) >= std::abs(s) - 1e-9) tail += counts[inv];
  }
  return std::min(1.0, tail / total);
}

}  // namespace

std::string_view to_string(PValueMethod m) { return m == PValueMethod::Exact ? "exact" : "normal_approx"; }

CorrelationStat kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(x.size()) + " vs " + std::to_string(y.size()) + " samples");
  }
  const std::size_t n = x.size();
  if (n < 3) throw Error(ErrorCode::TooFewSamples, "Kendall tau needs at least 3 samples, got " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw Error(ErrorCode::NonFiniteValue, "non-finite sample");
  }

  // Knight's algorithm: sort by (x, y), count joint ties, then count y inversions.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });
  double joint = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && x[order[j]] == x[order[i]] && y[order[j]] == y[order[i]]) ++j;
    const double t = static_cast<double>(j - i);
    joint += t * (t - 1) / 2;
    i = j;
  }
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  std::vector<double> buf(n);
  const auto swaps = static_cast<double>(sort_count_swaps(ys, buf, 0, n));

  const TieSums tx = tie_sums(std::vector<double>(x.begin(), x.end()));
  const TieSums ty = tie_sums(std::vector<double>(y.begin(), y.end()));
  const double nd = static_cast<double>(n);
  const double n0 = nd * (nd - 1) / 2;
  if (n0 - tx.pairs == 0 || n0 - ty.pairs == 0) throw Error(ErrorCode::AllTied, "tau undefined: constant input");

  const double s = n0 - tx.pairs - ty.pairs + joint - 2 * swaps;
  CorrelationStat out;
  out.n = n;
  out.tau = std::clamp(s / std::sqrt((n0 - tx.pairs) * (n0 - ty.pairs)), -1.0, 1.0);

  if (n <= kExactKendallMaxN && tx.pairs == 0 && ty.pairs == 0) {
    out.method = PValueMethod::Exact;
    out.p_value = exact_p(n, s);
    return out;
  }
  const double var = (nd * (nd - 1) * (2 * nd + 5) - tx.v - ty.v) / 18 + tx.t1 * ty.t1 / (2 * nd * (nd - 1)) +
                     tx.t2 * ty.t2 / (9 * nd * (nd - 1) * (nd - 2));
  const double z = std::max(0.0, std::abs(s) - 1.0) / std::sqrt(var);
  out.method = PValueMethod::NormalApprox;
  out.p_value = std::clamp(std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
  return out;
}

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::TooFewSamples, "quantile of an empty list");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Quartiles quartiles(std::span<const double> values) {
  return {quantile(values, 0.25), quantile(values, 0.5), quantile(values, 0.75)};
}

std::vector<double> rank_vector(std::span<const double> values, Orientation orientation) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const bool up = orientation == Orientation::SimilarityUp;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return up ? values[a] > values[b] : values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double mean = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = mean;
    i = j;
  }
  return ranks;
}

}  // namespace gist
