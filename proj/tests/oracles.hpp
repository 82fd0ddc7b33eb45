#pragma once

// Reference implementations used only by tests. Each one follows the textbook
// definition directly and shares no code with the library.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> n;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

inline Eigen::MatrixXd center_normalize(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd c = x;
  for (int j = 0; j < c.cols(); ++j) {
    double mean = 0;
    for (int i = 0; i < c.rows(); ++i) mean += c(i, j);
    mean /= c.rows();
    for (int i = 0; i < c.rows(); ++i) c(i, j) -= mean;
  }
  double ss = 0;
  for (int i = 0; i < c.rows(); ++i)
    for (int j = 0; j < c.cols(); ++j) ss += c(i, j) * c(i, j);
  return c / std::sqrt(ss);
}

// Projection-weighted CCA from the covariance eigenproblem
//   S11^-1 S12 S22^-1 S21 a = rho^2 a,
// solved as a generalized symmetric problem. Weights come from the side of x.
inline double pwcca_one_side(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const Eigen::MatrixXd s11 = x.transpose() * x;
  const Eigen::MatrixXd s22 = y.transpose() * y;
  const Eigen::MatrixXd s12 = x.transpose() * y;
  const Eigen::MatrixXd lhs = s12 * s22.inverse() * s12.transpose();
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(lhs, s11);
  const int k = static_cast<int>(std::min(x.cols(), y.cols()));
  double num = 0, den = 0;
  // eigenvalues ascending: take the top k
  for (int i = 0; i < k; ++i) {
    const int idx = static_cast<int>(x.cols()) - 1 - i;
    const double rho = std::sqrt(std::max(0.0, ges.eigenvalues()(idx)));
    Eigen::VectorXd h = x * ges.eigenvectors().col(idx);
    h /= h.norm();
    double alpha = 0;
    for (int j = 0; j < x.cols(); ++j) alpha += std::abs(h.dot(x.col(j)));
    num += alpha * std::min(rho, 1.0);
    den += alpha;
  }
  return num / den;
}

inline double pwcca(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  return 0.5 * (pwcca_one_side(x, y) + pwcca_one_side(y, x));
}

// 1 - ||X^T Y||_F^2 / (||X^T X||_F ||Y^T Y||_F), every sum spelled out.
inline double cka_distance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const auto n = x.rows();
  auto cross_sq = [n](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double s = 0;
    for (int i = 0; i < a.cols(); ++i)
      for (int j = 0; j < b.cols(); ++j) {
        double dot = 0;
        for (int r = 0; r < n; ++r) dot += a(r, i) * b(r, j);
        s += dot * dot;
      }
    return s;
  };
  return 1.0 - cross_sq(x, y) / (std::sqrt(cross_sq(x, x)) * std::sqrt(cross_sq(y, y)));
}

struct PairCounts {
  long concordant = 0, discordant = 0, tied_x = 0, tied_y = 0, total = 0;
};

inline PairCounts count_pairs(const std::vector<double>& x, const std::vector<double>& y) {
  PairCounts c;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      ++c.total;
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0) ++c.tied_x;
      if (dy == 0) ++c.tied_y;
      if (dx == 0 || dy == 0) continue;
      if ((dx > 0) == (dy > 0)) ++c.concordant;
      else ++c.discordant;
    }
  return c;
}

inline double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  const auto c = count_pairs(x, y);
  return static_cast<double>(c.concordant - c.discordant) /
         std::sqrt(static_cast<double>(c.total - c.tied_x) * static_cast<double>(c.total - c.tied_y));
}

// Exact two-sided p-value by enumerating every permutation of y (no ties).
inline double kendall_exact_p(const std::vector<double>& x, std::vector<double> y) {
  const auto observed = count_pairs(x, y);
  const long s_obs = std::labs(observed.concordant - observed.discordant);
  std::sort(y.begin(), y.end());
  long extreme = 0, all = 0;
  do {
    const auto c = count_pairs(x, y);
    ++all;
    if (std::labs(c.concordant - c.discordant) >= s_obs) ++extreme;
  } while (std::next_permutation(y.begin(), y.end()));
  return static_cast<double>(extreme) / static_cast<double>(all);
}

// Section index by scanning the k half-open intervals; last one closed.
inline int section(double v, double lo, double hi, int k) {
  if (lo == hi) return v == lo ? 0 : -1;
  for (int s = 0; s < k; ++s) {
    const double a = lo + s * (hi - lo) / k;
    const double b = lo + (s + 1) * (hi - lo) / k;
    if (v >= a && (s == k - 1 ? v <= hi : v < b)) return s;
  }
  return -1;
}

using SectionSet = std::set<std::pair<int, int>>;  // (neuron, section)

inline SectionSet coverage(const Eigen::MatrixXd& train, const Eigen::MatrixXd& eval,
                           const std::vector<std::uint8_t>& mask, int k) {
  SectionSet out;
  for (int r = 0; r < eval.rows(); ++r) {
    if (!mask[r]) continue;
    for (int n = 0; n < eval.cols(); ++n) {
      const double lo = train.col(n).minCoeff(), hi = train.col(n).maxCoeff();
      const int s = section(eval(r, n), lo, hi, k);
      if (s >= 0) out.insert({n, s});
    }
  }
  return out;
}

template <typename Set>
double overlap(const Set& ref, const Set& obj) {
  std::size_t shared = 0;
  for (const auto& e : obj) shared += ref.count(e);
  return static_cast<double>(shared) / static_cast<double>(obj.size());
}

}  // namespace oracle
