#include "gist/properties.hpp"

#include "gist/log.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace gist {
namespace {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& p) {
  const Eigen::Index n = p.rows();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (p.row(i) - p.row(j)).squaredNorm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

// Relabel so cluster ids follow the lowest member index.
std::vector<int> canonical_labels(const std::vector<int>& raw) {
  std::map<int, int> remap;
  std::vector<int> out(raw.size(), -1);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] < 0) continue;
    auto [it, fresh] = remap.emplace(raw[i], static_cast<int>(remap.size()));
    out[i] = it->second;
  }
  return out;
}

int count_clusters(const std::vector<int>& labels) {
  int m = -1;
  for (const int l : labels) m = std::max(m, l);
  return m + 1;
}

}  // namespace

std::string_view to_string(Reducer r) { return r == Reducer::Pca ? "pca" : "none"; }
std::string_view to_string(ClusterAlgo a) { return a == ClusterAlgo::Dbscan ? "dbscan" : "hdbscan_lite"; }

Reducer parse_reducer(std::string_view s) {
  if (s == "pca") return Reducer::Pca;
  if (s == "none") return Reducer::None;
  throw Error(ErrorCode::InvalidArgument, "unknown reducer \"" + std::string(s) + "\"");
}

ClusterAlgo parse_cluster_algo(std::string_view s) {
  if (s == "dbscan") return ClusterAlgo::Dbscan;
  if (s == "hdbscan_lite" || s == "hdbscan-lite") return ClusterAlgo::HdbscanLite;
  throw Error(ErrorCode::InvalidArgument, "unknown clustering algorithm \"" + std::string(s) + "\"");
}

void ClusteringConfig::validate() const {
  if (reduced_dims < 2) throw Error(ErrorCode::InvalidArgument, "reduced_dims must be >= 2");
  if (min_pts < 2) throw Error(ErrorCode::InvalidArgument, "min_pts must be >= 2");
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "eps must be > 0");
  if (!std::isfinite(label_feature_scale) || label_feature_scale < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "label_feature_scale must be finite and >= 0");
  }
}

std::string ClusteringConfig::hash() const {
  std::ostringstream os;
  os.precision(17);
  os << to_string(reducer) << ':' << reduced_dims << ':' << to_string(cluster_algo) << ':' << eps << ':' << min_pts
     << ':' << label_feature_scale << ':' << rng_seed << ':' << standardize_after_filter;
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream hex;
  hex << std::hex << h;
  return hex.str();
}

Eigen::MatrixXd reduce_dims(const Eigen::MatrixXd& points, const ClusteringConfig& config) {
  if (config.reducer == Reducer::None) return points;
  const Eigen::Index dims = config.reduced_dims;
  if (points.rows() <= dims) {
    throw Error(ErrorCode::TooFewRows, "PCA to " + std::to_string(dims) + " dims needs more than " +
                                           std::to_string(dims) + " rows, got " + std::to_string(points.rows()));
  }
  const Eigen::MatrixXd centered = points.rowwise() - points.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double tol = sv.size() ? sv(0) * 1e-10 * static_cast<double>(std::max(points.rows(), points.cols())) : 0.0;
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;
  const Eigen::Index keep = std::min(rank, dims);
  if (keep < dims) {
    warn("PCA: only " + std::to_string(keep) + " non-zero components for " + std::to_string(dims) +
         " requested dims; padding with zero columns");
  }
  Eigen::MatrixXd basis = svd.matrixV().leftCols(keep);
  for (Eigen::Index c = 0; c < keep; ++c) {
    Eigen::Index arg = 0;
    basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, c) < 0.0) basis.col(c) *= -1.0;
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(points.rows(), dims);
  out.leftCols(keep) = centered * basis;
  return out;
}

std::vector<int> dbscan(const Eigen::MatrixXd& points, double eps, int min_pts) {
  const auto n = static_cast<std::size_t>(points.rows());
  const Eigen::MatrixXd d2 = squared_distances(points);
  const double eps2 = eps * eps;
  std::vector<std::vector<std::size_t>> nbrs(n);
  std::vector<bool> core(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (d2(i, j) <= eps2) nbrs[i].push_back(j);  // includes i itself
    }
    core[i] = static_cast<int>(nbrs[i].size()) >= min_pts;
  }
  // cores first: connected components over core-core links
  std::vector<int> label(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || label[i] >= 0) continue;
    std::deque<std::size_t> queue{i};
    label[i] = next;
    while (!queue.empty()) {
      const auto p = queue.front();
      queue.pop_front();
      for (const auto q : nbrs[p]) {
        if (core[q] && label[q] < 0) {
          label[q] = next;
          queue.push_back(q);
        }
      }
    }
    ++next;
  }
  // border points join the cluster of their lowest-index core neighbour
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    for (const auto q : nbrs[i]) {
      if (core[q]) {
        label[i] = label[q];
        break;
      }
    }
  }
  return canonical_labels(label);
}

std::vector<int> hdbscan_lite(const Eigen::MatrixXd& points, int min_pts) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n == 0) return {};
  const Eigen::MatrixXd dist = squared_distances(points).cwiseSqrt();
  // core distance: distance to the min_pts-th nearest point, self included
  std::vector<double> core(n, std::numeric_limits<double>::infinity());
  const auto kth = static_cast<std::size_t>(min_pts) - 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (kth >= n) break;
    std::vector<double> row(n);
    for (std::size_t j = 0; j < n; ++j) row[j] = dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(kth), row.end());
    core[i] = row[kth];
  }
  Eigen::MatrixXd mr(n, n);
  std::vector<double> levels;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto a = static_cast<Eigen::Index>(i);
      const auto b = static_cast<Eigen::Index>(j);
      mr(a, b) = i == j ? core[i] : std::max({core[i], core[j], dist(a, b)});
      if (j > i && std::isfinite(mr(a, b))) levels.push_back(mr(a, b));
    }
  }
  if (levels.empty()) return std::vector<int>(n, -1);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  // cut the mutual-reachability graph at a sweep of levels; the partition
  // whose cluster count persists over the widest range of levels wins
  constexpr std::size_t kSteps = 40;
  std::vector<std::vector<int>> cuts;
  std::vector<double> eps_at;
  for (std::size_t s = 0; s < kSteps; ++s) {
    const double q = static_cast<double>(s + 1) / static_cast<double>(kSteps + 1);
    const double eps = levels[static_cast<std::size_t>(q * static_cast<double>(levels.size() - 1))];
    std::vector<int> label(n, -1);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (core[i] > eps || label[i] >= 0) continue;
      std::deque<std::size_t> queue{i};
      label[i] = next;
      while (!queue.empty()) {
        const auto p = queue.front();
        queue.pop_front();
        for (std::size_t q2 = 0; q2 < n; ++q2) {
          if (label[q2] < 0 && core[q2] <= eps &&
              mr(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q2)) <= eps) {
            label[q2] = next;
            queue.push_back(q2);
          }
        }
      }
      ++next;
    }
    // clusters smaller than min_pts are noise, as in HDBSCAN's min cluster size
    std::vector<int> size(static_cast<std::size_t>(next), 0);
    for (const int l : label) {
      if (l >= 0) ++size[static_cast<std::size_t>(l)];
    }
    for (auto& l : label) {
      if (l >= 0 && size[static_cast<std::size_t>(l)] < min_pts) l = -1;
    }
    cuts.push_back(canonical_labels(label));
    eps_at.push_back(eps);
  }
  // a single all-encompassing cluster only wins when nothing finer is stable
  std::size_t best_start = 0;
  double best_span = -1.0;
  int best_count = 0;
  for (std::size_t s = 0; s < cuts.size();) {
    const int c = count_clusters(cuts[s]);
    std::size_t e = s;
    while (e + 1 < cuts.size() && count_clusters(cuts[e + 1]) == c) ++e;
    const double span = std::log(eps_at[e + 1 < eps_at.size() ? e + 1 : e] / eps_at[s]);
    const bool finer = c >= 2 && best_count < 2;
    const bool same_class = (c >= 2) == (best_count >= 2);
    if (c >= 1 && (finer || (same_class && span > best_span))) {
      best_span = span;
      best_start = s;
      best_count = c;
    }
    s = e + 1;
  }
  return cuts[best_start];
}

std::vector<int> cluster_density(const Eigen::MatrixXd& points, const ClusteringConfig& config) {
  config.validate();
  return config.cluster_algo == ClusterAlgo::Dbscan ? dbscan(points, config.eps, config.min_pts)
                                                    : hdbscan_lite(points, config.min_pts);
}

double silhouette_score(const Eigen::MatrixXd& points, std::span<const int> labels) {
  if (static_cast<std::size_t>(points.rows()) != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "labels do not match point count");
  }
  std::vector<std::size_t> idx;
  std::map<int, std::size_t> sizes;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    idx.push_back(i);
    ++sizes[labels[i]];
  }
  if (sizes.size() < 2) throw Error(ErrorCode::TooFewClusters, "silhouette needs at least 2 non-noise clusters");
  double total = 0.0;
  for (const auto i : idx) {
    if (sizes[labels[i]] == 1) continue;  // singleton contributes 0
    std::map<int, double> sum;
    for (const auto j : idx) {
      if (j == i) continue;
      sum[labels[j]] += (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).norm();
    }
    const double a = sum[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [c, s] : sum) {
      if (c != labels[i]) b = std::min(b, s / static_cast<double>(sizes[c]));
    }
    const double m = std::max(a, b);
    total += m > 0.0 ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(idx.size());
}

}  // namespace gist
