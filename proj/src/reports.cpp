#include "gist/pipeline.hpp"

#include "gist/log.hpp"
#include "gist/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace gist {

double time_ratio(const EfficiencyInput& in) {
  if (in.n_models == 0) throw Error(ErrorCode::InvalidArgument, "n_models must be >= 1");
  if (!(in.gist_offline_seconds >= 0.0) || !(in.gist_online_seconds_per_model >= 0.0) ||
      in.gist_offline_seconds + in.gist_online_seconds_per_model <= 0.0) {
    throw Error(ErrorCode::InvalidArgument, "GIST times must be non-negative and not both zero");
  }
  const auto& gen = in.generation_seconds_per_model;
  if (gen.size() != 1 && gen.size() != in.n_models) {
    throw Error(ErrorCode::LengthMismatch, "need 1 or n_models generation times, got " + std::to_string(gen.size()));
  }
  double total = 0.0;
  for (const double g : gen) {
    if (!(g > 0.0)) throw Error(ErrorCode::InvalidArgument, "generation times must be > 0");
    total += g;
  }
  if (gen.size() == 1) total *= static_cast<double>(in.n_models);
  const double n = static_cast<double>(in.n_models);
  return (in.gist_offline_seconds + n * in.gist_online_seconds_per_model) / total;
}

double efficiency_index(const EfficiencyInput& in) {
  if (!(in.coverage >= 0.0 && in.coverage <= 1.0)) throw Error(ErrorCode::OutOfRange, "coverage must lie in [0,1]");
  return in.coverage / time_ratio(in);
}

Heatmap rank_heatmap(const Workspace& ws, std::span<const PairValue> values, Orientation orientation) {
  std::vector<std::string> types;
  for (const auto& m : ws.models) types.push_back(m.model_type);
  std::sort(types.begin(), types.end());
  types.erase(std::unique(types.begin(), types.end()), types.end());
  if (types.size() < 2) throw Error(ErrorCode::NotEnoughTypes, "heatmap needs at least 2 model types");
  const auto index = [&](const std::string& model_id) {
    const auto& t = ws.model(model_id).model_type;
    return static_cast<Eigen::Index>(std::lower_bound(types.begin(), types.end(), t) - types.begin());
  };

  const auto T = static_cast<Eigen::Index>(types.size());
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(T, T);
  Eigen::MatrixXi cnt = Eigen::MatrixXi::Zero(T, T);
  for (const auto& v : values) {
    const auto r = index(v.objective);
    const auto c = index(v.reference);
    sum(r, c) += v.value;
    ++cnt(r, c);
  }
  Heatmap h;
  h.types = types;
  h.orientation = orientation;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  h.mean = Eigen::MatrixXd::Constant(T, T, nan);
  h.rank = Eigen::MatrixXd::Constant(T, T, nan);
  for (Eigen::Index r = 0; r < T; ++r) {
    std::vector<Eigen::Index> cols;
    std::vector<double> row;
    for (Eigen::Index c = 0; c < T; ++c) {
      if (cnt(r, c) == 0) continue;
      h.mean(r, c) = sum(r, c) / cnt(r, c);
      cols.push_back(c);
      row.push_back(h.mean(r, c));
    }
    if (row.empty()) continue;
    const auto ranks = rank_vector(row, orientation);
    for (std::size_t i = 0; i < cols.size(); ++i) h.rank(r, cols[i]) = ranks[i];
  }
  return h;
}

std::vector<PairValue> property_pairs(const Workspace& ws, const PropertyOptions& options, unsigned jobs) {
  std::vector<const ModelEntry*> refs;
  for (const auto& m : ws.models) {
    if (m.role == ModelRole::Reference && ws.owned_testset(m.id)) refs.push_back(&m);
  }
  std::vector<std::vector<PairValue>> rows(refs.size());
  parallel_for(refs.size(), jobs, [&](std::size_t o) {
    std::vector<std::string> pool;
    std::vector<std::string> owners;
    for (const auto* p : refs) {
      if (p == refs[o]) continue;
      pool.push_back(ws.owned_testset(p->id)->id);
      owners.push_back(p->id);
    }
    try {
      PropertyEvaluator eval(ws, refs[o]->id, ws.owned_testset(refs[o]->id)->id, pool, options);
      for (std::size_t i = 0; i < pool.size(); ++i) rows[o].push_back({refs[o]->id, owners[i], eval.value(pool[i])});
    } catch (const Error& e) {
      warn("heatmap: objective " + refs[o]->id + " skipped: " + e.what());
    }
  });
  std::vector<PairValue> out;
  for (auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

std::vector<PairValue> similarity_pairs(const Workspace& ws, SimilarityEngine& engine, Metric metric) {
  std::vector<PairValue> out;
  for (const auto& a : ws.models) {
    std::vector<std::string> others;
    for (const auto& b : ws.models) {
      if (b.id != a.id && b.role == ModelRole::Reference) others.push_back(b.id);
    }
    const auto scores = engine.pairwise(metric, a.id, others);
    for (std::size_t i = 0; i < others.size(); ++i) out.push_back({a.id, others[i], scores[i].value});
  }
  return out;
}

Dendrogram dendrogram(std::span<const std::string> labels, std::span<const std::vector<double>> vectors) {
  const std::size_t n = vectors.size();
  if (n < 2) throw Error(ErrorCode::TooFewSamples, "dendrogram needs at least 2 vectors");
  if (labels.size() != n) throw Error(ErrorCode::LengthMismatch, "one label per vector required");
  for (const auto& v : vectors) {
    if (v.size() != vectors[0].size()) {
      throw Error(ErrorCode::DimensionMismatch, "vectors have dimensions " + std::to_string(vectors[0].size()) +
                                                    " and " + std::to_string(v.size()));
    }
  }
  // pairwise leaf distances; cluster distances are kept as size-weighted averages
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < vectors[i].size(); ++k) s += (vectors[i][k] - vectors[j][k]) * (vectors[i][k] - vectors[j][k]);
      d[i][j] = d[j][i] = std::sqrt(s);
    }
  }
  std::vector<std::size_t> node(n);  // active slot -> tree node id
  std::iota(node.begin(), node.end(), 0);
  std::vector<std::size_t> size(n, 1);
  std::vector<bool> active(n, true);

  Dendrogram out;
  out.leaves.assign(labels.begin(), labels.end());
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (active[j] && d[i][j] < best) {
          best = d[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    const std::size_t merged = size[bi] + size[bj];
    out.merges.push_back({std::min(node[bi], node[bj]), std::max(node[bi], node[bj]), best, merged});
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      const double v = (static_cast<double>(size[bi]) * d[bi][k] + static_cast<double>(size[bj]) * d[bj][k]) /
                       static_cast<double>(merged);
      d[bi][k] = d[k][bi] = v;
    }
    active[bj] = false;
    size[bi] = merged;
    node[bi] = n + step;
  }
  return out;
}

}  // namespace gist
