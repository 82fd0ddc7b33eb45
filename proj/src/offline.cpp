#include "gist/pipeline.hpp"

#include "gist/log.hpp"
#include "gist/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gist {

const MetricSummary& CorrelationCheck::summary(Metric m) const {
  for (const auto& s : summaries) {
    if (s.metric == m) return s;
  }
  throw Error(ErrorCode::UnknownMetric, "no summary for metric " + std::string(to_string(m)));
}

std::vector<double> normalize_orientation(std::span<const double> values, Orientation o) {
  std::vector<double> out(values.begin(), values.end());
  if (o == Orientation::DistanceUp) {
    for (auto& v : out) v = -v;
  }
  return out;
}

CorrelationCheck check_correlation(std::span<const ObjectiveRow> rows, std::span<const Metric> metrics,
                                   const CorrelationThresholds& th, std::span<const double> alpha_levels) {
  if (rows.empty() || metrics.empty()) throw Error(ErrorCode::TooFewSamples, "no correlation statistics to check");
  std::vector<double> alphas(alpha_levels.begin(), alpha_levels.end());
  if (std::find(alphas.begin(), alphas.end(), th.alpha) == alphas.end()) alphas.push_back(th.alpha);

  // objectives in first-seen order
  std::vector<std::string> objectives;
  for (const auto& r : rows) {
    if (std::find(objectives.begin(), objectives.end(), r.objective) == objectives.end()) {
      objectives.push_back(r.objective);
    }
  }
  auto tau_of = [&](Metric m, const std::string& obj) -> std::optional<double> {
    for (const auto& r : rows) {
      if (r.metric == m && r.objective == obj && r.stat) return r.stat->tau;
    }
    return std::nullopt;
  };

  CorrelationCheck out;
  for (const Metric m : metrics) {
    MetricSummary s;
    s.metric = m;
    std::vector<double> taus;
    std::vector<double> ps;
    for (const auto& r : rows) {
      if (r.metric != m) continue;
      ++s.n_objectives;
      if (r.stat) {
        taus.push_back(r.stat->tau);
        ps.push_back(r.stat->p_value);
      }
    }
    s.n_valid = taus.size();
    if (taus.empty()) {
      s.median_tau = s.q1 = s.q3 = std::numeric_limits<double>::quiet_NaN();
    } else {
      const auto q = quartiles(taus);
      s.q1 = q.q1;
      s.median_tau = q.median;
      s.q3 = q.q3;
    }
    double frac_at_alpha = 0.0;
    for (const double a : alphas) {
      const auto hits = std::count_if(ps.begin(), ps.end(), [a](double p) { return p < a; });
      const double f = s.n_objectives ? static_cast<double>(hits) / static_cast<double>(s.n_objectives) : 0.0;
      s.frac_significant.emplace_back(a, f);
      if (a == th.alpha) frac_at_alpha = f;
    }
    s.verdict = !taus.empty() && s.median_tau >= th.min_median_tau && frac_at_alpha >= th.min_frac_significant;
    out.summaries.push_back(std::move(s));
  }

  // per objective, rank the metrics by tau; a missing tau ranks below every real one
  for (const auto& obj : objectives) {
    std::vector<double> t;
    for (const Metric m : metrics) t.push_back(tau_of(m, obj).value_or(-2.0));
    const auto ranks = rank_vector(t, Orientation::SimilarityUp);
    for (std::size_t i = 0; i < metrics.size(); ++i) out.summaries[i].mean_rank += ranks[i];
  }
  for (auto& s : out.summaries) s.mean_rank /= static_cast<double>(objectives.size());

  const MetricSummary* best = nullptr;
  for (const auto& s : out.summaries) {
    if (!s.verdict) continue;
    if (!best || s.mean_rank < best->mean_rank ||
        (s.mean_rank == best->mean_rank &&
         (s.median_tau > best->median_tau ||
          (s.median_tau == best->median_tau && to_string(s.metric) < to_string(best->metric))))) {
      best = &s;
    }
  }
  if (best) {
    out.chosen = best->metric;
    out.status = ProxyStatus::Selected;
  }
  return out;
}

OfflineReport offline_validate(const Workspace& ws, std::span<const Metric> metrics, const OfflineOptions& options,
                               unsigned jobs) {
  if (metrics.empty()) throw Error(ErrorCode::InvalidArgument, "no metrics requested");
  OfflineReport report;
  report.property = options.property.kind;
  report.metrics.assign(metrics.begin(), metrics.end());
  report.options = options;
  report.workspace_fingerprint = ws.fingerprint;

  std::vector<const ModelEntry*> refs;
  for (const auto& m : ws.models) {
    if (m.role == ModelRole::Reference && ws.owned_testset(m.id)) refs.push_back(&m);
  }
  // eligible references per objective
  std::vector<std::vector<const ModelEntry*>> pools(refs.size());
  for (std::size_t o = 0; o < refs.size(); ++o) {
    for (const auto* p : refs) {
      if (p == refs[o]) continue;
      if (options.exclude_same_type && p->model_type == refs[o]->model_type) continue;
      pools[o].push_back(p);
    }
    if (pools[o].size() < 3) {
      throw Error(ErrorCode::TooFewModels, "objective " + refs[o]->id + " has " + std::to_string(pools[o].size()) +
                                               " eligible reference models, need at least 3");
    }
  }

  SimilarityOptions sim = options.similarity;
  sim.jobs = 1;
  SimilarityEngine engine(ws, sim, options.cache_dir);

  std::vector<std::vector<ObjectiveRow>> cells(refs.size());
  parallel_for(refs.size(), jobs, [&](std::size_t o) {
    const auto& obj = *refs[o];
    std::vector<std::string> pool_ts;
    for (const auto* p : pools[o]) pool_ts.push_back(ws.owned_testset(p->id)->id);

    std::vector<std::string> kept;  // references whose property could be computed
    std::vector<double> property;
    std::optional<CellError> shared_error;
    try {
      PropertyEvaluator eval(ws, obj.id, ws.owned_testset(obj.id)->id, pool_ts, options.property);
      for (std::size_t i = 0; i < pools[o].size(); ++i) {
        try {
          property.push_back(eval.value(pool_ts[i]));
          kept.push_back(pools[o][i]->id);
        } catch (const Error& e) {
          if (e.code() == ErrorCode::EmptyObjective) throw;
          warn("offline: skipping reference " + pools[o][i]->id + " for objective " + obj.id + ": " + e.what());
        }
      }
    } catch (const Error& e) {
      shared_error = CellError{e.code(), e.what()};
      warn("offline: objective " + obj.id + " skipped: " + e.what());
    }

    for (const Metric m : metrics) {
      ObjectiveRow row;
      row.metric = m;
      row.objective = obj.id;
      row.model_type = obj.model_type;
      row.seed = obj.seed;
      row.references = kept;
      row.property_values = property;
      row.error = shared_error;
      if (!shared_error) {
        try {
          for (const auto& r : kept) row.proxy_values.push_back(engine.score(m, r, obj.id).value);
          const auto proxy = normalize_orientation(row.proxy_values, orientation_of(m));
          row.stat = kendall_tau_b(row.property_values, proxy);
        } catch (const Error& e) {
          row.error = CellError{e.code(), e.what()};
          warn("offline: " + std::string(to_string(m)) + " on objective " + obj.id + ": " + e.what());
        }
      }
      cells[o].push_back(std::move(row));
    }
  });
  for (auto& c : cells) {
    for (auto& r : c) report.rows.push_back(std::move(r));
  }
  report.check = check_correlation(report.rows, metrics, options.thresholds, options.alpha_levels);
  return report;
}

}  // namespace gist
