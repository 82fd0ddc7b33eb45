#include "gist/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <random>
#include <set>

namespace gist {
namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s, std::string_view what) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::InvalidArgument, "bad " + std::string(what) + " \"" + std::string(s) + "\"");
  }
  return v;
}

std::vector<std::string> testsets_of(std::span<const RankedReference> refs) {
  std::vector<std::string> out;
  for (const auto& r : refs) out.push_back(r.testset);
  return out;
}

}  // namespace

Strategy Strategy::parse(std::string_view text) {
  const auto parts = split(text, ':');
  Strategy s;
  const auto name = parts[0];
  auto need_n = [&] {
    if (parts.size() < 2) throw Error(ErrorCode::InvalidArgument, "strategy " + std::string(name) + " needs :N");
    s.n = parse_number<std::size_t>(parts[1], "strategy size");
    if (s.n == 0) throw Error(ErrorCode::InvalidArgument, "strategy size must be >= 1");
  };
  if (name == "top1" && parts.size() == 1) {
    s.kind = Kind::Top1;
    s.n = 1;
  } else if (name == "topn" && parts.size() == 2) {
    s.kind = Kind::TopN;
    need_n();
  } else if (name == "obf" && parts.size() == 2) {
    s.kind = Kind::Obf;
    need_n();
  } else if (name == "ebf" && parts.size() == 2) {
    s.kind = Kind::Ebf;
    need_n();
  } else if (name == "random" && parts.size() >= 2 && parts.size() <= 4) {
    s.kind = Kind::Random;
    need_n();
    if (parts.size() >= 3) s.reps = parse_number<std::size_t>(parts[2], "repetition count");
    if (parts.size() == 4) s.seed = parse_number<std::uint64_t>(parts[3], "seed");
    if (s.reps == 0) throw Error(ErrorCode::InvalidArgument, "random strategy needs at least one repetition");
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown strategy \"" + std::string(text) +
                                                "\" (expected top1|topn:N|obf:N|ebf:N|random:N:REPS:SEED)");
  }
  return s;
}

std::string Strategy::to_string() const {
  switch (kind) {
    case Kind::Top1: return "top1";
    case Kind::TopN: return "topn:" + std::to_string(n);
    case Kind::Obf: return "obf:" + std::to_string(n);
    case Kind::Ebf: return "ebf:" + std::to_string(n);
    case Kind::Random: return "random:" + std::to_string(n) + ":" + std::to_string(reps) + ":" + std::to_string(seed);
  }
  return "?";
}

std::vector<RankedReference> rank_references(const Workspace& ws, SimilarityEngine& engine, const std::string& mut,
                                             Metric metric, bool exclude_same_type) {
  const auto& target = ws.model(mut);
  std::vector<RankedReference> out;
  std::vector<std::string> candidates;
  for (const auto& m : ws.models) {
    if (m.id == mut || m.role != ModelRole::Reference) continue;
    if (exclude_same_type && m.model_type == target.model_type) continue;
    const auto* ts = ws.owned_testset(m.id);
    if (!ts) continue;
    out.push_back({m.id, m.model_type, ts->id, 0.0});
    candidates.push_back(m.id);
  }
  const auto scores = engine.pairwise(metric, mut, candidates);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].value = scores[i].value;
  const bool up = orientation_of(metric) == Orientation::SimilarityUp;
  std::stable_sort(out.begin(), out.end(), [up](const RankedReference& a, const RankedReference& b) {
    if (a.value != b.value) return up ? a.value > b.value : a.value < b.value;
    return a.model < b.model;
  });
  return out;
}

SelectionPlan online_select(const Workspace& ws, SimilarityEngine& engine, const std::string& mut, Metric metric,
                            const Strategy& strategy, bool exclude_same_type) {
  SelectionPlan plan;
  plan.mut = mut;
  plan.metric = metric;
  plan.strategy = strategy;
  plan.exclude_same_type = exclude_same_type;
  plan.ranking = rank_references(ws, engine, mut, metric, exclude_same_type);
  const auto& ranking = plan.ranking;
  if (ranking.empty()) throw Error(ErrorCode::TooFewModels, "no eligible reference test set for " + mut);

  auto need = [&](std::size_t n, std::size_t have, ErrorCode code, const std::string& what) {
    if (n > have) {
      throw Error(code, "strategy " + strategy.to_string() + " needs " + std::to_string(n) + " " + what + ", only " +
                            std::to_string(have) + " eligible");
    }
  };

  switch (strategy.kind) {
    case Strategy::Kind::Top1:
    case Strategy::Kind::TopN:
    case Strategy::Kind::Obf: {
      need(strategy.n, ranking.size(), ErrorCode::TooFewModels, "reference test sets");
      for (std::size_t i = 0; i < strategy.n; ++i) plan.chosen.push_back(ranking[i].testset);
      break;
    }
    case Strategy::Kind::Ebf: {
      std::vector<const RankedReference*> reps;  // ranking is sorted, so first hit per type is its best seed
      std::set<std::string> seen;
      for (const auto& r : ranking) {
        if (seen.insert(r.model_type).second) reps.push_back(&r);
      }
      need(strategy.n, reps.size(), ErrorCode::NotEnoughTypes, "distinct model types");
      for (std::size_t i = 0; i < strategy.n; ++i) plan.chosen.push_back(reps[i]->testset);
      break;
    }
    case Strategy::Kind::Random: {
      need(strategy.n, ranking.size(), ErrorCode::TooFewModels, "reference test sets");
      // sample from id order so the draw does not depend on similarity values
      auto pool = testsets_of(ranking);
      std::sort(pool.begin(), pool.end());
      std::mt19937_64 rng(strategy.seed);
      for (std::size_t r = 0; r < strategy.reps; ++r) {
        std::vector<std::size_t> idx(pool.size());
        std::iota(idx.begin(), idx.end(), 0);
        // partial Fisher-Yates with explicit draws, stable across standard libraries
        std::vector<std::string> pick;
        for (std::size_t i = 0; i < strategy.n; ++i) {
          const std::size_t j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
          std::swap(idx[i], idx[j]);
          pick.push_back(pool[idx[i]]);
        }
        plan.random_reps.push_back(std::move(pick));
      }
      break;
    }
  }
  return plan;
}

EvalMetrics top_k_eval(const Workspace& ws, SimilarityEngine& engine, const std::string& mut, Metric metric,
                       const PropertyOptions& property, std::size_t k, bool exclude_same_type) {
  const auto* own = ws.owned_testset(mut);
  if (!own) throw Error(ErrorCode::UnknownTestSet, "model " + mut + " owns no test set to serve as objective");
  const auto ranking = rank_references(ws, engine, mut, metric, exclude_same_type);
  if (ranking.size() < 2) throw Error(ErrorCode::TooFewModels, "need at least 2 eligible references for " + mut);
  const auto pool = testsets_of(ranking);
  PropertyEvaluator eval(ws, mut, own->id, pool, property);

  std::vector<double> values;
  for (const auto& t : pool) values.push_back(eval.value(t));

  EvalMetrics out;
  out.mut = mut;
  out.metric = metric;
  out.property = property.kind;
  out.eligible = pool.size();
  const std::size_t steps = std::min(k, pool.size());
  for (std::size_t j = 0; j < steps; ++j) {
    const double v = values[j];
    const auto better = std::count_if(values.begin(), values.end(), [v](double o) { return o > v; });
    out.chosen.push_back(pool[j]);
    out.property_values.push_back(v);
    out.beat_fractions.push_back(static_cast<double>(better) / static_cast<double>(pool.size() - 1));
  }
  out.beat_fraction_top1 = out.beat_fractions.front();
  out.property_value_top1 = out.property_values.front();
  out.beat_fraction_top5_mean =
      std::accumulate(out.beat_fractions.begin(), out.beat_fractions.end(), 0.0) / static_cast<double>(steps);
  out.property_value_top5_mean =
      std::accumulate(out.property_values.begin(), out.property_values.end(), 0.0) / static_cast<double>(steps);
  return out;
}

double plan_property(const SelectionPlan& plan, const PropertyEvaluator& evaluator) {
  if (plan.strategy.kind != Strategy::Kind::Random) return evaluator.combined(plan.chosen);
  double sum = 0.0;
  for (const auto& rep : plan.random_reps) sum += evaluator.combined(rep);
  return sum / static_cast<double>(plan.random_reps.size());
}

}  // namespace gist
