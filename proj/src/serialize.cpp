#include "gist/serialize.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace gist {
namespace {

using nlohmann::json;

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.precision(17);
  return out;
}

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (const char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

json strategy_json(const Strategy& s) { return s.to_string(); }

}  // namespace

json to_json(const CorrelationStat& s) {
  return {{"tau", s.tau}, {"p_value", s.p_value}, {"n", s.n}, {"method", to_string(s.method)}};
}

json to_json(const OfflineReport& r) {
  json j;
  j["property"] = to_string(r.property);
  j["workspace_fingerprint"] = r.workspace_fingerprint;
  j["metrics"] = json::array();
  for (const auto m : r.metrics) j["metrics"].push_back(to_string(m));
  const auto& o = r.options;
  j["config"] = {
      {"exclude_same_type", o.exclude_same_type},
      {"alpha_levels", o.alpha_levels},
      {"min_median_tau", o.thresholds.min_median_tau},
      {"min_frac_significant", o.thresholds.min_frac_significant},
      {"alpha", o.thresholds.alpha},
      {"k", o.property.k},
      {"filter_objective", o.property.filter_objective},
      {"clustering_hash", o.property.clustering.hash()},
      {"similarity_hash", o.similarity.config_hash()},
      {"pwcca_direction", o.similarity.pwcca_direction == PwccaDirection::Symmetric ? "symmetric" : "forward"},
      {"top5_aggregation", "per_seed_then_aggregate"},
  };
  j["objectives"] = json::array();
  for (const auto& row : r.rows) {
    json c{{"metric", to_string(row.metric)},
           {"objective", row.objective},
           {"model_type", row.model_type},
           {"seed", row.seed},
           {"references", row.references},
           {"property_values", row.property_values},
           {"proxy_values", row.proxy_values}};
    c["stat"] = row.stat ? to_json(*row.stat) : json(nullptr);
    if (row.error) c["error"] = {{"code", to_string(row.error->code)}, {"message", row.error->message}};
    j["objectives"].push_back(std::move(c));
  }
  j["summary"] = json::array();
  for (const auto& s : r.check.summaries) {
    json fr = json::object();
    for (const auto& [a, f] : s.frac_significant) fr[csv_number(a)] = f;
    j["summary"].push_back({{"metric", to_string(s.metric)},
                            {"n_objectives", s.n_objectives},
                            {"n_valid", s.n_valid},
                            {"median_tau", number_or_null(s.median_tau)},
                            {"q1", number_or_null(s.q1)},
                            {"q3", number_or_null(s.q3)},
                            {"frac_significant", fr},
                            {"mean_rank", s.mean_rank},
                            {"verdict", s.verdict}});
  }
  j["status"] = r.check.status == ProxyStatus::Selected ? "selected" : "no_usable_proxy";
  j["chosen_proxy"] = r.check.chosen ? json(to_string(*r.check.chosen)) : json(nullptr);
  return j;
}

json to_json(const SelectionPlan& p) {
  json j{{"mut", p.mut},
         {"metric", to_string(p.metric)},
         {"orientation", to_string(orientation_of(p.metric))},
         {"strategy", strategy_json(p.strategy)},
         {"exclude_same_type", p.exclude_same_type}};
  if (p.strategy.kind == Strategy::Kind::Random) {
    j["chosen"] = p.random_reps;
  } else {
    j["chosen"] = p.chosen;
  }
  j["similarity"] = json::array();
  for (const auto& r : p.ranking) {
    j["similarity"].push_back(
        {{"model", r.model}, {"model_type", r.model_type}, {"testset", r.testset}, {"value", r.value}});
  }
  return j;
}

json to_json(const EvalMetrics& e) {
  return {{"mut", e.mut},
          {"metric", to_string(e.metric)},
          {"property", to_string(e.property)},
          {"eligible", e.eligible},
          {"chosen", e.chosen},
          {"beat_fractions", e.beat_fractions},
          {"property_values", e.property_values},
          {"beat_fraction_top1", e.beat_fraction_top1},
          {"beat_fraction_top5_mean", e.beat_fraction_top5_mean},
          {"property_value_top1", e.property_value_top1},
          {"property_value_top5_mean", e.property_value_top5_mean}};
}

json to_json(const Heatmap& h) {
  json rows = json::array();
  json means = json::array();
  for (Eigen::Index r = 0; r < h.rank.rows(); ++r) {
    json a = json::array();
    json b = json::array();
    for (Eigen::Index c = 0; c < h.rank.cols(); ++c) {
      a.push_back(number_or_null(h.rank(r, c)));
      b.push_back(number_or_null(h.mean(r, c)));
    }
    rows.push_back(a);
    means.push_back(b);
  }
  return {{"types", h.types}, {"orientation", to_string(h.orientation)}, {"rank", rows}, {"mean", means}};
}

json to_json(const Dendrogram& d) {
  json merges = json::array();
  for (const auto& m : d.merges) {
    merges.push_back({{"left", m.left}, {"right", m.right}, {"height", m.height}, {"size", m.size}});
  }
  return {{"leaves", d.leaves}, {"linkage", "average"}, {"distance", "euclidean"}, {"merges", merges}};
}

json kmnc_profiles_json(const std::string& mut, int k, const std::map<std::string, CoverageProfile>& profiles) {
  json p = json::object();
  for (const auto& [id, prof] : profiles) {
    json neurons = json::object();
    for (std::size_t n = 0; n < prof.neurons(); ++n) {
      if (prof.count(n)) neurons[std::to_string(n)] = prof.sections(n);
    }
    p[id] = neurons;
  }
  return {{"property", "kmnc"}, {"mut", mut}, {"k", k}, {"profiles", p}};
}

json to_json(const FaultTypeProfile& f) {
  json p = json::object();
  json counts = json::object();
  for (const auto& [id, set] : f.sets) p[id] = std::vector<int>(set.ids.begin(), set.ids.end());
  for (const auto& [id, c] : f.counts) counts[id] = c;
  json j{{"property", "fault_types"},
         {"mut", f.mut},
         {"config_hash", f.config.hash()},
         {"n_clusters", f.n_clusters},
         {"profiles", p},
         {"counts", counts}};
  j["silhouette"] = f.silhouette ? json(*f.silhouette) : json(nullptr);
  return j;
}

void write_offline_csv(const std::filesystem::path& path, const OfflineReport& r) {
  auto out = open_out(path);
  out << "metric,objective,mut_type,seed,n,tau,p,method,error\n";
  for (const auto& row : r.rows) {
    out << to_string(row.metric) << ',' << csv_field(row.objective) << ',' << csv_field(row.model_type) << ','
        << row.seed << ',';
    if (row.stat) {
      out << row.stat->n << ',' << csv_number(row.stat->tau) << ',' << csv_number(row.stat->p_value) << ','
          << to_string(row.stat->method);
    } else {
      out << ",,,";
    }
    out << ',' << (row.error ? std::string(to_string(row.error->code)) : std::string{}) << '\n';
  }
}

void write_summary_csv(const std::filesystem::path& path, const OfflineReport& r) {
  auto out = open_out(path);
  out << "metric,n,median_tau,q1,q3,frac_p05,frac_p10,mean_rank,verdict\n";
  for (const auto& s : r.check.summaries) {
    auto frac = [&](double a) {
      for (const auto& [al, f] : s.frac_significant) {
        if (al == a) return csv_number(f);
      }
      return std::string{};
    };
    out << to_string(s.metric) << ',' << s.n_valid << ',' << csv_number(s.median_tau) << ',' << csv_number(s.q1)
        << ',' << csv_number(s.q3) << ',' << frac(0.05) << ',' << frac(0.1) << ',' << csv_number(s.mean_rank) << ','
        << (s.verdict ? "true" : "false") << '\n';
  }
}

void write_heatmap_csv(const std::filesystem::path& path, const Heatmap& h) {
  auto out = open_out(path);
  out << "objective_type";
  for (const auto& t : h.types) out << ',' << csv_field(t);
  out << '\n';
  for (Eigen::Index r = 0; r < h.rank.rows(); ++r) {
    out << csv_field(h.types[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < h.rank.cols(); ++c) out << ',' << csv_number(h.rank(r, c));
    out << '\n';
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

}  // namespace gist
