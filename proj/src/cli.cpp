#include "gist/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include "gist/log.hpp"
#include "gist/parallel.hpp"
#include "gist/serialize.hpp"
#include "gist/synth.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>

namespace gist {
namespace {

using nlohmann::json;

// Lets --config take a JSON file; nested objects map to subcommand sections.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config: ") + e.what());
    }
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void flatten(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, v] : j.items()) {
      if (v.is_object()) {
        auto p = parents;
        p.push_back(key);
        flatten(v, p, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (v.is_array()) {
        for (const auto& e : v) item.inputs.push_back(scalar(e));
      } else {
        item.inputs.push_back(scalar(v));
      }
      items.push_back(std::move(item));
    }
  }
};

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::IoError:
    case ErrorCode::BadMagic:
    case ErrorCode::TruncatedPayload:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::FormatError:
    case ErrorCode::ManifestParseError:
    case ErrorCode::MissingArtifact:
      return kExitIo;
    default:
      return kExitUser;
  }
}

int report(const WorkspaceError& e, std::ostream& err) {
  bool only_io = true;
  for (const auto& i : e.issues()) {
    err << "error: " << to_string(i.code) << ": " << i.message << '\n';
    only_io = only_io && exit_code_for(i.code) == kExitIo;
  }
  return only_io ? kExitIo : kExitUser;
}

struct SharedFlags {
  unsigned jobs = 0;
  bool pretty = false;
  // similarity
  std::string pwcca_direction = "symmetric";
  std::string accuracy_source = "manifest";
  // properties
  std::string property = "kmnc";
  int k = 10;
  bool no_filter_objective = false;
  std::string reducer = "pca";
  int dims = ClusteringConfig{}.reduced_dims;
  std::string cluster_algo = "dbscan";
  double eps = ClusteringConfig{}.eps;
  int min_pts = ClusteringConfig{}.min_pts;
  double label_scale = 1.0;
  std::uint64_t cluster_seed = 0;
  bool standardize_before_filter = false;
  bool include_same_type = false;

  SimilarityOptions similarity() const {
    SimilarityOptions o;
    if (pwcca_direction == "forward") {
      o.pwcca_direction = PwccaDirection::Forward;
    } else if (pwcca_direction != "symmetric") {
      throw Error(ErrorCode::InvalidArgument, "--pwcca-direction must be symmetric or forward");
    }
    if (accuracy_source == "train") {
      o.accuracy_source = AccuracySource::Train;
    } else if (accuracy_source != "manifest") {
      throw Error(ErrorCode::InvalidArgument, "--accuracy-source must be manifest or train");
    }
    o.jobs = jobs;
    return o;
  }

  PropertyOptions property_options() const {
    PropertyOptions p;
    p.kind = parse_property(property);
    p.k = k;
    p.filter_objective = !no_filter_objective;
    p.clustering.reducer = parse_reducer(reducer);
    p.clustering.reduced_dims = dims;
    p.clustering.cluster_algo = parse_cluster_algo(cluster_algo);
    p.clustering.eps = eps;
    p.clustering.min_pts = min_pts;
    p.clustering.label_feature_scale = label_scale;
    p.clustering.rng_seed = cluster_seed;
    p.clustering.standardize_after_filter = !standardize_before_filter;
    if (p.kind == PropertyKind::Kmnc && k < 1) throw Error(ErrorCode::InvalidArgument, "--k must be >= 1");
    if (p.kind == PropertyKind::FaultTypes) p.clustering.validate();
    return p;
  }
};

void add_similarity_flags(CLI::App* sub, SharedFlags& f) {
  sub->add_option("--pwcca-direction", f.pwcca_direction, "symmetric (mean of both directions) or forward")
      ->check(CLI::IsMember({"symmetric", "forward"}));
  sub->add_option("--accuracy-source", f.accuracy_source, "manifest (train_accuracy if present) or train")
      ->check(CLI::IsMember({"manifest", "train"}));
}

void add_property_flags(CLI::App* sub, SharedFlags& f) {
  sub->add_option("--property", f.property, "kmnc or fault_types")->check(CLI::IsMember({"kmnc", "fault_types"}));
  sub->add_option("--k", f.k, "KMNC sections per neuron");
  sub->add_flag("--no-filter-objective", f.no_filter_objective, "objective KMNC profile over all rows");
  sub->add_option("--reducer", f.reducer, "pca or none");
  sub->add_option("--dims", f.dims, "reduced dimensions");
  sub->add_option("--cluster-algo", f.cluster_algo, "dbscan or hdbscan_lite");
  sub->add_option("--eps", f.eps, "DBSCAN radius");
  sub->add_option("--min-pts", f.min_pts, "DBSCAN core size (self included)");
  sub->add_option("--label-scale", f.label_scale, "weight of the two label columns");
  sub->add_option("--cluster-seed", f.cluster_seed, "recorded in the clustering hash");
  sub->add_flag("--standardize-before-filter", f.standardize_before_filter,
                "standardize with statistics over all rows, not just faulty ones");
}

std::optional<std::filesystem::path> cache_dir_from_env() {
  if (const char* d = std::getenv("GIST_CACHE_DIR"); d && *d) return std::filesystem::path(d);
  return std::nullopt;
}

void print_offline_table(std::ostream& out, const OfflineReport& r) {
  out << std::left << std::setw(8) << "metric" << std::right << std::setw(6) << "n" << std::setw(10) << "median"
      << std::setw(9) << "q1" << std::setw(9) << "q3" << std::setw(9) << "p<.05" << std::setw(9) << "p<.1"
      << std::setw(10) << "rank" << "  verdict\n";
  out << std::fixed << std::setprecision(3);
  for (const auto& s : r.check.summaries) {
    auto frac = [&](double a) {
      for (const auto& [al, f] : s.frac_significant) {
        if (al == a) return f;
      }
      return 0.0;
    };
    out << std::left << std::setw(8) << to_string(s.metric) << std::right << std::setw(6) << s.n_valid
        << std::setw(10) << s.median_tau << std::setw(9) << s.q1 << std::setw(9) << s.q3 << std::setw(9)
        << frac(0.05) << std::setw(9) << frac(0.1) << std::setw(10) << s.mean_rank << "  "
        << (s.verdict ? "yes" : "no") << '\n';
  }
  out.unsetf(std::ios::floatfield);
  out << "chosen proxy: " << (r.check.chosen ? std::string(to_string(*r.check.chosen)) : std::string("none")) << '\n';
}

std::vector<Metric> parse_metrics(const std::vector<std::string>& names) {
  std::vector<Metric> out;
  if (names.empty()) return {kAllMetrics.begin(), kAllMetrics.end()};
  for (const auto& n : names) {
    const Metric m = parse_metric(n);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"gist: choose which generated test sets to transfer to a new model", "gist"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "expand help for every subcommand");

  const auto cfg = std::find(args.begin(), args.end(), std::string("--config"));
  if (cfg != args.end() && cfg + 1 != args.end() && std::filesystem::path(*(cfg + 1)).extension() == ".json") {
    app.config_formatter(std::make_shared<JsonConfig>());
  }
  app.set_config("--config", "", "TOML or JSON file with defaults; explicit flags win");

  SharedFlags f;
  app.add_option("--jobs", f.jobs, "worker threads (default GIST_JOBS or all cores)");
  app.add_flag("--pretty", f.pretty, "human-readable tables instead of JSON on stdout");

  std::function<int()> action;
  std::string workspace;

  // validate
  auto* validate = app.add_subcommand("validate", "load a workspace and report every issue");
  validate->add_option("workspace", workspace, "workspace root")->required();
  validate->callback([&] {
    action = [&] {
      const auto ws = load_workspace(workspace);
      if (f.pretty) {
        out << "ok: " << ws.models.size() << " models, " << ws.testsets.size() << " test sets, " << ws.num_classes
            << " classes\n";
      } else {
        out << json{{"status", "ok"}, {"models", ws.models.size()}, {"testsets", ws.testsets.size()}}.dump() << '\n';
      }
      return int{kExitOk};
    };
  });

  // offline
  std::vector<std::string> metric_names;
  CorrelationThresholds th;
  std::string out_path;
  auto* offline = app.add_subcommand("offline", "validate proxies against the property (offline phase)");
  offline->add_option("workspace", workspace, "workspace root")->required();
  offline->add_option("--metrics", metric_names, "comma-separated metric ids (default all)")->delimiter(',');
  offline->add_option("--alpha", th.alpha, "significance level for the verdict");
  offline->add_option("--min-median-tau", th.min_median_tau, "verdict threshold on the median tau");
  offline->add_option("--min-frac-significant", th.min_frac_significant, "verdict threshold on the significant fraction");
  offline->add_flag("--include-same-type", f.include_same_type, "keep references of the objective's own type");
  offline->add_option("--out", out_path, "output directory for report.json, objectives.csv, summary.csv");
  add_property_flags(offline, f);
  add_similarity_flags(offline, f);
  offline->callback([&] {
    action = [&] {
      const auto ws = load_workspace(workspace);
      OfflineOptions o;
      o.exclude_same_type = !f.include_same_type;
      o.thresholds = th;
      if (std::find(o.alpha_levels.begin(), o.alpha_levels.end(), th.alpha) == o.alpha_levels.end()) {
        o.alpha_levels.push_back(th.alpha);
      }
      o.property = f.property_options();
      o.similarity = f.similarity();
      o.cache_dir = cache_dir_from_env();
      const auto metrics = parse_metrics(metric_names);
      const auto report = offline_validate(ws, metrics, o, f.jobs);
      if (!out_path.empty()) {
        const std::filesystem::path dir(out_path);
        write_json(dir / "report.json", to_json(report));
        write_offline_csv(dir / "objectives.csv", report);
        write_summary_csv(dir / "summary.csv", report);
      }
      if (f.pretty) {
        print_offline_table(out, report);
      } else {
        const auto j = to_json(report);
        out << json{{"status", j["status"]}, {"chosen_proxy", j["chosen_proxy"]}, {"summary", j["summary"]}}.dump()
            << '\n';
      }
      if (report.check.status == ProxyStatus::NoUsableProxy) {
        err << "no usable proxy: no metric passed the correlation check\n";
        return int{kExitNoProxy};
      }
      return int{kExitOk};
    };
  });

  // select
  std::string mut;
  std::string metric_name;
  std::string strategy_text = "top1";
  auto* select = app.add_subcommand("select", "rank reference test sets for a model under test (online phase)");
  select->add_option("workspace", workspace, "workspace root")->required();
  select->add_option("--mut", mut, "model under test")->required();
  select->add_option("--metric", metric_name, "proxy metric")->required();
  select->add_option("--strategy", strategy_text, "top1 | topn:N | obf:N | ebf:N | random:N:REPS:SEED");
  select->add_flag("--include-same-type", f.include_same_type, "allow test sets from the mut's own type");
  select->add_option("--out", out_path, "plan JSON file");
  add_similarity_flags(select, f);
  select->callback([&] {
    action = [&] {
      const auto strategy = Strategy::parse(strategy_text);
      const Metric metric = parse_metric(metric_name);
      const auto ws = load_workspace(workspace);
      SimilarityEngine engine(ws, f.similarity(), cache_dir_from_env());
      const auto plan = online_select(ws, engine, mut, metric, strategy, !f.include_same_type);
      if (!out_path.empty()) write_json(out_path, to_json(plan));
      if (strategy.kind == Strategy::Kind::Random) {
        for (const auto& rep : plan.random_reps) {
          for (std::size_t i = 0; i < rep.size(); ++i) out << (i ? " " : "") << rep[i];
          out << '\n';
        }
      } else {
        for (const auto& id : plan.chosen) out << id << '\n';
      }
      if (f.pretty) {
        err << "ranking by " << to_string(metric) << ":\n";
        for (const auto& r : plan.ranking) err << "  " << r.testset << "  " << r.model_type << "  " << r.value << '\n';
      }
      return int{kExitOk};
    };
  });

  // eval
  std::size_t top = 5;
  std::vector<std::string> muts;
  auto* eval = app.add_subcommand("eval", "Top-1 / Top-k beat fractions against each model's own test set");
  eval->add_option("workspace", workspace, "workspace root")->required();
  eval->add_option("--mut", muts, "models to evaluate (default: every reference model owning a test set)");
  eval->add_option("--metric", metric_name, "proxy metric")->required();
  eval->add_option("--top", top, "number of similarity-ranked choices");
  eval->add_flag("--include-same-type", f.include_same_type, "allow test sets from the mut's own type");
  eval->add_option("--out", out_path, "JSON file");
  add_property_flags(eval, f);
  add_similarity_flags(eval, f);
  eval->callback([&] {
    action = [&] {
      const Metric metric = parse_metric(metric_name);
      const auto ws = load_workspace(workspace);
      SimilarityEngine engine(ws, f.similarity(), cache_dir_from_env());
      const auto prop = f.property_options();
      if (muts.empty()) {
        for (const auto& m : ws.models) {
          if (ws.owned_testset(m.id)) muts.push_back(m.id);
        }
      }
      json all = json::array();
      for (const auto& m : muts) {
        const auto e = top_k_eval(ws, engine, m, metric, prop, top, !f.include_same_type);
        all.push_back(to_json(e));
        if (f.pretty) {
          out << m << "  top1 beat " << e.beat_fraction_top1 << "  top" << e.beat_fractions.size() << " mean "
              << e.beat_fraction_top5_mean << "  value " << e.property_value_top1 << '\n';
        }
      }
      if (!out_path.empty()) write_json(out_path, all);
      if (!f.pretty) out << all.dump() << '\n';
      return int{kExitOk};
    };
  });

  // report
  auto* rep = app.add_subcommand("report", "heatmaps, dendrograms and the efficiency index");
  rep->require_subcommand(1);

  std::string source = "kmnc";
  auto* heat = rep->add_subcommand("heatmap", "mean rank per (objective type, reference type)");
  heat->add_option("workspace", workspace, "workspace root")->required();
  heat->add_option("--source", source, "kmnc, fault_types or a metric id");
  heat->add_option("--out", out_path, "CSV file (a .json twin is written next to it)");
  add_property_flags(heat, f);
  add_similarity_flags(heat, f);
  heat->callback([&] {
    action = [&] {
      const auto ws = load_workspace(workspace);
      Heatmap h;
      if (source == "kmnc" || source == "fault_types") {
        f.property = source;
        h = rank_heatmap(ws, property_pairs(ws, f.property_options(), f.jobs), Orientation::SimilarityUp);
      } else {
        const Metric m = parse_metric(source);
        SimilarityEngine engine(ws, f.similarity(), cache_dir_from_env());
        h = rank_heatmap(ws, similarity_pairs(ws, engine, m), orientation_of(m));
      }
      if (!out_path.empty()) {
        write_heatmap_csv(out_path, h);
        write_json(std::filesystem::path(out_path).replace_extension(".json"), to_json(h));
      }
      out << to_json(h).dump(f.pretty ? 2 : -1) << '\n';
      return int{kExitOk};
    };
  });

  std::vector<std::string> testsets;
  auto* tree = rep->add_subcommand("dendrogram", "average-linkage tree over fault-type count vectors");
  tree->add_option("workspace", workspace, "workspace root")->required();
  tree->add_option("--mut", mut, "model whose fault space is clustered")->required();
  tree->add_option("--testsets", testsets, "test sets to include (default: all evaluated on mut)")->delimiter(',');
  tree->add_option("--out", out_path, "JSON file");
  add_property_flags(tree, f);
  tree->callback([&] {
    action = [&] {
      const auto ws = load_workspace(workspace);
      if (testsets.empty()) {
        for (const auto& [id, e] : ws.model(mut).eval) testsets.push_back(id);
      }
      f.property = "fault_types";
      const auto prof = fault_type_profiles(ws, mut, testsets, f.property_options().clustering);
      std::vector<std::string> labels;
      std::vector<std::vector<double>> vecs;
      for (const auto& [id, counts] : prof.counts) {
        labels.push_back(id);
        vecs.emplace_back(counts.begin(), counts.end());
      }
      auto j = to_json(dendrogram(labels, vecs));
      j["fault_types"] = to_json(prof);
      if (!out_path.empty()) write_json(out_path, j);
      out << j.dump(f.pretty ? 2 : -1) << '\n';
      return int{kExitOk};
    };
  });

  EfficiencyInput eff;
  auto* effc = rep->add_subcommand("efficiency", "efficiency index r = coverage / time ratio");
  effc->add_option("--coverage", eff.coverage, "property coverage in [0,1]")->required();
  effc->add_option("--offline-seconds", eff.gist_offline_seconds, "offline phase time")->required();
  effc->add_option("--online-seconds", eff.gist_online_seconds_per_model, "online time per model")->required();
  effc->add_option("--generation-seconds", eff.generation_seconds_per_model,
                   "generation time per model (one value or one per model)")
      ->required()
      ->delimiter(',');
  effc->add_option("--n-models", eff.n_models, "number of models")->required();
  effc->add_option("--out", out_path, "JSON file");
  effc->callback([&] {
    action = [&] {
      const double t = time_ratio(eff);
      const double r = efficiency_index(eff);
      const json j{{"coverage", eff.coverage}, {"t", t}, {"r", r}, {"n_models", eff.n_models}};
      if (!out_path.empty()) write_json(out_path, j);
      if (f.pretty) {
        out << "t = " << t << "\nr = " << r << '\n';
      } else {
        out << j.dump() << '\n';
      }
      return int{kExitOk};
    };
  });

  // synth
  SynthConfig sc;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "write a synthetic workspace with planted structure");
  synth->add_option("out_dir", synth_out, "output directory")->required();
  synth->add_option("--types", sc.n_types, "model types");
  synth->add_option("--seeds", sc.seeds_per_type, "seeds per type");
  synth->add_option("--dim", sc.feature_dim, "feature dimension");
  synth->add_option("--train", sc.n_train, "train rows");
  synth->add_option("--test", sc.n_test_per_set, "rows per generated test set");
  synth->add_option("--classes", sc.n_classes, "number of classes");
  synth->add_option("--strength", sc.type_basis_strength, "type structure strength in [0,1]");
  synth->add_option("--seed-noise", sc.seed_noise, "seed-to-seed variation");
  synth->add_option("--fault-rate", sc.fault_rate, "planted fault fraction per test set");
  synth->add_option("--seed", sc.rng_seed, "RNG seed");
  synth->callback([&] {
    action = [&] {
      const auto ws = generate_benchmark(sc, synth_out);
      out << json{{"status", "ok"}, {"root", synth_out}, {"models", ws.models.size()}}.dump() << '\n';
      return int{kExitOk};
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return e.get_name() == "FileError" ? kExitIo : kExitUser;
  }

  auto previous = set_warning_sink([&err](std::string_view m) { err << "warning: " << m << '\n'; });
  struct Restore {
    WarningSink sink;
    ~Restore() { set_warning_sink(std::move(sink)); }
  } restore{std::move(previous)};

  if (f.jobs == 0) f.jobs = resolve_jobs(0);
  try {
    return action ? action() : int{kExitUser};
  } catch (const WorkspaceError& e) {
    return report(e, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace gist
