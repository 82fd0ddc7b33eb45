#pragma once

#include "gist/properties.hpp"
#include "gist/similarity.hpp"
#include "gist/stats.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gist {

// ---- property evaluation ---------------------------------------------------

struct PropertyOptions {
  PropertyKind kind = PropertyKind::Kmnc;
  int k = 10;                     // KMNC sections per neuron
  bool filter_objective = true;   // objective profile from fault-inducing rows only
  ClusteringConfig clustering;    // fault types
};

/// Property values P_O(T_R, T_O) on one model under test. `pool` lists every
/// reference test set that may be asked about; for fault types the whole pool
/// plus the objective is clustered in a single run so ids are comparable.
class PropertyEvaluator {
 public:
  PropertyEvaluator(const Workspace& ws, std::string mut, std::string objective_testset,
                    std::span<const std::string> pool, PropertyOptions options);

  double value(const std::string& reference_testset) const;
  /// Property of the union of several reference test sets.
  double combined(std::span<const std::string> reference_testsets) const;

  const std::string& mut() const { return mut_; }
  const std::string& objective() const { return objective_; }
  /// Set only for fault types.
  const FaultTypeProfile* fault_types() const { return fault_types_ ? &*fault_types_ : nullptr; }

 private:
  const CoverageProfile& kmnc(const std::string& testset, bool filter) const;
  void check_pool(const std::string& testset) const;

  const Workspace& ws_;
  std::string mut_;
  std::string objective_;
  std::vector<std::string> pool_;
  PropertyOptions options_;
  BandSpec bands_;
  std::optional<FaultTypeProfile> fault_types_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, CoverageProfile> profiles_;
};

// ---- offline phase ---------------------------------------------------------

struct CorrelationThresholds {
  double min_median_tau = 0.2;
  double min_frac_significant = 0.7;
  double alpha = 0.1;
};

struct OfflineOptions {
  bool exclude_same_type = true;
  std::vector<double> alpha_levels{0.05, 0.1};
  CorrelationThresholds thresholds;
  PropertyOptions property;
  SimilarityOptions similarity;
  std::optional<std::filesystem::path> cache_dir;
};

struct CellError {
  ErrorCode code = ErrorCode::InvalidArgument;
  std::string message;
};

/// One (metric, objective model) cell of the offline loop.
struct ObjectiveRow {
  Metric metric = Metric::Pwcca;
  std::string objective;
  std::string model_type;
  std::int64_t seed = 0;
  std::vector<std::string> references;  // reference model ids
  std::vector<double> property_values;
  std::vector<double> proxy_values;     // raw metric values (not orientation-normalized)
  std::optional<CorrelationStat> stat;
  std::optional<CellError> error;
};

struct MetricSummary {
  Metric metric = Metric::Pwcca;
  std::size_t n_objectives = 0;  // cells, including failed ones
  std::size_t n_valid = 0;       // cells with a statistic
  double median_tau = 0.0;       // NaN when no valid cell
  double q1 = 0.0;
  double q3 = 0.0;
  std::vector<std::pair<double, double>> frac_significant;  // (alpha, fraction of all cells with p < alpha)
  double mean_rank = 0.0;
  bool verdict = false;
};

enum class ProxyStatus { Selected, NoUsableProxy };

struct CorrelationCheck {
  std::vector<MetricSummary> summaries;
  std::optional<Metric> chosen;
  ProxyStatus status = ProxyStatus::NoUsableProxy;

  const MetricSummary& summary(Metric m) const;
};

struct OfflineReport {
  PropertyKind property = PropertyKind::Kmnc;
  std::vector<Metric> metrics;
  OfflineOptions options;
  std::vector<ObjectiveRow> rows;
  CorrelationCheck check;
  std::string workspace_fingerprint;
};

/// Orientation-normalized proxy: distance metrics negated so "more similar" is larger.
std::vector<double> normalize_orientation(std::span<const double> values, Orientation o);

CorrelationCheck check_correlation(std::span<const ObjectiveRow> rows, std::span<const Metric> metrics,
                                   const CorrelationThresholds& thresholds = {},
                                   std::span<const double> alpha_levels = {});

OfflineReport offline_validate(const Workspace& ws, std::span<const Metric> metrics, const OfflineOptions& options = {},
                               unsigned jobs = 0);

// ---- online phase ----------------------------------------------------------

struct Strategy {
  enum class Kind { Top1, TopN, Obf, Ebf, Random };
  Kind kind = Kind::Top1;
  std::size_t n = 1;
  std::size_t reps = 30;
  std::uint64_t seed = 0;

  /// top1 | topn:N | obf:N | ebf:N | random:N[:REPS[:SEED]]
  static Strategy parse(std::string_view text);
  std::string to_string() const;
};

struct RankedReference {
  std::string model;
  std::string model_type;
  std::string testset;
  double value = 0.0;  // raw metric value
};

struct SelectionPlan {
  std::string mut;
  Metric metric = Metric::Pwcca;
  Strategy strategy;
  bool exclude_same_type = true;
  std::vector<std::string> chosen;                   // test set ids (empty for random)
  std::vector<std::vector<std::string>> random_reps;  // one list per repetition
  std::vector<RankedReference> ranking;              // eligible references, most similar first
};

/// Eligible references for `mut`, most similar first (ties by model id).
std::vector<RankedReference> rank_references(const Workspace& ws, SimilarityEngine& engine, const std::string& mut,
                                             Metric metric, bool exclude_same_type = true);

SelectionPlan online_select(const Workspace& ws, SimilarityEngine& engine, const std::string& mut, Metric metric,
                            const Strategy& strategy, bool exclude_same_type = true);

struct EvalMetrics {
  std::string mut;
  Metric metric = Metric::Pwcca;
  PropertyKind property = PropertyKind::Kmnc;
  std::size_t eligible = 0;
  std::vector<std::string> chosen;    // j-th most similar reference test set
  std::vector<double> beat_fractions;  // one per chosen set
  std::vector<double> property_values;
  double beat_fraction_top1 = 0.0;
  double beat_fraction_top5_mean = 0.0;
  double property_value_top1 = 0.0;
  double property_value_top5_mean = 0.0;
};

/// Needs `mut` to own a test set, which serves as the objective.
EvalMetrics top_k_eval(const Workspace& ws, SimilarityEngine& engine, const std::string& mut, Metric metric,
                       const PropertyOptions& property = {}, std::size_t k = 5, bool exclude_same_type = true);

/// Property of each plan entry combined: one value for deterministic plans,
/// the mean over repetitions for random plans.
double plan_property(const SelectionPlan& plan, const PropertyEvaluator& evaluator);

// ---- reports ---------------------------------------------------------------

struct EfficiencyInput {
  double coverage = 0.0;
  double gist_offline_seconds = 0.0;
  double gist_online_seconds_per_model = 0.0;
  std::vector<double> generation_seconds_per_model;  // one entry is broadcast to all models
  std::size_t n_models = 1;
};

double time_ratio(const EfficiencyInput& in);
double efficiency_index(const EfficiencyInput& in);

struct PairValue {
  std::string objective;  // model id (row)
  std::string reference;  // model id (column)
  double value = 0.0;
};

struct Heatmap {
  std::vector<std::string> types;
  Eigen::MatrixXd mean;  // NaN where no pair exists
  Eigen::MatrixXd rank;  // per row, 1 = best; NaN where no pair exists
  Orientation orientation = Orientation::SimilarityUp;
};

Heatmap rank_heatmap(const Workspace& ws, std::span<const PairValue> values, Orientation orientation);

/// Property P_O(T_p, T_o) for every ordered pair of reference models (no exclusion).
std::vector<PairValue> property_pairs(const Workspace& ws, const PropertyOptions& options, unsigned jobs = 0);
/// Metric value for every ordered pair of reference models.
std::vector<PairValue> similarity_pairs(const Workspace& ws, SimilarityEngine& engine, Metric metric);

struct Merge {
  std::size_t left = 0;   // leaves are 0..n-1, merge i creates node n+i
  std::size_t right = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct Dendrogram {
  std::vector<std::string> leaves;
  std::vector<Merge> merges;
};

/// Average-linkage agglomerative clustering with Euclidean distance.
Dendrogram dendrogram(std::span<const std::string> labels, std::span<const std::vector<double>> vectors);

}  // namespace gist
