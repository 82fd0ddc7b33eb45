#pragma once

#include <Eigen/Dense>

#include "gist/workspace.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gist {

enum class PropertyKind { Kmnc, FaultTypes };

std::string_view to_string(PropertyKind p);
PropertyKind parse_property(std::string_view name);

struct PropertyScore {
  PropertyKind property = PropertyKind::Kmnc;
  double value = 0.0;
  std::vector<std::string> references;  // one id, or several for a combined profile
  std::string objective;
  std::string mut;
};

// ---- KMNC bands ------------------------------------------------------------

struct BandSpec {
  Eigen::VectorXd low;
  Eigen::VectorXd high;
  int k = 10;

  std::size_t neurons() const { return static_cast<std::size_t>(low.size()); }
  bool degenerate(std::size_t neuron) const { return low(neuron) == high(neuron); }
  /// Section index of `value` on `neuron`, or -1 when it falls outside the
  /// train range. A constant neuron has the single section 0 at its value.
  int section_of(std::size_t neuron, double value) const;
  double lower_edge(std::size_t neuron, int section) const;
};

BandSpec fit_bands(const Eigen::MatrixXd& train_features, int k);

/// Covered sections per neuron, one bitset row per neuron.
class CoverageProfile {
 public:
  CoverageProfile() = default;
  CoverageProfile(std::size_t neurons, int k);

  std::size_t neurons() const { return neurons_; }
  int k() const { return k_; }
  bool covered(std::size_t neuron, int section) const;
  void cover(std::size_t neuron, int section);
  std::size_t count(std::size_t neuron) const;
  std::size_t total() const;
  /// |S_this ∩ S_other| summed over neurons.
  std::size_t intersection(const CoverageProfile& other) const;
  std::vector<int> sections(std::size_t neuron) const;
  void merge(const CoverageProfile& other);

  bool operator==(const CoverageProfile& o) const {
    return neurons_ == o.neurons_ && k_ == o.k_ && bits_ == o.bits_;
  }

  // bookkeeping, not part of equality
  std::string run;                   // identifies the band spec the profile was built against
  std::string mut;
  std::vector<std::string> sources;  // test set ids

 private:
  std::size_t words() const { return static_cast<std::size_t>((k_ + 63) / 64); }
  std::size_t neurons_ = 0;
  int k_ = 0;
  std::vector<std::uint64_t> bits_;
};

CoverageProfile coverage_profile(const Eigen::MatrixXd& eval_features, const BandSpec& bands,
                                 std::span<const std::uint8_t> fault_mask);

PropertyScore kmnc_overlap(const CoverageProfile& reference, const CoverageProfile& objective);
CoverageProfile combine_profiles(std::span<const CoverageProfile> profiles);

// ---- fault types -----------------------------------------------------------

enum class Reducer { Pca, None };
enum class ClusterAlgo { Dbscan, HdbscanLite };

struct ClusteringConfig {
  Reducer reducer = Reducer::Pca;
  int reduced_dims = 6;
  ClusterAlgo cluster_algo = ClusterAlgo::Dbscan;
  double eps = 1.5;
  int min_pts = 5;
  double label_feature_scale = 1.0;
  std::uint64_t rng_seed = 0;
  bool standardize_after_filter = true;  // statistics over faulty rows only

  void validate() const;
  std::string hash() const;
};

std::string_view to_string(Reducer r);
std::string_view to_string(ClusterAlgo a);
Reducer parse_reducer(std::string_view name);
ClusterAlgo parse_cluster_algo(std::string_view name);

struct FaultRow {
  std::string testset;
  std::size_t row = 0;
};

struct FaultSpace {
  Eigen::MatrixXd matrix;  // standardized features | predicted label | true label
  std::vector<FaultRow> provenance;
};

FaultSpace build_fault_space(const Workspace& ws, const std::string& mut, std::span<const std::string> testsets,
                             const ClusteringConfig& config);

/// PCA onto the top `reduced_dims` components (largest-|loading| positive), or identity.
Eigen::MatrixXd reduce_dims(const Eigen::MatrixXd& points, const ClusteringConfig& config);

std::vector<int> dbscan(const Eigen::MatrixXd& points, double eps, int min_pts);
std::vector<int> hdbscan_lite(const Eigen::MatrixXd& points, int min_pts);
/// Labels per row, -1 for noise; cluster ids are numbered by lowest member index.
std::vector<int> cluster_density(const Eigen::MatrixXd& points, const ClusteringConfig& config);

double silhouette_score(const Eigen::MatrixXd& points, std::span<const int> labels);

struct FaultTypeSet {
  std::string run;
  std::string mut;
  std::vector<std::string> sources;
  std::set<int> ids;
};

struct FaultTypeProfile {
  std::string mut;
  std::string run;
  ClusteringConfig config;
  std::vector<std::string> testsets;
  std::vector<FaultRow> provenance;
  std::vector<int> labels;
  int n_clusters = 0;
  std::optional<double> silhouette;
  std::map<std::string, FaultTypeSet> sets;
  std::map<std::string, std::vector<std::size_t>> counts;  // per test set, length n_clusters
};

FaultTypeProfile fault_type_profiles(const Workspace& ws, const std::string& mut,
                                     std::span<const std::string> testsets, const ClusteringConfig& config);

PropertyScore fault_overlap(const FaultTypeSet& reference, const FaultTypeSet& objective);
FaultTypeSet combine_profiles(std::span<const FaultTypeSet> profiles);

}  // namespace gist
