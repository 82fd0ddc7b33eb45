#pragma once

#include <Eigen/Dense>

#include "gist/workspace.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gist {

enum class Metric { Pwcca, Cka, Ortho, Acc, Dis, Jdiv };
enum class Orientation { SimilarityUp, DistanceUp };

inline constexpr std::array<Metric, 6> kAllMetrics{Metric::Pwcca, Metric::Cka, Metric::Ortho,
                                                   Metric::Acc,   Metric::Dis, Metric::Jdiv};

std::string_view to_string(Metric m);
std::string_view to_string(Orientation o);
Metric parse_metric(std::string_view name);
Orientation orientation_of(Metric m);
/// Representational metrics read train features; functional ones read logits/labels.
bool is_representational(Metric m);

/// Column-centered, Frobenius-normalized features of one model.
struct PreprocessedFeatures {
  Eigen::MatrixXd matrix;
  std::string source_model;
};

struct SimilarityScore {
  Metric metric = Metric::Pwcca;
  double value = 0.0;
  Orientation orientation = Orientation::SimilarityUp;
  std::string model_a;
  std::string model_b;
};

PreprocessedFeatures preprocess_features(const Eigen::MatrixXd& raw, std::string source_model = {});

enum class PwccaDirection {
  Symmetric,  // mean of both directions
  Forward,    // projection weights taken from the first argument only
};

inline constexpr double kCcaRidge = 1e-10;
inline constexpr double kMaxCcaCondition = 1e12;
inline constexpr double kProbabilityFloor = 1e-7;

SimilarityScore pwcca(const PreprocessedFeatures& m1, const PreprocessedFeatures& m2,
                      PwccaDirection direction = PwccaDirection::Symmetric);
SimilarityScore cka_linear(const PreprocessedFeatures& m1, const PreprocessedFeatures& m2);
SimilarityScore procrustes_ortho(const PreprocessedFeatures& m1, const PreprocessedFeatures& m2);
SimilarityScore acc_diff(double p1, double p2);
SimilarityScore disagreement(std::span<const std::int64_t> labels1, std::span<const std::int64_t> labels2);
SimilarityScore j_divergence(const Eigen::MatrixXd& logits1, const Eigen::MatrixXd& logits2, LogitKind kind);

/// Row-stochastic matrix: softmax for raw logits, renormalization otherwise,
/// then clamp to [kProbabilityFloor, 1] and renormalize again.
Eigen::MatrixXd to_probabilities(const Eigen::MatrixXd& logits, LogitKind kind);

enum class AccuracySource {
  ManifestOrTrain,  // manifest train_accuracy when present, else computed from train logits
  Train,            // always computed from train logits vs labels
};

struct SimilarityOptions {
  PwccaDirection pwcca_direction = PwccaDirection::Symmetric;
  AccuracySource accuracy_source = AccuracySource::ManifestOrTrain;
  unsigned jobs = 0;  // 0: GIST_JOBS or hardware concurrency

  std::string config_hash() const;
};

/// Computes model-to-model scores over one workspace. Per-model
/// preprocessing (centering, Gram matrix, CCA whitening) is done once and
/// reused; scores are memoized by (pair, metric, config hash) and optionally
/// persisted as JSON lines under `cache_dir`.
class SimilarityEngine {
 public:
  explicit SimilarityEngine(const Workspace& ws, SimilarityOptions options = {},
                            std::optional<std::filesystem::path> cache_dir = std::nullopt);
  ~SimilarityEngine();
  SimilarityEngine(const SimilarityEngine&) = delete;
  SimilarityEngine& operator=(const SimilarityEngine&) = delete;

  SimilarityScore score(Metric metric, const std::string& model_a, const std::string& model_b);

  /// One score per candidate, in candidate order; candidates run concurrently.
  std::vector<SimilarityScore> pairwise(Metric metric, const std::string& target,
                                        std::span<const std::string> candidates);

  const SimilarityOptions& options() const { return options_; }
  std::size_t cache_size() const;

 private:
  struct Prepared;
  const Prepared& prepared(const std::string& model_id);
  double compute(Metric metric, const std::string& a, const std::string& b);
  std::string cache_key(Metric metric, const std::string& a, const std::string& b) const;

  const Workspace& ws_;
  SimilarityOptions options_;
  std::optional<std::filesystem::path> cache_file_;

  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Prepared>> prepared_;
  std::map<std::string, double> cache_;
};

std::vector<SimilarityScore> pairwise_similarity(const Workspace& ws, Metric metric, const std::string& target,
                                                 std::span<const std::string> candidates,
                                                 const SimilarityOptions& options = {});

/// CSV with header metric,model_a,model_b,value,orientation.
void write_scores_csv(const std::filesystem::path& path, std::span<const SimilarityScore> scores);

}  // namespace gist
