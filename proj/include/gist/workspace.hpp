#pragma once

#include <Eigen/Dense>

#include "gist/error.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gist {

enum class ModelRole { Reference, UnderTest };
enum class LogitKind { Raw, Probabilities };

using Labels = std::vector<std::int64_t>;
using FaultMask = std::vector<std::uint8_t>;

struct EvalEntry {
  std::filesystem::path features_path;
  std::filesystem::path logits_path;
  Eigen::MatrixXd features;
  Eigen::MatrixXd logits;
};

struct ModelEntry {
  std::string id;
  std::string model_type;
  std::int64_t seed = 0;
  ModelRole role = ModelRole::Reference;
  std::optional<double> train_accuracy;

  std::filesystem::path train_features_path;
  std::filesystem::path train_logits_path;
  std::filesystem::path train_labels_path;
  Eigen::MatrixXd train_features;
  Eigen::MatrixXd train_logits;
  Labels train_labels;

  std::map<std::string, EvalEntry> eval;  // keyed by test set id

  const EvalEntry& eval_for(const std::string& testset_id) const;
};

struct TestSetEntry {
  std::string id;
  std::string origin_model;
  std::filesystem::path labels_path;
  Labels labels;
};

/// Manifest plus every matrix it references, loaded and cross-checked.
/// Models and test sets are kept sorted by id so results never depend on
/// manifest list order. Immutable after load; safe to read concurrently.
struct Workspace {
  std::filesystem::path root;
  std::int64_t num_classes = 0;
  std::vector<ModelEntry> models;
  std::vector<TestSetEntry> testsets;
  std::map<std::string, std::string> options;
  std::string fingerprint;

  const ModelEntry& model(std::string_view id) const;
  const TestSetEntry& testset(std::string_view id) const;
  bool has_model(std::string_view id) const;
  /// Test set generated on `model_id`, if any.
  const TestSetEntry* owned_testset(std::string_view model_id) const;
  LogitKind logit_kind() const;
  std::size_t train_rows() const;
};

struct Issue {
  ErrorCode code;
  std::string message;
};

/// Thrown by load_workspace; carries every issue found, code() is the first one's.
class WorkspaceError : public Error {
 public:
  explicit WorkspaceError(std::vector<Issue> issues);
  const std::vector<Issue>& issues() const noexcept { return issues_; }

 private:
  std::vector<Issue> issues_;
};

Workspace load_workspace(const std::filesystem::path& root);

/// Checks the in-memory invariants (shapes, label ranges, ownership) without touching disk.
std::vector<Issue> check_workspace(const Workspace& ws);

/// Writes every matrix to its *_path (relative to root) and emits manifest.json.
void write_workspace(const Workspace& ws, const std::filesystem::path& root);

/// Row-wise argmax; ties resolve to the lowest column.
Labels predictions_of(const Eigen::MatrixXd& logits);

/// 1 where prediction differs from label.
FaultMask fault_mask(std::span<const std::int64_t> predictions, std::span<const std::int64_t> labels);

/// Fault mask of `model` on test set `testset_id`.
FaultMask fault_mask_of(const Workspace& ws, const ModelEntry& model, const std::string& testset_id);

double train_accuracy_of(const ModelEntry& model);

}  // namespace gist
