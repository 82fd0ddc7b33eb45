#include "gist/workspace.hpp"

#include "gist/matrix_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace gist {
namespace {

using nlohmann::json;

std::string shape_str(Eigen::Index r, Eigen::Index c) { return std::to_string(r) + "x" + std::to_string(c); }

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

template <typename T>
T required(const json& obj, const char* key, const std::string& context) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorCode::ManifestParseError, context + ": missing key \"" + key + "\"");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestParseError, context + ": bad value for \"" + key + "\": " + e.what());
  }
}

// Loads one matrix, appending an issue instead of throwing so that every
// problem in the workspace is reported in one pass.
std::optional<MatrixFile> load_matrix(const std::filesystem::path& root, const std::filesystem::path& rel,
                                      std::vector<Issue>& issues) {
  const auto full = root / rel;
  std::error_code ec;
  if (!std::filesystem::is_regular_file(full, ec)) {
    issues.push_back({ErrorCode::MissingArtifact, "missing file " + full.string()});
    return std::nullopt;
  }
  try {
    return read_matrix(full);
  } catch (const Error& e) {
    issues.push_back({e.code(), e.what()});
    return std::nullopt;
  }
}

void check_labels(const Labels& labels, std::int64_t num_classes, const std::string& what,
                  std::vector<Issue>& issues) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      issues.push_back({ErrorCode::OutOfRange, what + ": label " + std::to_string(labels[i]) + " at index " +
                                                   std::to_string(i) + " outside [0, " +
                                                   std::to_string(num_classes) + ")"});
      return;
    }
  }
}

}  // namespace

const EvalEntry& ModelEntry::eval_for(const std::string& testset_id) const {
  const auto it = eval.find(testset_id);
  if (it == eval.end()) {
    throw Error(ErrorCode::UnknownTestSet, "model " + id + " has no evaluation for test set " + testset_id);
  }
  return it->second;
}

const ModelEntry& Workspace::model(std::string_view id) const {
  const auto it = std::find_if(models.begin(), models.end(), [&](const ModelEntry& m) { return m.id == id; });
  if (it == models.end()) throw Error(ErrorCode::UnknownModel, "no model \"" + std::string(id) + "\"");
  return *it;
}

bool Workspace::has_model(std::string_view id) const {
  return std::any_of(models.begin(), models.end(), [&](const ModelEntry& m) { return m.id == id; });
}

const TestSetEntry& Workspace::testset(std::string_view id) const {
  for (const auto& t : testsets) {
    if (t.id == id) return t;
  }
  throw Error(ErrorCode::UnknownTestSet, "no test set \"" + std::string(id) + "\"");
}

const TestSetEntry* Workspace::owned_testset(std::string_view model_id) const {
  for (const auto& t : testsets) {
    if (t.origin_model == model_id) return &t;
  }
  return nullptr;
}

LogitKind Workspace::logit_kind() const {
  const auto it = options.find("logits");
  if (it != options.end() && it->second == "probabilities") return LogitKind::Probabilities;
  return LogitKind::Raw;
}

std::size_t Workspace::train_rows() const {
  return models.empty() ? 0 : static_cast<std::size_t>(models.front().train_features.rows());
}

WorkspaceError::WorkspaceError(std::vector<Issue> issues)
    : Error(issues.empty() ? ErrorCode::ManifestParseError : issues.front().code,
            issues.empty() ? std::string("invalid workspace")
                           : issues.front().message +
                                 (issues.size() > 1 ? " (+" + std::to_string(issues.size() - 1) + " more)" : "")),
      issues_(std::move(issues)) {}

std::vector<Issue> check_workspace(const Workspace& ws) {
  std::vector<Issue> issues;
  if (ws.num_classes < 2) issues.push_back({ErrorCode::ManifestParseError, "num_classes must be >= 2"});
  if (ws.models.size() < 2) issues.push_back({ErrorCode::ManifestParseError, "workspace needs at least 2 models"});

  std::set<std::string> ids;
  for (const auto& m : ws.models) {
    if (!ids.insert(m.id).second) issues.push_back({ErrorCode::ManifestParseError, "duplicate model id " + m.id});
  }
  std::set<std::string> ts_ids;
  for (const auto& t : ws.testsets) {
    if (!ts_ids.insert(t.id).second) issues.push_back({ErrorCode::ManifestParseError, "duplicate test set id " + t.id});
    if (!ids.count(t.origin_model)) {
      issues.push_back({ErrorCode::ManifestParseError,
                        "test set " + t.id + " has unknown origin_model " + t.origin_model});
    }
    check_labels(t.labels, ws.num_classes, "test set " + t.id, issues);
  }

  const Eigen::Index n_train = ws.models.empty() ? 0 : ws.models.front().train_features.rows();
  for (const auto& m : ws.models) {
    const auto& f = m.train_features;
    const auto d = f.cols();
    if (f.rows() != n_train) {
      issues.push_back({ErrorCode::ShapeMismatch, m.train_features_path.string() + " is " + shape_str(f.rows(), d) +
                                                      " but " + ws.models.front().train_features_path.string() +
                                                      " has " + std::to_string(n_train) + " rows"});
    }
    if (m.train_logits.rows() != f.rows() || m.train_logits.cols() != ws.num_classes) {
      issues.push_back({ErrorCode::ShapeMismatch,
                        m.train_logits_path.string() + " is " + shape_str(m.train_logits.rows(), m.train_logits.cols()) +
                            ", expected " + shape_str(f.rows(), ws.num_classes) + " to match " +
                            m.train_features_path.string()});
    }
    if (static_cast<Eigen::Index>(m.train_labels.size()) != f.rows()) {
      issues.push_back({ErrorCode::ShapeMismatch, m.train_labels_path.string() + " has " +
                                                      std::to_string(m.train_labels.size()) + " labels but " +
                                                      m.train_features_path.string() + " is " +
                                                      shape_str(f.rows(), d)});
    }
    check_labels(m.train_labels, ws.num_classes, "model " + m.id + " train labels", issues);
    if (m.train_accuracy && (*m.train_accuracy < 0.0 || *m.train_accuracy > 1.0)) {
      issues.push_back({ErrorCode::OutOfRange, "model " + m.id + " train_accuracy outside [0,1]"});
    }

    for (const auto& [ts_id, e] : m.eval) {
      if (!ts_ids.count(ts_id)) {
        issues.push_back({ErrorCode::ManifestParseError, "model " + m.id + " evaluates unknown test set " + ts_id});
        continue;
      }
      const auto& ts = ws.testset(ts_id);
      const auto n = static_cast<Eigen::Index>(ts.labels.size());
      if (e.features.rows() != n || e.features.cols() != d) {
        issues.push_back({ErrorCode::ShapeMismatch,
                          e.features_path.string() + " is " + shape_str(e.features.rows(), e.features.cols()) +
                              " but " + ts.labels_path.string() + " has " + std::to_string(n) + " labels and " +
                              m.train_features_path.string() + " is " + shape_str(f.rows(), d)});
      }
      if (e.logits.rows() != n || e.logits.cols() != ws.num_classes) {
        issues.push_back({ErrorCode::ShapeMismatch, e.logits_path.string() + " is " +
                                                        shape_str(e.logits.rows(), e.logits.cols()) + " but " +
                                                        ts.labels_path.string() + " needs " +
                                                        shape_str(n, ws.num_classes)});
      }
    }

    if (m.role == ModelRole::Reference) {
      const auto owned = std::count_if(ws.testsets.begin(), ws.testsets.end(),
                                       [&](const TestSetEntry& t) { return t.origin_model == m.id; });
      if (owned != 1) {
        issues.push_back({ErrorCode::ManifestParseError, "reference model " + m.id + " owns " +
                                                             std::to_string(owned) + " test sets, expected 1"});
      }
    }
  }
  return issues;
}

Workspace load_workspace(const std::filesystem::path& root) {
  const auto manifest_path = root / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) {
    std::error_code ec;
    if (!std::filesystem::exists(root, ec)) {
      throw Error(ErrorCode::IoError, "workspace root " + root.string() + " does not exist");
    }
    throw WorkspaceError({{ErrorCode::MissingArtifact, "missing file " + manifest_path.string()}});
  }
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw WorkspaceError({{ErrorCode::ManifestParseError, manifest_path.string() + ": " + e.what()}});
  }

  Workspace ws;
  ws.root = root;
  ws.fingerprint = hex(fnv1a(text));
  std::vector<Issue> issues;

  try {
    ws.num_classes = required<std::int64_t>(doc, "num_classes", "manifest");
    if (doc.contains("options")) {
      for (const auto& [k, v] : doc.at("options").items()) ws.options[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    for (const auto& jm : required<json>(doc, "models", "manifest")) {
      ModelEntry m;
      m.id = required<std::string>(jm, "id", "model");
      const std::string ctx = "model " + m.id;
      m.model_type = required<std::string>(jm, "model_type", ctx);
      m.seed = required<std::int64_t>(jm, "seed", ctx);
      const auto role = required<std::string>(jm, "role", ctx);
      if (role == "reference") {
        m.role = ModelRole::Reference;
      } else if (role == "under_test") {
        m.role = ModelRole::UnderTest;
      } else {
        throw Error(ErrorCode::ManifestParseError, ctx + ": role must be reference or under_test");
      }
      m.train_features_path = required<std::string>(jm, "train_features", ctx);
      m.train_logits_path = required<std::string>(jm, "train_logits", ctx);
      m.train_labels_path = required<std::string>(jm, "train_labels", ctx);
      if (jm.contains("train_accuracy") && !jm.at("train_accuracy").is_null()) {
        m.train_accuracy = required<double>(jm, "train_accuracy", ctx);
      }
      if (jm.contains("eval")) {
        for (const auto& [ts_id, je] : jm.at("eval").items()) {
          EvalEntry e;
          e.features_path = required<std::string>(je, "features", ctx + " eval " + ts_id);
          e.logits_path = required<std::string>(je, "logits", ctx + " eval " + ts_id);
          m.eval.emplace(ts_id, std::move(e));
        }
      }
      ws.models.push_back(std::move(m));
    }
    for (const auto& jt : required<json>(doc, "testsets", "manifest")) {
      TestSetEntry t;
      t.id = required<std::string>(jt, "id", "testset");
      t.origin_model = required<std::string>(jt, "origin_model", "testset " + t.id);
      t.labels_path = required<std::string>(jt, "labels", "testset " + t.id);
      ws.testsets.push_back(std::move(t));
    }
  } catch (const Error& e) {
    throw WorkspaceError({{e.code(), e.what()}});
  }

  std::sort(ws.models.begin(), ws.models.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::sort(ws.testsets.begin(), ws.testsets.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  auto load_labels = [&](const std::filesystem::path& rel, Labels& out) {
    if (auto m = load_matrix(root, rel, issues)) {
      try {
        out = m->to_labels();
      } catch (const Error& e) {
        issues.push_back({e.code(), rel.string() + ": " + e.what()});
      }
    }
  };
  auto load_real = [&](const std::filesystem::path& rel, Eigen::MatrixXd& out) {
    if (auto m = load_matrix(root, rel, issues)) out = m->to_real();
  };

  for (auto& t : ws.testsets) load_labels(t.labels_path, t.labels);
  for (auto& m : ws.models) {
    load_real(m.train_features_path, m.train_features);
    load_real(m.train_logits_path, m.train_logits);
    load_labels(m.train_labels_path, m.train_labels);
    for (auto& [ts_id, e] : m.eval) {
      load_real(e.features_path, e.features);
      load_real(e.logits_path, e.logits);
    }
  }
  // Shape checks are meaningless on partially loaded data.
  if (issues.empty()) issues = check_workspace(ws);
  if (!issues.empty()) throw WorkspaceError(std::move(issues));
  return ws;
}

void write_workspace(const Workspace& ws, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  auto put = [&](const std::filesystem::path& rel, const MatrixFile& m) {
    const auto full = root / rel;
    if (full.has_parent_path()) std::filesystem::create_directories(full.parent_path());
    write_matrix(full, m);
  };

  json doc;
  doc["num_classes"] = ws.num_classes;
  if (!ws.options.empty()) doc["options"] = ws.options;
  doc["models"] = json::array();
  for (const auto& m : ws.models) {
    put(m.train_features_path, MatrixFile::from_real(m.train_features));
    put(m.train_logits_path, MatrixFile::from_real(m.train_logits));
    put(m.train_labels_path, MatrixFile::from_labels(m.train_labels));
    json jm;
    jm["id"] = m.id;
    jm["model_type"] = m.model_type;
    jm["seed"] = m.seed;
    jm["role"] = m.role == ModelRole::Reference ? "reference" : "under_test";
    jm["train_features"] = m.train_features_path.generic_string();
    jm["train_logits"] = m.train_logits_path.generic_string();
    jm["train_labels"] = m.train_labels_path.generic_string();
    if (m.train_accuracy) jm["train_accuracy"] = *m.train_accuracy;
    jm["eval"] = json::object();
    for (const auto& [ts_id, e] : m.eval) {
      put(e.features_path, MatrixFile::from_real(e.features));
      put(e.logits_path, MatrixFile::from_real(e.logits));
      jm["eval"][ts_id] = {{"features", e.features_path.generic_string()}, {"logits", e.logits_path.generic_string()}};
    }
    doc["models"].push_back(std::move(jm));
  }
  doc["testsets"] = json::array();
  for (const auto& t : ws.testsets) {
    put(t.labels_path, MatrixFile::from_labels(t.labels));
    doc["testsets"].push_back({{"id", t.id}, {"origin_model", t.origin_model}, {"labels", t.labels_path.generic_string()}});
  }
  std::ofstream out(root / "manifest.json", std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + (root / "manifest.json").string());
  out << doc.dump(2) << '\n';
}

Labels predictions_of(const Eigen::MatrixXd& logits) {
  Labels out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(r, c) > logits(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = best;
  }
  return out;
}

FaultMask fault_mask(std::span<const std::int64_t> predictions, std::span<const std::int64_t> labels) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                               std::to_string(labels.size()) + " labels");
  }
  FaultMask mask(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) mask[i] = predictions[i] != labels[i] ? 1 : 0;
  return mask;
}

FaultMask fault_mask_of(const Workspace& ws, const ModelEntry& model, const std::string& testset_id) {
  const auto& e = model.eval_for(testset_id);
  return fault_mask(predictions_of(e.logits), ws.testset(testset_id).labels);
}

double train_accuracy_of(const ModelEntry& model) {
  const auto pred = predictions_of(model.train_logits);
  if (pred.empty()) throw Error(ErrorCode::DegenerateMatrix, "model " + model.id + " has no train rows");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == model.train_labels.at(i);
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace gist
