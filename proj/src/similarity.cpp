#include "gist/similarity.hpp"

#include "gist/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gist {
namespace {

void require_rows(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows()) {
    throw Error(ErrorCode::RowMismatch, "row counts differ: " + std::to_string(a.rows()) + " vs " +
                                            std::to_string(b.rows()));
  }
}

SimilarityScore make_score(Metric m, double v, std::string a = {}, std::string b = {}) {
  return SimilarityScore{m, v, orientation_of(m), std::move(a), std::move(b)};
}

// Whitening data for one side of a ridge-regularized CCA.
struct CcaSide {
  Eigen::MatrixXd whitener;      // (G + eps I)^(-1/2), G = X^T X
  Eigen::MatrixXd weight_basis;  // whitener * G; row i of W^T * this gives <h_i, X_j>
  Eigen::MatrixXd variate_gram;  // whitener * G * whitener; gives |h_i|^2
};

CcaSide make_cca_side(const Eigen::MatrixXd& gram, const std::string& who) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::RankDeficient, "eigendecomposition failed for " + who);
  const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
  const double condition = (lambda.maxCoeff() + kCcaRidge) / (lambda.minCoeff() + kCcaRidge);
  if (!(condition < kMaxCcaCondition)) {
    throw Error(ErrorCode::RankDeficient, "covariance of " + (who.empty() ? std::string("input") : who) +
                                              " has condition number " + std::to_string(condition));
  }
  const Eigen::VectorXd inv_sqrt = (lambda.array() + kCcaRidge).rsqrt();
  CcaSide side;
  side.whitener = eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
  side.weight_basis = side.whitener * gram;
  side.variate_gram = side.weight_basis * side.whitener;
  return side;
}

double projection_weighted(const Eigen::MatrixXd& directions, const Eigen::VectorXd& rho, const CcaSide& side) {
  const Eigen::Index k = rho.size();
  const Eigen::MatrixXd dirs = directions.leftCols(k);
  const Eigen::MatrixXd proj = dirs.transpose() * side.weight_basis;  // k x d
  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double norm2 = dirs.col(i).dot(side.variate_gram * dirs.col(i));
    if (norm2 <= 0.0) continue;
    const double alpha = proj.row(i).cwiseAbs().sum() / std::sqrt(norm2);
    num += alpha * rho(i);
    den += alpha;
  }
  if (den <= 0.0) throw Error(ErrorCode::DegenerateMatrix, "all projection weights vanish");
  return num / den;
}

double pwcca_value(const Eigen::MatrixXd& cross, const CcaSide& a, const CcaSide& b, PwccaDirection direction) {
  const Eigen::MatrixXd c = a.whitener * cross * b.whitener;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd rho = svd.singularValues().cwiseMin(1.0).cwiseMax(0.0);
  const double forward = projection_weighted(svd.matrixU(), rho, a);
  if (direction == PwccaDirection::Forward) return forward;
  const double backward = projection_weighted(svd.matrixV(), rho, b);
  return 0.5 * (forward + backward);
}

double cka_value(const Eigen::MatrixXd& cross, double gram_norm_a, double gram_norm_b) {
  const double den = gram_norm_a * gram_norm_b;
  if (!(den > 0.0)) throw Error(ErrorCode::DegenerateMatrix, "zero Gram matrix in CKA");
  return std::clamp(1.0 - cross.squaredNorm() / den, 0.0, 1.0);
}

double ortho_value(const Eigen::MatrixXd& cross, double sq_norm_a, double sq_norm_b) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(cross);
  const double nuclear = svd.singularValues().sum();
  return std::max(0.0, sq_norm_a + sq_norm_b - 2.0 * nuclear);
}

double jdiv_value(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  const Eigen::ArrayXXd lp = p.array().log();
  const Eigen::ArrayXXd lq = q.array().log();
  const double sym = ((p.array() - q.array()) * (lp - lq)).sum();  // KL(p||q) + KL(q||p), summed over rows
  return std::max(0.0, sym / (2.0 * static_cast<double>(p.rows())));
}

double disagreement_value(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " labels");
  }
  if (a.empty()) throw Error(ErrorCode::LengthMismatch, "empty label vectors");
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += a[i] != b[i];
  return static_cast<double>(diff) / static_cast<double>(a.size());
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::Pwcca: return "pwcca";
    case Metric::Cka: return "cka";
    case Metric::Ortho: return "ortho";
    case Metric::Acc: return "acc";
    case Metric::Dis: return "dis";
    case Metric::Jdiv: return "jdiv";
  }
  return "?";
}

std::string_view to_string(Orientation o) {
  return o == Orientation::SimilarityUp ? "similarity_up" : "distance_up";
}

Metric parse_metric(std::string_view name) {
  for (const Metric m : kAllMetrics) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::UnknownMetric, "unknown metric \"" + std::string(name) + "\"");
}

Orientation orientation_of(Metric m) {
  return m == Metric::Pwcca ? Orientation::SimilarityUp : Orientation::DistanceUp;
}

bool is_representational(Metric m) { return m == Metric::Pwcca || m == Metric::Cka || m == Metric::Ortho; }

PreprocessedFeatures preprocess_features(const Eigen::MatrixXd& raw, std::string source_model) {
  if (raw.rows() < 2 || raw.cols() < 1) {
    throw Error(ErrorCode::DegenerateMatrix, "need at least 2 rows and 1 column, got " + std::to_string(raw.rows()) +
                                                 "x" + std::to_string(raw.cols()));
  }
  PreprocessedFeatures out;
  out.source_model = std::move(source_model);
  out.matrix = raw.rowwise() - raw.colwise().mean();
  const double norm = out.matrix.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::DegenerateMatrix,
                "features of " + (out.source_model.empty() ? std::string("input") : out.source_model) +
                    " are constant after centering");
  }
  out.matrix /= norm;
  return out;
}

SimilarityScore pwcca(const PreprocessedFeatures& m1, const PreprocessedFeatures& m2, PwccaDirection direction) {
  require_rows(m1.matrix, m2.matrix);
  const Eigen::MatrixXd g1 = m1.matrix.transpose() * m1.matrix;
  const Eigen::MatrixXd g2 = m2.matrix.transpose() * m2.matrix;
  const auto a = make_cca_side(g1, m1.source_model);
  const auto b = make_cca_side(g2, m2.source_model);
  const Eigen::MatrixXd cross = m1.matrix.transpose() * m2.matrix;
  return make_score(Metric::Pwcca, pwcca_value(cross, a, b, direction), m1.source_model, m2.source_model);
}

SimilarityScore cka_linear(const PreprocessedFeatures& m1, const PreprocessedFeatures& m2) {
  require_rows(m1.matrix, m2.matrix);
  const Eigen::MatrixXd cross = m1.matrix.transpose() * m2.matrix;
  const double n1 = (m1.matrix.transpose() * m1.matrix).norm();
  const double n2 = (m2.matrix.transpose() * m2.matrix).norm();
  return make_score(Metric::Cka, cka_value(cross, n1, n2), m1.source_model, m2.source_model);
}

SimilarityScore procrustes_ortho(const PreprocessedFeatures& m1, const PreprocessedFeatures& m2) {
  require_rows(m1.matrix, m2.matrix);
  const Eigen::MatrixXd cross = m1.matrix.transpose() * m2.matrix;
  return make_score(Metric::Ortho, ortho_value(cross, m1.matrix.squaredNorm(), m2.matrix.squaredNorm()),
                    m1.source_model, m2.source_model);
}

SimilarityScore acc_diff(double p1, double p2) {
  if (!(p1 >= 0.0 && p1 <= 1.0) || !(p2 >= 0.0 && p2 <= 1.0)) {
    throw Error(ErrorCode::OutOfRange, "accuracies must lie in [0,1], got " + std::to_string(p1) + " and " +
                                           std::to_string(p2));
  }
  return make_score(Metric::Acc, std::abs(p1 - p2));
}

SimilarityScore disagreement(std::span<const std::int64_t> labels1, std::span<const std::int64_t> labels2) {
  return make_score(Metric::Dis, disagreement_value(labels1, labels2));
}

Eigen::MatrixXd to_probabilities(const Eigen::MatrixXd& logits, LogitKind kind) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::ArrayXd row = logits.row(r).transpose().array();
    if (kind == LogitKind::Raw) {
      row = (row - row.maxCoeff()).exp();
    } else {
      row = row.cwiseMax(0.0);
    }
    const double s = row.sum();
    if (s > 0.0) {
      row /= s;
    } else {
      row.setConstant(1.0 / static_cast<double>(row.size()));
    }
    row = row.cwiseMax(kProbabilityFloor).cwiseMin(1.0);
    row /= row.sum();
    p.row(r) = row.transpose();
  }
  return p;
}

SimilarityScore j_divergence(const Eigen::MatrixXd& logits1, const Eigen::MatrixXd& logits2, LogitKind kind) {
  if (logits1.rows() != logits2.rows() || logits1.cols() != logits2.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "logit shapes differ: " + std::to_string(logits1.rows()) + "x" +
                                              std::to_string(logits1.cols()) + " vs " +
                                              std::to_string(logits2.rows()) + "x" + std::to_string(logits2.cols()));
  }
  if (logits1.rows() == 0) throw Error(ErrorCode::ShapeMismatch, "empty logit matrices");
  return make_score(Metric::Jdiv, jdiv_value(to_probabilities(logits1, kind), to_probabilities(logits2, kind)));
}

std::string SimilarityOptions::config_hash() const {
  std::ostringstream os;
  os << "pwcca=" << (pwcca_direction == PwccaDirection::Symmetric ? "sym" : "fwd")
     << ";acc=" << (accuracy_source == AccuracySource::ManifestOrTrain ? "manifest" : "train")
     << ";ridge=" << kCcaRidge << ";floor=" << kProbabilityFloor;
  std::ostringstream hex;
  hex << std::hex << fnv1a(os.str());
  return hex.str();
}

struct SimilarityEngine::Prepared {
  std::once_flag representational_once;
  std::once_flag functional_once;

  PreprocessedFeatures features;
  Eigen::MatrixXd gram;
  double gram_norm = 0.0;
  double sq_norm = 0.0;
  CcaSide cca;

  Eigen::MatrixXd probabilities;
  Labels predictions;
  double accuracy = 0.0;
};

SimilarityEngine::SimilarityEngine(const Workspace& ws, SimilarityOptions options,
                                   std::optional<std::filesystem::path> cache_dir)
    : ws_(ws), options_(options) {
  if (cache_dir) {
    std::filesystem::create_directories(*cache_dir);
    cache_file_ = *cache_dir / "similarity_cache.jsonl";
    std::ifstream in(*cache_file_);
    std::string line;
    while (std::getline(in, line)) {
      try {
        const auto j = nlohmann::json::parse(line);
        cache_.emplace(j.at("key").get<std::string>(), j.at("value").get<double>());
      } catch (...) {
        // a torn trailing line from an interrupted run is ignored
      }
    }
  }
}

SimilarityEngine::~SimilarityEngine() = default;

std::size_t SimilarityEngine::cache_size() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

const SimilarityEngine::Prepared& SimilarityEngine::prepared(const std::string& model_id) {
  std::shared_ptr<Prepared> p;
  {
    std::lock_guard lock(mutex_);
    auto& slot = prepared_[model_id];
    if (!slot) slot = std::make_shared<Prepared>();
    p = slot;
  }
  return *p;
}

std::string SimilarityEngine::cache_key(Metric metric, const std::string& a, const std::string& b) const {
  const bool ordered = metric == Metric::Pwcca && options_.pwcca_direction == PwccaDirection::Forward;
  const auto& first = ordered || a < b ? a : b;
  const auto& second = ordered || a < b ? b : a;
  return std::string(to_string(metric)) + "|" + first + "|" + second + "|" + options_.config_hash() + "|" +
         ws_.fingerprint;
}

double SimilarityEngine::compute(Metric metric, const std::string& a, const std::string& b) {
  const auto& ma = ws_.model(a);
  const auto& mb = ws_.model(b);
  auto& pa = const_cast<Prepared&>(prepared(a));
  auto& pb = const_cast<Prepared&>(prepared(b));

  auto representational = [&](Prepared& p, const ModelEntry& m) {
    std::call_once(p.representational_once, [&] {
      p.features = preprocess_features(m.train_features, m.id);
      p.gram = p.features.matrix.transpose() * p.features.matrix;
      p.gram_norm = p.gram.norm();
      p.sq_norm = p.features.matrix.squaredNorm();
      p.cca = make_cca_side(p.gram, m.id);
    });
  };
  auto functional = [&](Prepared& p, const ModelEntry& m) {
    std::call_once(p.functional_once, [&] {
      p.probabilities = to_probabilities(m.train_logits, ws_.logit_kind());
      p.predictions = predictions_of(m.train_logits);
      if (options_.accuracy_source == AccuracySource::ManifestOrTrain && m.train_accuracy) {
        p.accuracy = *m.train_accuracy;
      } else {
        p.accuracy = train_accuracy_of(m);
      }
    });
  };

  if (is_representational(metric)) {
    representational(pa, ma);
    representational(pb, mb);
    require_rows(pa.features.matrix, pb.features.matrix);
    const Eigen::MatrixXd cross = pa.features.matrix.transpose() * pb.features.matrix;
    switch (metric) {
      case Metric::Pwcca: return pwcca_value(cross, pa.cca, pb.cca, options_.pwcca_direction);
      case Metric::Cka: return cka_value(cross, pa.gram_norm, pb.gram_norm);
      default: return ortho_value(cross, pa.sq_norm, pb.sq_norm);
    }
  }
  functional(pa, ma);
  functional(pb, mb);
  switch (metric) {
    case Metric::Acc: return acc_diff(pa.accuracy, pb.accuracy).value;
    case Metric::Dis: return disagreement_value(pa.predictions, pb.predictions);
    default:
      if (pa.probabilities.rows() != pb.probabilities.rows() || pa.probabilities.cols() != pb.probabilities.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "train logits of " + a + " and " + b + " differ in shape");
      }
      return jdiv_value(pa.probabilities, pb.probabilities);
  }
}

SimilarityScore SimilarityEngine::score(Metric metric, const std::string& a, const std::string& b) {
  if (a == b) throw Error(ErrorCode::SelfComparison, "model " + a + " compared with itself");
  const auto key = cache_key(metric, a, b);
  {
    std::lock_guard lock(mutex_);
    if (const auto it = cache_.find(key); it != cache_.end()) return make_score(metric, it->second, a, b);
  }
  const double value = compute(metric, a, b);
  {
    std::lock_guard lock(mutex_);
    if (cache_.emplace(key, value).second && cache_file_) {
      std::ofstream out(*cache_file_, std::ios::app);
      out << nlohmann::json{{"key", key}, {"value", value}}.dump() << '\n';
    }
  }
  return make_score(metric, value, a, b);
}

std::vector<SimilarityScore> SimilarityEngine::pairwise(Metric metric, const std::string& target,
                                                        std::span<const std::string> candidates) {
  ws_.model(target);
  for (const auto& c : candidates) {
    if (c == target) throw Error(ErrorCode::SelfComparison, "candidate list contains the target " + target);
    ws_.model(c);
  }
  std::vector<SimilarityScore> out(candidates.size());
  parallel_for(candidates.size(), options_.jobs,
               [&](std::size_t i) { out[i] = score(metric, target, candidates[i]); });
  return out;
}

std::vector<SimilarityScore> pairwise_similarity(const Workspace& ws, Metric metric, const std::string& target,
                                                 std::span<const std::string> candidates,
                                                 const SimilarityOptions& options) {
  SimilarityEngine engine(ws, options);
  return engine.pairwise(metric, target, candidates);
}

void write_scores_csv(const std::filesystem::path& path, std::span<const SimilarityScore> scores) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "metric,model_a,model_b,value,orientation\n";
  out.precision(17);
  for (const auto& s : scores) {
    out << to_string(s.metric) << ',' << s.model_a << ',' << s.model_b << ',' << s.value << ','
        << to_string(s.orientation) << '\n';
  }
}

}  // namespace gist
