#include "gist/properties.hpp"

#include "gist/log.hpp"

#include <algorithm>
#include <cmath>

namespace gist {
namespace {

void standardize_columns(Eigen::MatrixXd& m, const Eigen::MatrixXd& stats_source) {
  const Eigen::RowVectorXd mean = stats_source.colwise().mean();
  const Eigen::RowVectorXd sd =
      ((stats_source.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(stats_source.rows()))
          .sqrt();
  m.rowwise() -= mean;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (sd(c) > 0.0) m.col(c) /= sd(c);  // constant columns stay at zero
  }
}

}  // namespace

FaultSpace build_fault_space(const Workspace& ws, const std::string& mut, std::span<const std::string> testsets,
                             const ClusteringConfig& config) {
  const auto& model = ws.model(mut);
  std::vector<const EvalEntry*> evals;
  std::vector<FaultMask> masks;
  std::size_t faulty = 0;
  std::size_t all_rows = 0;
  for (const auto& id : testsets) {
    evals.push_back(&model.eval_for(id));
    masks.push_back(fault_mask_of(ws, model, id));
    faulty += static_cast<std::size_t>(std::count(masks.back().begin(), masks.back().end(), 1));
    all_rows += masks.back().size();
  }
  if (faulty == 0) throw Error(ErrorCode::NoFaults, "no test set induces a fault on " + mut);

  const Eigen::Index d = model.train_features.cols();
  FaultSpace out;
  out.matrix.resize(static_cast<Eigen::Index>(faulty), d + 2);
  Eigen::MatrixXd everything;
  if (!config.standardize_after_filter) everything.resize(static_cast<Eigen::Index>(all_rows), d);

  Eigen::Index r = 0;
  Eigen::Index a = 0;
  for (std::size_t t = 0; t < testsets.size(); ++t) {
    const auto& e = *evals[t];
    const auto pred = predictions_of(e.logits);
    const auto& truth = ws.testset(testsets[t]).labels;
    for (Eigen::Index i = 0; i < e.features.rows(); ++i) {
      if (!config.standardize_after_filter) everything.row(a++) = e.features.row(i);
      if (!masks[t][static_cast<std::size_t>(i)]) continue;
      out.matrix.row(r).head(d) = e.features.row(i);
      out.matrix(r, d) = static_cast<double>(pred[static_cast<std::size_t>(i)]) * config.label_feature_scale;
      out.matrix(r, d + 1) = static_cast<double>(truth[static_cast<std::size_t>(i)]) * config.label_feature_scale;
      out.provenance.push_back({testsets[t], static_cast<std::size_t>(i)});
      ++r;
    }
  }
  Eigen::MatrixXd feats = out.matrix.leftCols(d);
  if (config.standardize_after_filter) {
    const Eigen::MatrixXd src = feats;
    standardize_columns(feats, src);
  } else {
    standardize_columns(feats, everything);
  }
  out.matrix.leftCols(d) = feats;
  return out;
}

FaultTypeProfile fault_type_profiles(const Workspace& ws, const std::string& mut,
                                     std::span<const std::string> testsets, const ClusteringConfig& config) {
  config.validate();
  FaultTypeProfile p;
  p.mut = mut;
  p.config = config;
  p.testsets.assign(testsets.begin(), testsets.end());
  p.run = mut + "#" + config.hash();
  for (const auto& id : testsets) p.run += "|" + id;

  auto space = build_fault_space(ws, mut, testsets, config);
  p.provenance = std::move(space.provenance);
  Eigen::MatrixXd embedded;
  if (config.reducer == Reducer::Pca && space.matrix.rows() <= config.reduced_dims) {
    warn("only " + std::to_string(space.matrix.rows()) + " faulty rows on " + mut + "; skipping reduction");
    embedded = space.matrix;
  } else {
    embedded = reduce_dims(space.matrix, config);
  }
  p.labels = cluster_density(embedded, config);
  p.n_clusters = 0;
  for (const int l : p.labels) p.n_clusters = std::max(p.n_clusters, l + 1);
  if (p.n_clusters >= 2) p.silhouette = silhouette_score(embedded, p.labels);

  for (const auto& id : testsets) {
    auto& set = p.sets[id];
    set.run = p.run;
    set.mut = mut;
    set.sources = {id};
    p.counts[id].assign(static_cast<std::size_t>(p.n_clusters), 0);
  }
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    const int l = p.labels[i];
    if (l < 0) continue;
    const auto& ts = p.provenance[i].testset;
    p.sets[ts].ids.insert(l);
    ++p.counts[ts][static_cast<std::size_t>(l)];
  }
  return p;
}

PropertyScore fault_overlap(const FaultTypeSet& ref, const FaultTypeSet& obj) {
  if (!ref.run.empty() && !obj.run.empty() && ref.run != obj.run) {
    throw Error(ErrorCode::MixedRuns, "fault type sets come from different clustering runs");
  }
  if (obj.ids.empty()) throw Error(ErrorCode::EmptyObjective, "objective has no non-noise fault type");
  std::size_t shared = 0;
  for (const int id : obj.ids) shared += ref.ids.count(id);
  PropertyScore s;
  s.property = PropertyKind::FaultTypes;
  s.value = static_cast<double>(shared) / static_cast<double>(obj.ids.size());
  s.references = ref.sources;
  s.objective = obj.sources.empty() ? std::string{} : obj.sources.front();
  s.mut = obj.mut;
  return s;
}

FaultTypeSet combine_profiles(std::span<const FaultTypeSet> profiles) {
  if (profiles.empty()) return {};
  FaultTypeSet out = profiles.front();
  for (const auto& p : profiles.subspan(1)) {
    if (p.run != out.run) throw Error(ErrorCode::MixedRuns, "cannot combine fault types from different runs");
    out.ids.insert(p.ids.begin(), p.ids.end());
    out.sources.insert(out.sources.end(), p.sources.begin(), p.sources.end());
  }
  return out;
}

}  // namespace gist
