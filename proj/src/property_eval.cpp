#include "gist/pipeline.hpp"

#include <algorithm>

namespace gist {

PropertyEvaluator::PropertyEvaluator(const Workspace& ws, std::string mut, std::string objective,
                                     std::span<const std::string> pool, PropertyOptions options)
    : ws_(ws), mut_(std::move(mut)), objective_(std::move(objective)), pool_(pool.begin(), pool.end()),
      options_(std::move(options)) {
  const auto& model = ws_.model(mut_);
  ws_.testset(objective_);
  for (const auto& t : pool_) ws_.testset(t);
  if (options_.kind == PropertyKind::Kmnc) {
    bands_ = fit_bands(model.train_features, options_.k);
    return;
  }
  std::vector<std::string> all = pool_;
  if (std::find(all.begin(), all.end(), objective_) == all.end()) all.push_back(objective_);
  std::sort(all.begin(), all.end());
  fault_types_ = fault_type_profiles(ws_, mut_, all, options_.clustering);
}

void PropertyEvaluator::check_pool(const std::string& t) const {
  if (t != objective_ && std::find(pool_.begin(), pool_.end(), t) == pool_.end()) {
    throw Error(ErrorCode::UnknownTestSet, "test set " + t + " is not in the evaluation pool of " + mut_);
  }
}

const CoverageProfile& PropertyEvaluator::kmnc(const std::string& testset, bool filter) const {
  const std::string key = testset + (filter ? "" : "#all");
  {
    std::lock_guard lock(mutex_);
    if (const auto it = profiles_.find(key); it != profiles_.end()) return it->second;
  }
  const auto& model = ws_.model(mut_);
  FaultMask mask = filter ? fault_mask_of(ws_, model, testset)
                          : FaultMask(ws_.testset(testset).labels.size(), std::uint8_t{1});
  auto p = coverage_profile(model.eval_for(testset).features, bands_, mask);
  p.run = mut_ + "#k" + std::to_string(options_.k);
  p.mut = mut_;
  p.sources = {testset};
  std::lock_guard lock(mutex_);
  return profiles_.emplace(key, std::move(p)).first->second;
}

double PropertyEvaluator::value(const std::string& reference) const {
  const std::string one[] = {reference};
  return combined(one);
}

double PropertyEvaluator::combined(std::span<const std::string> refs) const {
  for (const auto& r : refs) check_pool(r);
  if (options_.kind == PropertyKind::Kmnc) {
    std::vector<CoverageProfile> parts;
    parts.reserve(refs.size());
    for (const auto& r : refs) parts.push_back(kmnc(r, true));
    const auto& obj = kmnc(objective_, options_.filter_objective);
    if (parts.empty()) {
      if (obj.total() == 0) throw Error(ErrorCode::EmptyObjective, "objective profile covers no section");
      return 0.0;
    }
    return kmnc_overlap(combine_profiles(parts), obj).value;
  }
  std::vector<FaultTypeSet> parts;
  for (const auto& r : refs) parts.push_back(fault_types_->sets.at(r));
  const auto& obj = fault_types_->sets.at(objective_);
  if (parts.empty()) {
    if (obj.ids.empty()) throw Error(ErrorCode::EmptyObjective, "objective has no non-noise fault type");
    return 0.0;
  }
  return fault_overlap(combine_profiles(parts), obj).value;
}

}  // namespace gist
