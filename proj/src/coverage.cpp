#include "gist/properties.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace gist {

std::string_view to_string(PropertyKind p) { return p == PropertyKind::Kmnc ? "kmnc" : "fault_types"; }

PropertyKind parse_property(std::string_view name) {
  if (name == "kmnc") return PropertyKind::Kmnc;
  if (name == "fault_types" || name == "fault-types") return PropertyKind::FaultTypes;
  throw Error(ErrorCode::InvalidArgument, "unknown property \"" + std::string(name) + "\"");
}

BandSpec fit_bands(const Eigen::MatrixXd& train, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1, got " + std::to_string(k));
  if (train.rows() < 2) throw Error(ErrorCode::TooFewRows, "band fitting needs at least 2 train rows");
  if (!train.allFinite()) throw Error(ErrorCode::NonFiniteValue, "non-finite train activation");
  BandSpec b;
  b.k = k;
  b.low = train.colwise().minCoeff().transpose();
  b.high = train.colwise().maxCoeff().transpose();
  return b;
}

double BandSpec::lower_edge(std::size_t n, int section) const {
  const double w = (high(n) - low(n)) / k;
  return low(n) + section * w;
}

int BandSpec::section_of(std::size_t n, double v) const {
  const double lo = low(n);
  const double hi = high(n);
  if (lo == hi) return v == lo ? 0 : -1;
  if (!(v >= lo && v <= hi)) return -1;  // also rejects NaN
  if (v == hi) return k - 1;
  const double span = hi - lo;
  auto edge = [&](int j) { return lo + j * span / k; };
  int i = std::clamp(static_cast<int>(std::floor((v - lo) / span * k)), 0, k - 1);
  // division can land one off near an edge; settle against the edges themselves
  while (i > 0 && v < edge(i)) --i;
  while (i < k - 1 && v >= edge(i + 1)) ++i;
  return i;
}

CoverageProfile::CoverageProfile(std::size_t neurons, int k) : neurons_(neurons), k_(k) {
  bits_.assign(neurons_ * words(), 0);
}

bool CoverageProfile::covered(std::size_t n, int s) const {
  return (bits_[n * words() + static_cast<std::size_t>(s) / 64] >> (s % 64)) & 1U;
}

void CoverageProfile::cover(std::size_t n, int s) {
  bits_[n * words() + static_cast<std::size_t>(s) / 64] |= std::uint64_t{1} << (s % 64);
}

std::size_t CoverageProfile::count(std::size_t n) const {
  std::size_t c = 0;
  for (std::size_t w = 0; w < words(); ++w) c += std::popcount(bits_[n * words() + w]);
  return c;
}

std::size_t CoverageProfile::total() const {
  std::size_t c = 0;
  for (const auto w : bits_) c += std::popcount(w);
  return c;
}

std::size_t CoverageProfile::intersection(const CoverageProfile& o) const {
  std::size_t c = 0;
  for (std::size_t i = 0; i < bits_.size(); ++i) c += std::popcount(bits_[i] & o.bits_[i]);
  return c;
}

std::vector<int> CoverageProfile::sections(std::size_t n) const {
  std::vector<int> out;
  for (int s = 0; s < k_; ++s) {
    if (covered(n, s)) out.push_back(s);
  }
  return out;
}

void CoverageProfile::merge(const CoverageProfile& o) {
  for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= o.bits_[i];
}

CoverageProfile coverage_profile(const Eigen::MatrixXd& eval, const BandSpec& bands,
                                 std::span<const std::uint8_t> mask) {
  if (static_cast<std::size_t>(eval.rows()) != mask.size()) {
    throw Error(ErrorCode::ShapeMismatch, "eval features have " + std::to_string(eval.rows()) +
                                              " rows but fault mask has " + std::to_string(mask.size()));
  }
  if (static_cast<std::size_t>(eval.cols()) != bands.neurons()) {
    throw Error(ErrorCode::ShapeMismatch, "eval features have " + std::to_string(eval.cols()) +
                                              " neurons but bands cover " + std::to_string(bands.neurons()));
  }
  CoverageProfile p(bands.neurons(), bands.k);
  // column-major storage: walk neurons outermost
  for (Eigen::Index n = 0; n < eval.cols(); ++n) {
    for (Eigen::Index r = 0; r < eval.rows(); ++r) {
      if (!mask[static_cast<std::size_t>(r)]) continue;
      const int s = bands.section_of(static_cast<std::size_t>(n), eval(r, n));
      if (s >= 0) p.cover(static_cast<std::size_t>(n), s);
    }
  }
  return p;
}

PropertyScore kmnc_overlap(const CoverageProfile& ref, const CoverageProfile& obj) {
  if (ref.neurons() != obj.neurons() || ref.k() != obj.k()) {
    throw Error(ErrorCode::ShapeMismatch, "profiles differ in neuron pool or k");
  }
  if (!ref.run.empty() && !obj.run.empty() && ref.run != obj.run) {
    throw Error(ErrorCode::MixedRuns, "profiles built against different band specs");
  }
  const auto den = obj.total();
  if (den == 0) throw Error(ErrorCode::EmptyObjective, "objective profile covers no section");
  PropertyScore s;
  s.property = PropertyKind::Kmnc;
  s.value = static_cast<double>(ref.intersection(obj)) / static_cast<double>(den);
  s.references = ref.sources;
  s.objective = obj.sources.empty() ? std::string{} : obj.sources.front();
  s.mut = obj.mut;
  return s;
}

CoverageProfile combine_profiles(std::span<const CoverageProfile> profiles) {
  if (profiles.empty()) return {};
  CoverageProfile out = profiles.front();
  for (const auto& p : profiles.subspan(1)) {
    if (p.neurons() != out.neurons() || p.k() != out.k() || p.run != out.run || p.mut != out.mut) {
      throw Error(ErrorCode::MixedRuns, "cannot combine profiles from different band specs");
    }
    out.merge(p);
    out.sources.insert(out.sources.end(), p.sources.begin(), p.sources.end());
  }
  return out;
}

}  // namespace gist
