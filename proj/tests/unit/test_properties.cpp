#include <doctest.h>

#include "../oracles.hpp"
#include "gist/log.hpp"
#include "gist/properties.hpp"

#include <algorithm>

using namespace gist;

namespace {

CoverageProfile profile_of(std::size_t neurons, int k, const std::vector<std::pair<int, int>>& cells) {
  CoverageProfile p(neurons, k);
  for (const auto& [n, s] : cells) p.cover(static_cast<std::size_t>(n), s);
  return p;
}

FaultTypeSet ids(std::set<int> s) {
  FaultTypeSet f;
  f.ids = std::move(s);
  return f;
}

// One model, every test-set row misclassified; features chosen per test set.
Workspace handmade(const std::map<std::string, Eigen::MatrixXd>& faults) {
  Workspace ws;
  ws.num_classes = 2;
  ModelEntry m;
  m.id = "m";
  m.model_type = "x";
  m.train_features = Eigen::MatrixXd::Random(10, 2);
  m.train_logits = Eigen::MatrixXd::Zero(10, 2);
  m.train_labels = Labels(10, 0);
  for (const auto& [id, f] : faults) {
    EvalEntry e;
    e.features = f;
    e.logits = Eigen::MatrixXd::Zero(f.rows(), 2);
    e.logits.col(0).setOnes();  // predicts 0
    m.eval[id] = e;
    ws.testsets.push_back({id, "", {}, Labels(static_cast<std::size_t>(f.rows()), 1)});
  }
  ws.models.push_back(m);
  return ws;
}

Eigen::MatrixXd grid(int n) {
  Eigen::MatrixXd g(n, 2);
  for (int i = 0; i < n; ++i) g.row(i) << i % 5, i / 5;
  return g;
}

}  // namespace

TEST_CASE("band sections") {
  const Eigen::MatrixXd train = (Eigen::MatrixXd(2, 1) << 0.0, 1.0).finished();
  const auto b = fit_bands(train, 5);
  for (int s = 0; s <= 5; ++s) CHECK(b.lower_edge(0, s) == doctest::Approx(0.2 * s));
  CHECK(b.section_of(0, 0.3) == 1);
  CHECK(b.section_of(0, 1.0) == 4);
  CHECK(b.section_of(0, 0.0) == 0);
  CHECK(b.section_of(0, -0.5) == -1);
  CHECK(b.section_of(0, 1.0000001) == -1);
  CHECK(b.section_of(0, 0.2) == 1);  // edges belong to the upper section

  const auto flat = fit_bands(Eigen::MatrixXd::Constant(3, 1, 2.0), 10);
  CHECK(flat.degenerate(0));
  CHECK(flat.section_of(0, 2.0) == 0);
  CHECK(flat.section_of(0, 2.1) == -1);

  CHECK_THROWS_AS(fit_bands(train, 0), Error);
  CHECK_THROWS_AS(fit_bands(Eigen::MatrixXd::Zero(1, 3), 2), Error);
}

TEST_CASE("section edges agree with the scanning oracle on awkward ranges") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int t = 0; t < 200; ++t) {
    const double lo = u(rng), hi = lo + std::abs(u(rng)) + 1e-3;
    const int k = 1 + t % 13;
    const auto b = fit_bands((Eigen::MatrixXd(2, 1) << lo, hi).finished(), k);
    for (int s = 0; s <= k; ++s) {
      const double edge = lo + s * (hi - lo) / k;
      for (double v : {edge, std::nextafter(edge, -1e9), std::nextafter(edge, 1e9)}) {
        CHECK(b.section_of(0, v) == oracle::section(v, lo, hi, k));
      }
    }
  }
}

TEST_CASE("coverage profile") {
  const Eigen::MatrixXd train = (Eigen::MatrixXd(2, 2) << 0, 0, 1, 1).finished();
  const auto b = fit_bands(train, 5);
  const Eigen::MatrixXd eval = (Eigen::MatrixXd(2, 2) << 0.3, 0.95, 0.5, 0.5).finished();

  const FaultMask none{0, 0};
  CHECK(coverage_profile(eval, b, none).total() == 0);

  const FaultMask first{1, 0};
  const auto p = coverage_profile(eval, b, first);
  CHECK(p.sections(0) == std::vector<int>{1});
  CHECK(p.sections(1) == std::vector<int>{4});

  const FaultMask wrong{1};
  CHECK_THROWS_AS(coverage_profile(eval, b, wrong), Error);
}

TEST_CASE("coverage matches the loop oracle") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 20; ++t) {
    const Eigen::MatrixXd train = oracle::random_matrix(rng, 30, 6);
    const Eigen::MatrixXd eval = 1.3 * oracle::random_matrix(rng, 20, 6);
    std::vector<std::uint8_t> mask(20);
    for (auto& m : mask) m = rng() % 2;
    const int k = 2 + t % 9;
    const auto p = coverage_profile(eval, fit_bands(train, k), mask);
    oracle::SectionSet got;
    for (std::size_t n = 0; n < p.neurons(); ++n)
      for (int s : p.sections(n)) got.insert({static_cast<int>(n), s});
    CHECK(got == oracle::coverage(train, eval, mask, k));
  }
}

TEST_CASE("kmnc overlap") {
  const auto obj = profile_of(3, 4, {{1, 0}, {1, 1}, {2, 2}});
  const auto ref = profile_of(3, 4, {{1, 1}, {1, 3}, {2, 2}});
  CHECK(kmnc_overlap(ref, obj).value == doctest::Approx(2.0 / 3.0));
  CHECK(kmnc_overlap(obj, obj).value == 1.0);
  CHECK(kmnc_overlap(profile_of(3, 4, {{0, 0}}), obj).value == 0.0);
  CHECK_THROWS_AS(kmnc_overlap(ref, CoverageProfile(3, 4)), Error);
  CHECK_THROWS_AS(kmnc_overlap(ref, CoverageProfile(2, 4)), Error);

  auto a = ref, b = obj;
  a.run = "x";
  b.run = "y";
  CHECK_THROWS_AS(kmnc_overlap(a, b), Error);
}

TEST_CASE("combined coverage never drops below its parts") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 30; ++t) {
    auto rand_profile = [&] {
      CoverageProfile p(5, 70);  // k > 64 crosses a word boundary
      for (int i = 0; i < 40; ++i) p.cover(rng() % 5, static_cast<int>(rng() % 70));
      return p;
    };
    const auto a = rand_profile(), b = rand_profile(), o = rand_profile();
    const std::vector<CoverageProfile> both{a, b};
    const auto u = combine_profiles(both);
    CHECK(u.total() >= std::max(a.total(), b.total()));
    CHECK(kmnc_overlap(u, o).value >= std::max(kmnc_overlap(a, o).value, kmnc_overlap(b, o).value));
  }
  const std::vector<CoverageProfile> one{profile_of(2, 3, {{0, 1}}), CoverageProfile(2, 3)};
  CHECK(combine_profiles(one) == profile_of(2, 3, {{0, 1}}));
}

TEST_CASE("fault overlap and unions") {
  CHECK(fault_overlap(ids({0, 2}), ids({0, 1, 2})).value == doctest::Approx(2.0 / 3.0));
  CHECK(fault_overlap(ids({1, 4}), ids({1, 4})).value == 1.0);
  CHECK(fault_overlap(ids({3}), ids({1, 4})).value == 0.0);
  CHECK_THROWS_AS(fault_overlap(ids({1}), ids({})), Error);

  const std::vector<FaultTypeSet> u{ids({0}), ids({1})};
  CHECK(combine_profiles(u).ids == std::set<int>{0, 1});
  const std::vector<FaultTypeSet> e{ids({2, 5}), ids({})};
  CHECK(combine_profiles(e).ids == std::set<int>{2, 5});

  std::mt19937_64 rng(14);
  for (int t = 0; t < 50; ++t) {
    auto r = [&] {
      std::set<int> s;
      for (int i = 0; i < 4; ++i) s.insert(static_cast<int>(rng() % 8));
      return ids(s);
    };
    const auto a = r(), b = r(), o = r();
    const std::vector<FaultTypeSet> ab{a, b};
    CHECK(fault_overlap(combine_profiles(ab), o).value >=
          std::max(fault_overlap(a, o).value, fault_overlap(b, o).value));
    CHECK(fault_overlap(a, o).value == doctest::Approx(oracle::overlap(a.ids, o.ids)));
  }
}

TEST_CASE("pca") {
  ClusteringConfig c;
  c.reduced_dims = 2;

  SUBCASE("collinear points keep their distances on one component") {
    Eigen::MatrixXd p(5, 2);
    for (int i = 0; i < 5; ++i) p.row(i) << i * 0.3, i * 0.4 - 1;
    const auto r = reduce_dims(p, c);
    CHECK(r.col(1).cwiseAbs().maxCoeff() < 1e-9);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) CHECK(std::abs((r.row(i) - r.row(j)).norm() - (p.row(i) - p.row(j)).norm()) < 1e-9);
  }
  SUBCASE("identity reducer") {
    c.reducer = Reducer::None;
    const Eigen::MatrixXd p = Eigen::MatrixXd::Random(4, 2);
    CHECK(reduce_dims(p, c) == p);
  }
  SUBCASE("discarded variance equals the dropped eigenvalues") {
    std::mt19937_64 rng(15);
    const Eigen::MatrixXd p = oracle::random_matrix(rng, 50, 10);
    const Eigen::MatrixXd centered = p.rowwise() - p.colwise().mean();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(centered.transpose() * centered);
    const double dropped = eig.eigenvalues().head(8).sum();  // ascending order
    const auto r = reduce_dims(p, c);
    CHECK(std::abs((centered.squaredNorm() - r.squaredNorm()) - dropped) < 1e-6);
  }
  SUBCASE("rank shortfall pads with zeros and warns") {
    c.reduced_dims = 3;
    Eigen::MatrixXd p(6, 3);
    for (int i = 0; i < 6; ++i) p.row(i) << i, 2 * i, 0;
    std::vector<std::string> seen;
    auto old = set_warning_sink([&](std::string_view m) { seen.emplace_back(m); });
    const auto r = reduce_dims(p, c);
    set_warning_sink(old);
    CHECK(seen.size() == 1);
    CHECK(r.rightCols(2).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("too few rows") { CHECK_THROWS_AS(reduce_dims(Eigen::MatrixXd::Random(2, 4), c), Error); }
}

TEST_CASE("dbscan") {
  const Eigen::MatrixXd p = (Eigen::MatrixXd(5, 1) << 0, 0.1, 0.2, 5, 5.1).finished();
  CHECK(dbscan(p, 0.3, 2) == std::vector<int>{0, 0, 0, 1, 1});

  const Eigen::MatrixXd lone = (Eigen::MatrixXd(4, 1) << 0, 0.1, 0.2, 9).finished();
  CHECK(dbscan(lone, 0.3, 2).back() == -1);

  // duplicates land together
  const Eigen::MatrixXd dup = (Eigen::MatrixXd(6, 2) << 0, 0, 3, 3, 0, 0, 3, 3, 0, 0.1, 8, 8).finished();
  const auto l = dbscan(dup, 0.5, 2);
  CHECK(l[0] == l[2]);
  CHECK(l[1] == l[3]);
  CHECK(l[5] == -1);

  // ids follow the lowest member index
  const Eigen::MatrixXd order = (Eigen::MatrixXd(4, 1) << 7, 0, 7.1, 0.1).finished();
  CHECK(dbscan(order, 0.3, 2) == std::vector<int>{0, 1, 0, 1});

  // a border point reachable from two cores joins the lower-index one
  const Eigen::MatrixXd border =
      (Eigen::MatrixXd(9, 1) << 0, 0.05, 0.1, 0.15, 0.45, 0.75, 0.8, 0.85, 0.9).finished();
  const auto b = dbscan(border, 0.32, 4);
  CHECK(b[4] == b[0]);
  CHECK(b[5] != b[0]);
  CHECK(std::count(b.begin(), b.end(), -1) == 0);
}

TEST_CASE("hdbscan_lite finds separated blobs") {
  std::mt19937_64 rng(16);
  Eigen::MatrixXd p = 0.2 * oracle::random_matrix(rng, 60, 2);
  p.block(20, 0, 20, 1).array() += 6.0;
  p.block(40, 1, 20, 1).array() += 6.0;
  const auto l = hdbscan_lite(p, 5);
  std::set<int> found;
  for (int blob = 0; blob < 3; ++blob) {
    std::set<int> in(l.begin() + blob * 20, l.begin() + blob * 20 + 20);
    in.erase(-1);
    CHECK(in.size() == 1);
    found.insert(in.begin(), in.end());
  }
  CHECK(found.size() == 3);
}

TEST_CASE("silhouette") {
  const Eigen::MatrixXd p = (Eigen::MatrixXd(4, 1) << 0, 0.1, 10, 10.1).finished();
  const std::vector<int> l{0, 0, 1, 1};
  CHECK(silhouette_score(p, l) == doctest::Approx(0.990).epsilon(1e-3));

  const std::vector<int> one{0, 0, 0, -1};
  CHECK_THROWS_AS(silhouette_score(p, one), Error);

  const Eigen::MatrixXd same = Eigen::MatrixXd::Zero(4, 2);
  const std::vector<int> mixed{0, 1, 0, 1};
  CHECK(silhouette_score(same, mixed) == doctest::Approx(0.0));
}

TEST_CASE("fault types on a handmade fault space") {
  Eigen::MatrixXd far(1, 2);
  far << 100, 100;
  const auto ws = handmade({{"A", grid(10)}, {"B", grid(10)}, {"C", far}});
  ClusteringConfig c;
  c.reducer = Reducer::None;
  c.min_pts = 3;

  SUBCASE("fault space shape") {
    const std::vector<std::string> ts{"A", "B"};
    const auto s = build_fault_space(ws, "m", ts, c);
    CHECK(s.matrix.rows() == 20);
    CHECK(s.matrix.cols() == 4);
    CHECK(s.provenance[10].testset == "B");
    CHECK(s.matrix.leftCols(2).colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("shared blob, isolated noise") {
    const std::vector<std::string> ts{"A", "B", "C"};
    const auto prof = fault_type_profiles(ws, "m", ts, c);
    CHECK(prof.sets.at("A").ids == std::set<int>{0});
    CHECK(prof.sets.at("B").ids == std::set<int>{0});
    CHECK(prof.sets.at("C").ids.empty());
    CHECK(prof.n_clusters == 1);
    CHECK_FALSE(prof.silhouette.has_value());
    std::set<int> all, labelled;
    for (const auto& [id, s] : prof.sets) all.insert(s.ids.begin(), s.ids.end());
    for (int l : prof.labels)
      if (l >= 0) labelled.insert(l);
    CHECK(all == labelled);
    CHECK(prof.counts.at("A") == std::vector<std::size_t>{10});
  }
  SUBCASE("no faults") {
    auto clean = ws;
    clean.models[0].eval["A"].logits.col(1).setConstant(2.0);
    const std::vector<std::string> ts{"A"};
    try {
      build_fault_space(clean, "m", ts, c);
      FAIL("expected NoFaults");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoFaults);
    }
  }
  SUBCASE("config validation") {
    c.min_pts = 1;
    const std::vector<std::string> ts{"A"};
    CHECK_THROWS_AS(fault_type_profiles(ws, "m", ts, c), Error);
  }
}

TEST_CASE("clustering config hash tracks every field") {
  ClusteringConfig a, b;
  CHECK(a.hash() == b.hash());
  b.label_feature_scale = 2.0;
  CHECK(a.hash() != b.hash());
  b = a;
  b.standardize_after_filter = false;
  CHECK(a.hash() != b.hash());
}
