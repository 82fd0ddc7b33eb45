#include <doctest.h>

#include "../fixtures.hpp"
#include "../oracles.hpp"
#include "gist/similarity.hpp"

#include <cmath>
#include <fstream>

using namespace gist;

namespace {

PreprocessedFeatures prep(const Eigen::MatrixXd& m) { return preprocess_features(m); }

Eigen::MatrixXd random_orthogonal(std::mt19937_64& rng, int d) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(oracle::random_matrix(rng, d, d));
  return qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
}

}  // namespace

TEST_CASE("preprocessing centers and normalizes") {
  const auto p = prep((Eigen::MatrixXd(2, 1) << 1, 3).finished());
  CHECK(p.matrix(0, 0) == doctest::Approx(-std::sqrt(0.5)).epsilon(1e-12));
  CHECK(p.matrix(1, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK_THROWS_AS(prep((Eigen::MatrixXd(2, 1) << 2, 2).finished()), Error);

  std::mt19937_64 rng(1);
  const auto q = prep(oracle::random_matrix(rng, 10, 4));
  CHECK(q.matrix.colwise().mean().cwiseAbs().maxCoeff() < 1e-9);
  CHECK(std::abs(q.matrix.norm() - 1.0) < 1e-9);
}

TEST_CASE("pwcca") {
  std::mt19937_64 rng(2);
  const auto x = prep(oracle::random_matrix(rng, 30, 4));
  CHECK(pwcca(x, x).value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(pwcca(x, x).orientation == Orientation::SimilarityUp);

  const auto a = prep((Eigen::MatrixXd(3, 1) << 1, 0, -1).finished());
  const auto b = prep((Eigen::MatrixXd(3, 1) << 2, 0, -2).finished());
  CHECK(pwcca(a, b).value == doctest::Approx(1.0).epsilon(1e-9));

  for (int trial = 0; trial < 10; ++trial) {
    const auto m1 = oracle::center_normalize(oracle::random_matrix(rng, 8, 2));
    const auto m2 = oracle::center_normalize(oracle::random_matrix(rng, 8, 3));
    CHECK(std::abs(pwcca(prep(m1), prep(m2)).value - oracle::pwcca(m1, m2)) < 1e-6);
    CHECK(std::abs(pwcca(prep(m1), prep(m2), PwccaDirection::Forward).value - oracle::pwcca_one_side(m1, m2)) < 1e-6);
  }

  const auto rows5 = prep(oracle::random_matrix(rng, 5, 2));
  CHECK_THROWS_AS(pwcca(x, rows5), Error);

  // duplicated column: singular covariance, absorbed by the ridge
  Eigen::MatrixXd dup = oracle::random_matrix(rng, 30, 3);
  dup.col(2) = dup.col(1);
  const double v = pwcca(x, prep(dup)).value;
  CHECK(std::isfinite(v));
  CHECK(v >= 0.0);
  CHECK(v <= 1.0);
}

TEST_CASE("forward pwcca ignores invertible maps of its second argument") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd x = oracle::random_matrix(rng, 40, 5);
  const Eigen::MatrixXd y = oracle::random_matrix(rng, 40, 4);
  const Eigen::MatrixXd a = oracle::random_matrix(rng, 4, 4) + 3.0 * Eigen::MatrixXd::Identity(4, 4);
  const double before = pwcca(prep(x), prep(y), PwccaDirection::Forward).value;
  const double after = pwcca(prep(x), prep(y * a), PwccaDirection::Forward).value;
  CHECK(std::abs(before - after) < 1e-6);
}

TEST_CASE("cka") {
  std::mt19937_64 rng(4);
  const auto x = prep(oracle::random_matrix(rng, 20, 3));
  CHECK(std::abs(cka_linear(x, x).value) < 1e-9);

  const auto a = prep((Eigen::MatrixXd(4, 1) << 1, -1, 1, -1).finished());
  const auto b = prep((Eigen::MatrixXd(4, 1) << 1, 1, -1, -1).finished());
  CHECK(cka_linear(a, b).value == doctest::Approx(1.0));

  for (int trial = 0; trial < 10; ++trial) {
    const auto m1 = oracle::center_normalize(oracle::random_matrix(rng, 6, 2));
    const auto m2 = oracle::center_normalize(oracle::random_matrix(rng, 6, 2));
    CHECK(std::abs(cka_linear(prep(m1), prep(m2)).value - oracle::cka_distance(m1, m2)) < 1e-9);
  }
}

TEST_CASE("orthogonal procrustes") {
  std::mt19937_64 rng(5);
  const auto x = prep(oracle::random_matrix(rng, 20, 4));
  CHECK(std::abs(procrustes_ortho(x, x).value) < 1e-9);

  const auto a = prep((Eigen::MatrixXd(4, 1) << 1, -1, 1, -1).finished());
  const auto b = prep((Eigen::MatrixXd(4, 1) << 1, 1, -1, -1).finished());
  CHECK(procrustes_ortho(a, b).value == doctest::Approx(2.0));

  const Eigen::MatrixXd q = random_orthogonal(rng, 4);
  PreprocessedFeatures rotated{x.matrix * q, ""};
  CHECK(std::abs(procrustes_ortho(x, rotated).value) < 1e-6);
}

TEST_CASE("accuracy difference") {
  CHECK(acc_diff(0.9049, 0.8996).value == doctest::Approx(0.0053).epsilon(1e-9));
  CHECK(acc_diff(0.7, 0.7).value == 0.0);
  CHECK(acc_diff(0.8, 0.6).value == doctest::Approx(0.2));
  CHECK_THROWS_AS(acc_diff(1.2, 0.5), Error);
}

TEST_CASE("disagreement") {
  const Labels a{0, 1, 1, 0}, b{0, 1, 0, 1}, c{1, 0, 0, 1};
  CHECK(disagreement(a, a).value == 0.0);
  CHECK(disagreement(a, c).value == 1.0);
  CHECK(disagreement(a, b).value == 0.5);
  const Labels shorter{0, 1};
  CHECK_THROWS_AS(disagreement(a, shorter), Error);
}

TEST_CASE("jensen-style divergence") {
  const Eigen::MatrixXd p = (Eigen::MatrixXd(1, 2) << 0.9, 0.1).finished();
  const Eigen::MatrixXd q = (Eigen::MatrixXd(1, 2) << 0.1, 0.9).finished();
  CHECK(j_divergence(p, q, LogitKind::Probabilities).value == doctest::Approx(0.8 * std::log(9.0)).epsilon(1e-4));
  CHECK(std::abs(j_divergence(p, p, LogitKind::Probabilities).value) < 1e-9);

  const Eigen::MatrixXd delta = (Eigen::MatrixXd(1, 3) << 1, 0, 0).finished();
  const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(1, 3, 1.0 / 3);
  const double v = j_divergence(delta, flat, LogitKind::Probabilities).value;
  CHECK(std::isfinite(v));
  CHECK(v > 0.0);

  // raw logits go through softmax: a constant shift changes nothing
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd l = oracle::random_matrix(rng, 10, 4);
  CHECK(std::abs(j_divergence(l, l.array() + 5.0, LogitKind::Raw).value) < 1e-12);
  CHECK_THROWS_AS(j_divergence(l, l.leftCols(3), LogitKind::Raw), Error);
}

TEST_CASE("probabilities are floored and row-stochastic") {
  const Eigen::MatrixXd p = to_probabilities((Eigen::MatrixXd(2, 3) << 1, 0, 0, 100, -100, 0).finished(),
                                             LogitKind::Probabilities);
  for (int r = 0; r < 2; ++r) CHECK(p.row(r).sum() == doctest::Approx(1.0));
  CHECK(p.minCoeff() > 0.0);
}

TEST_CASE("engine") {
  const auto ws = build_benchmark(fixture::tiny_config());
  SimilarityEngine engine(ws);
  const std::vector<std::string> cands{"t0s1", "t1s0", "t1s1"};

  SUBCASE("pairwise keeps candidate order") {
    const auto s = engine.pairwise(Metric::Cka, "t0s0", cands);
    REQUIRE(s.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(s[i].model_b == cands[i]);
      const double direct =
          cka_linear(preprocess_features(ws.model("t0s0").train_features), preprocess_features(ws.model(cands[i]).train_features))
              .value;
      CHECK(std::abs(s[i].value - direct) < 1e-12);
    }
  }
  SUBCASE("self comparison") {
    const std::vector<std::string> self{"t0s0"};
    CHECK_THROWS_AS(engine.pairwise(Metric::Pwcca, "t0s0", self), Error);
    CHECK_THROWS_AS(engine.score(Metric::Dis, "t1s1", "t1s1"), Error);
  }
  SUBCASE("symmetric metrics share a cache entry") {
    engine.score(Metric::Ortho, "t0s0", "t1s0");
    const auto n = engine.cache_size();
    engine.score(Metric::Ortho, "t1s0", "t0s0");
    CHECK(engine.cache_size() == n);
  }
  SUBCASE("unknown model") { CHECK_THROWS_AS(engine.score(Metric::Acc, "t0s0", "zz"), Error); }
  SUBCASE("within-type models are closer under pwcca") {
    CHECK(engine.score(Metric::Pwcca, "t0s0", "t0s1").value > engine.score(Metric::Pwcca, "t0s0", "t1s0").value);
  }
}

TEST_CASE("disk cache is reused across engines") {
  fixture::TempDir dir("cache");
  const auto ws = build_benchmark(fixture::tiny_config());
  double first = 0;
  {
    SimilarityEngine e(ws, {}, dir.path);
    first = e.score(Metric::Jdiv, "t0s0", "t1s1").value;
  }
  SimilarityEngine again(ws, {}, dir.path);
  CHECK(again.cache_size() == 1);
  CHECK(again.score(Metric::Jdiv, "t1s1", "t0s0").value == first);
}

TEST_CASE("scores csv") {
  fixture::TempDir dir("csv");
  const auto ws = build_benchmark(fixture::tiny_config());
  const std::vector<std::string> cands{"t0s1", "t1s0"};
  const auto s = pairwise_similarity(ws, Metric::Dis, "t0s0", cands);
  write_scores_csv(dir.path / "s.csv", s);
  std::ifstream in(dir.path / "s.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "metric,model_a,model_b,value,orientation");
}
