#include <doctest.h>

#include "../fixtures.hpp"
#include "gist/matrix_io.hpp"
#include "gist/workspace.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

using namespace gist;
using nlohmann::json;

namespace {

json read_manifest(const std::filesystem::path& root) {
  std::ifstream in(root / "manifest.json");
  return json::parse(in);
}

void write_manifest(const std::filesystem::path& root, const json& j) {
  std::ofstream(root / "manifest.json", std::ios::trunc) << j.dump(1);
}

std::vector<ErrorCode> load_codes(const std::filesystem::path& root) {
  try {
    load_workspace(root);
  } catch (const WorkspaceError& e) {
    std::vector<ErrorCode> out;
    for (const auto& i : e.issues()) out.push_back(i.code);
    return out;
  }
  return {};
}

}  // namespace

TEST_CASE("predictions take the first maximum") {
  CHECK(predictions_of((Eigen::MatrixXd(1, 2) << 0.1, 0.9).finished()) == Labels{1});
  CHECK(predictions_of((Eigen::MatrixXd(1, 2) << 0.5, 0.5).finished()) == Labels{0});
  CHECK(predictions_of((Eigen::MatrixXd(2, 3) << 3, 1, 2, 0, 0, 5).finished()) == Labels{0, 2});
}

TEST_CASE("fault mask marks mispredictions") {
  const Labels a{1, 2}, b{1, 2}, c{0, 1}, d{1, 1};
  CHECK(fault_mask(a, b) == FaultMask{0, 0});
  CHECK(fault_mask(c, d) == FaultMask{1, 0});
  const Labels p(5, 0), y(5, 1);
  CHECK(fault_mask(p, y) == FaultMask(5, 1));
  CHECK_THROWS_AS(fault_mask(a, p), Error);
}

TEST_CASE("synthetic workspace round-trips through disk with zero issues") {
  fixture::TempDir dir("ws");
  const auto built = build_benchmark(fixture::tiny_config());
  CHECK(check_workspace(built).empty());
  write_workspace(built, dir.path);
  const auto ws = load_workspace(dir.path);
  REQUIRE(ws.models.size() == 4);
  CHECK(ws.testsets.size() == 4);
  CHECK(ws.models[0].train_features == built.models[0].train_features);
  CHECK(ws.testsets[1].labels == built.testsets[1].labels);
  CHECK(ws.owned_testset("t1s0")->id == "T_t1s0");
  CHECK(ws.has_model("t0s1"));
  CHECK_FALSE(ws.has_model("nope"));
  CHECK_THROWS_AS(ws.model("nope"), Error);
  CHECK(ws.train_rows() == 120);
  CHECK_FALSE(ws.fingerprint.empty());
}

TEST_CASE("manifest list order does not matter") {
  fixture::TempDir a("ws"), b("ws");
  const auto built = build_benchmark(fixture::tiny_config());
  write_workspace(built, a.path);
  write_workspace(built, b.path);
  auto j = read_manifest(b.path);
  std::reverse(j["models"].begin(), j["models"].end());
  std::reverse(j["testsets"].begin(), j["testsets"].end());
  write_manifest(b.path, j);
  const auto wa = load_workspace(a.path);
  const auto wb = load_workspace(b.path);
  REQUIRE(wa.models.size() == wb.models.size());
  for (std::size_t i = 0; i < wa.models.size(); ++i) {
    CHECK(wa.models[i].id == wb.models[i].id);
    CHECK(wa.models[i].train_features == wb.models[i].train_features);
  }
  for (std::size_t i = 0; i < wa.testsets.size(); ++i) CHECK(wa.testsets[i].id == wb.testsets[i].id);
}

TEST_CASE("load errors") {
  fixture::TempDir dir("ws");
  write_workspace(build_benchmark(fixture::tiny_config()), dir.path);

  SUBCASE("missing root is an I/O error") {
    try {
      load_workspace(dir.path / "nowhere");
      FAIL("loaded");
    } catch (const WorkspaceError&) {
      FAIL("expected a plain I/O error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::IoError);
    }
  }
  SUBCASE("absent manifest") {
    std::filesystem::remove(dir.path / "manifest.json");
    CHECK(load_codes(dir.path) == std::vector{ErrorCode::MissingArtifact});
  }
  SUBCASE("broken json") {
    std::ofstream(dir.path / "manifest.json", std::ios::trunc) << "{\"models\": [";
    CHECK(load_codes(dir.path) == std::vector{ErrorCode::ManifestParseError});
  }
  SUBCASE("missing key") {
    auto j = read_manifest(dir.path);
    j["models"][0].erase("seed");
    write_manifest(dir.path, j);
    CHECK(load_codes(dir.path) == std::vector{ErrorCode::ManifestParseError});
  }
  SUBCASE("absent files are all reported") {
    std::filesystem::remove(dir.path / "models/t0s0/train_features.gmx");
    std::filesystem::remove(dir.path / "testsets/T_t1s1.labels.gmx");
    const auto codes = load_codes(dir.path);
    CHECK(codes.size() == 2);
    CHECK(std::all_of(codes.begin(), codes.end(), [](ErrorCode c) { return c == ErrorCode::MissingArtifact; }));
  }
  SUBCASE("eval rows must match test set labels") {
    write_matrix(dir.path / "testsets/T_t0s0.labels.gmx", MatrixFile::from_labels(Labels(7, 0)));
    const auto codes = load_codes(dir.path);
    REQUIRE_FALSE(codes.empty());
    CHECK(std::find(codes.begin(), codes.end(), ErrorCode::ShapeMismatch) != codes.end());
  }
  SUBCASE("corrupt matrix surfaces its format error") {
    std::ofstream(dir.path / "models/t0s1/train_logits.gmx", std::ios::trunc) << "nonsense!!!!!!!!";
    CHECK(load_codes(dir.path) == std::vector{ErrorCode::BadMagic});
  }
}

TEST_CASE("train accuracy helper always reads the logits") {
  auto ws = build_benchmark(fixture::tiny_config());
  auto& m = ws.models[0];
  const double computed = train_accuracy_of(m);
  CHECK(computed >= 0.0);
  CHECK(computed <= 1.0);
  m.train_accuracy = 0.25;
  CHECK(train_accuracy_of(m) == doctest::Approx(computed));
}
