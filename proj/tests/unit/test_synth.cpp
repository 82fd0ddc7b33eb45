#include <doctest.h>

#include "../fixtures.hpp"
#include "gist/similarity.hpp"
#include "gist/synth.hpp"

#include <fstream>

using namespace gist;

TEST_CASE("config validation") {
  auto bad = [](auto edit) {
    SynthConfig c;
    edit(c);
    CHECK_THROWS_AS(c.validate(), Error);
  };
  bad([](SynthConfig& c) { c.n_types = 1; });
  bad([](SynthConfig& c) { c.seeds_per_type = 1; });
  bad([](SynthConfig& c) { c.type_basis_strength = 1.5; });
  bad([](SynthConfig& c) { c.fault_rate = 0.0; });
  bad([](SynthConfig& c) { c.n_train = 10; });
  bad([](SynthConfig& c) { c.feature_dim = 4; });
  bad([](SynthConfig& c) { c.n_test_per_set = 10; });
  CHECK_NOTHROW(SynthConfig{}.validate());
}

TEST_CASE("build is deterministic and stores f32 values") {
  const auto a = build_benchmark(fixture::tiny_config(5));
  const auto b = build_benchmark(fixture::tiny_config(5));
  const auto c = build_benchmark(fixture::tiny_config(6));
  CHECK(a.models[2].eval.at("T_t0s1").features == b.models[2].eval.at("T_t0s1").features);
  CHECK(a.models[2].train_features != c.models[2].train_features);
  const auto& f = a.models[0].train_features;
  CHECK(f == f.cast<float>().cast<double>());
  CHECK(check_workspace(a).empty());
}

TEST_CASE("ids, types and the evaluation grid") {
  const auto ws = build_benchmark(SynthConfig{});
  CHECK(ws.models.size() == 12);
  CHECK(ws.testsets.size() == 12);
  for (const auto& m : ws.models) {
    CHECK(m.eval.size() == 12);
    CHECK(ws.owned_testset(m.id));
  }
  CHECK(ws.model("t3s2").model_type == "type3");
  CHECK(ws.testset("T_t2s0").origin_model == "t2s0");
}

TEST_CASE("planted geometry") {
  const auto ws = build_benchmark(SynthConfig{});
  SimilarityEngine e(ws);
  // same type beats every other type for the planted metric
  for (const auto& a : ws.models) {
    double worst_same = 2, best_other = -1;
    for (const auto& b : ws.models) {
      if (a.id == b.id) continue;
      const double v = e.score(Metric::Pwcca, a.id, b.id).value;
      if (a.model_type == b.model_type) worst_same = std::min(worst_same, v);
      else best_other = std::max(best_other, v);
    }
    CHECK(worst_same > best_other);
  }
  // every generated set induces faults
  for (const auto& m : ws.models) {
    const auto mask = fault_mask_of(ws, m, ws.owned_testset(m.id)->id);
    CHECK(std::count(mask.begin(), mask.end(), 1) >= 60);
  }
}

TEST_CASE("plant description") {
  SynthConfig c;
  const auto p = plant_description(c);
  CHECK(p.types.size() == 4);
  CHECK(p.model_ids.size() == 12);
  CHECK(p.type_proximity[0][0] == 0.0);
  CHECK(p.type_proximity[0][3] > p.type_proximity[0][1]);
  CHECK(p.type_proximity[1][3] == doctest::Approx(p.type_proximity[3][1]));
  CHECK(p.fault_direction.at("T_t2s1") == 2);
  CHECK(to_json(p)["planted_metric"] == "pwcca");

  c.type_basis_strength = 0.0;
  const auto flat = plant_description(c);
  CHECK(flat.type_proximity[0][3] == 0.0);
  for (double a : flat.model_angles) CHECK(a == 0.0);
}

TEST_CASE("generate writes a loadable workspace and plant.json") {
  fixture::TempDir dir("synth");
  const auto ws = generate_benchmark(fixture::tiny_config(), dir.path / "ws");
  CHECK(ws.models.size() == 4);
  CHECK(std::filesystem::exists(dir.path / "ws/plant.json"));
  CHECK(std::filesystem::exists(dir.path / "ws/models/t0s0/eval/T_t1s1.features.gmx"));
  std::ifstream in(dir.path / "ws/plant.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j["models"].size() == 4);
}
