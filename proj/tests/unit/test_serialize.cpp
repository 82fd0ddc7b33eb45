#include <doctest.h>

#include "../fixtures.hpp"
#include "gist/serialize.hpp"

#include <fstream>

using namespace gist;

namespace {

std::vector<std::string> lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("offline report outputs") {
  fixture::TempDir dir("ser");
  const auto ws = build_benchmark(SynthConfig{});
  const std::vector<Metric> m{Metric::Pwcca, Metric::Dis};
  const auto r = offline_validate(ws, m, {}, 1);

  const auto j = to_json(r);
  CHECK(j["status"] == "selected");
  CHECK(j["chosen_proxy"] == "pwcca");
  CHECK(j["objectives"].size() == 24);
  CHECK(j["summary"].size() == 2);
  CHECK(j["config"]["k"] == 10);
  CHECK(j["objectives"][0]["stat"].contains("tau"));

  write_offline_csv(dir.path / "o.csv", r);
  const auto o = lines(dir.path / "o.csv");
  CHECK(o.front() == "metric,objective,mut_type,seed,n,tau,p,method,error");
  CHECK(o.size() == 25);

  write_summary_csv(dir.path / "s.csv", r);
  const auto s = lines(dir.path / "s.csv");
  CHECK(s.front() == "metric,n,median_tau,q1,q3,frac_p05,frac_p10,mean_rank,verdict");
  CHECK(s.size() == 3);

  write_json(dir.path / "nested/r.json", j);
  std::ifstream in(dir.path / "nested/r.json");
  CHECK(nlohmann::json::parse(in) == j);
}

TEST_CASE("plan, eval, heatmap and dendrogram json") {
  fixture::TempDir dir("ser");
  const auto ws = build_benchmark(SynthConfig{});
  SimilarityEngine e(ws);

  const auto plan = online_select(ws, e, "t0s0", Metric::Pwcca, Strategy::parse("obf:2"));
  const auto pj = to_json(plan);
  CHECK(pj["strategy"] == "obf:2");
  CHECK(pj["chosen"].size() == 2);
  CHECK(pj["similarity"].size() == 9);
  const auto rnd = to_json(online_select(ws, e, "t0s0", Metric::Pwcca, Strategy::parse("random:2:4:1")));
  CHECK(rnd["chosen"].size() == 4);

  const auto ej = to_json(top_k_eval(ws, e, "t0s0", Metric::Pwcca));
  CHECK(ej["beat_fractions"].size() == 5);

  const auto h = rank_heatmap(ws, similarity_pairs(ws, e, Metric::Cka), Orientation::DistanceUp);
  write_heatmap_csv(dir.path / "h.csv", h);
  const auto hl = lines(dir.path / "h.csv");
  CHECK(hl.size() == 5);
  CHECK(hl[0] == "objective_type,type0,type1,type2,type3");
  CHECK(to_json(h)["types"].size() == 4);

  const std::vector<std::string> labels{"a", "b", "c"};
  const std::vector<std::vector<double>> v{{0, 0}, {0, 3}, {4, 0}};
  const auto dj = to_json(dendrogram(labels, v));
  CHECK(dj["leaves"].size() == 3);
  CHECK(dj["merges"].size() == 2);
}
