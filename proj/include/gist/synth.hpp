#pragma once

#include <json.hpp>

#include "gist/workspace.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gist {

struct SynthConfig {
  int n_types = 4;
  int seeds_per_type = 3;
  int feature_dim = 32;
  int n_train = 1000;
  int n_test_per_set = 200;
  int n_classes = 4;
  double type_basis_strength = 1.0;  // 0: every model exchangeable
  double seed_noise = 1.0;
  double fault_rate = 0.3;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Ground truth of a synthetic plant.
struct PlantDescription {
  std::vector<std::string> types;
  std::vector<std::vector<double>> type_proximity;  // |angle difference| between type positions
  std::vector<std::string> model_ids;
  std::vector<double> model_angles;
  std::map<std::string, int> fault_direction;       // test set id -> index of origin type
  std::string planted_metric = "pwcca";
};

PlantDescription plant_description(const SynthConfig& config);
nlohmann::json to_json(const PlantDescription& p);

/// In-memory workspace with relative matrix paths filled in; `root` is left empty.
Workspace build_benchmark(const SynthConfig& config);

/// Writes the workspace plus plant.json under out_dir and returns it loaded back.
Workspace generate_benchmark(const SynthConfig& config, const std::filesystem::path& out_dir);

std::string synth_model_id(int type, int seed);
std::string synth_testset_id(int type, int seed);

}  // namespace gist
