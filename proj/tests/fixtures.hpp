#pragma once

#include "gist/synth.hpp"

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

namespace fixture {

// Scratch directory removed on scope exit.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("gist_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

// 2 types x 2 seeds, small enough for per-test generation.
inline gist::SynthConfig tiny_config(std::uint64_t seed = 0) {
  gist::SynthConfig c;
  c.n_types = 2;
  c.seeds_per_type = 2;
  c.feature_dim = 12;
  c.n_train = 120;
  c.n_test_per_set = 40;
  c.n_classes = 3;
  c.rng_seed = seed;
  return c;
}

}  // namespace fixture
