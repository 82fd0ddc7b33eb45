#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace gist {

enum class DType : std::uint8_t { F32 = 0x00, I64 = 0x01 };

// GMX1 layout: "GMX1" | version u8 | dtype u8 | rows u32le | cols u32le | payload (row-major, LE).
inline constexpr std::size_t kGmxHeaderBytes = 14;
inline constexpr std::uint8_t kGmxVersion = 0x01;

/// Dense row-major matrix exactly as stored on disk. Only the vector that
/// matches `dtype` is populated.
struct MatrixFile {
  DType dtype = DType::F32;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> f32;
  std::vector<std::int64_t> i64;

  static MatrixFile from_real(const Eigen::MatrixXd& m);
  static MatrixFile from_labels(std::span<const std::int64_t> labels);

  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
  Eigen::MatrixXd to_real() const;
  // Requires a single row or column; f32 payloads must hold integral values.
  std::vector<std::int64_t> to_labels() const;

  bool operator==(const MatrixFile&) const = default;
};

/// Reads GMX1, or CSV when the extension is ".csv" (CSV always yields f32).
MatrixFile read_matrix(const std::filesystem::path& path);

/// Writes GMX1, or CSV when the extension is ".csv".
void write_matrix(const std::filesystem::path& path, const MatrixFile& matrix);

}  // namespace gist
