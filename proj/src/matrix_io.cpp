#include "gist/matrix_io.hpp"

#include "gist/error.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

namespace gist {
namespace {

constexpr std::array<std::uint8_t, 4> kMagic{0x47, 0x4D, 0x58, 0x31};

bool is_csv(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".csv";
}

std::string where(const std::filesystem::path& path, std::size_t offset) {
  return path.string() + " at byte offset " + std::to_string(offset);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void check_invariants(const MatrixFile& m) {
  if (m.rows < 1 || m.cols < 1) {
    throw Error(ErrorCode::InvalidArgument,
                "matrix must have at least one row and one column (got " + std::to_string(m.rows) +
                    "x" + std::to_string(m.cols) + ")");
  }
  const std::size_t n = m.size();
  const std::size_t have = m.dtype == DType::F32 ? m.f32.size() : m.i64.size();
  if (have != n) {
    throw Error(ErrorCode::InvalidArgument, "payload holds " + std::to_string(have) +
                                                " values, shape needs " + std::to_string(n));
  }
  if (m.dtype == DType::F32) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(m.f32[i])) {
        throw Error(ErrorCode::NonFiniteValue, "value index " + std::to_string(i) + " is not finite");
      }
    }
  }
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

MatrixFile parse_gmx(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kGmxHeaderBytes) {
    if (bytes.size() >= 4 && std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
      throw Error(ErrorCode::TruncatedPayload, "header cut short in " + where(path, bytes.size()));
    }
    throw Error(ErrorCode::BadMagic, "not a GMX1 file: " + where(path, 0));
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw Error(ErrorCode::BadMagic, "expected \"GMX1\" in " + where(path, 0));
  }
  if (bytes[4] != kGmxVersion) {
    throw Error(ErrorCode::BadMagic, "unsupported version " + std::to_string(bytes[4]) + " in " + where(path, 4));
  }
  if (bytes[5] > 0x01) {
    throw Error(ErrorCode::BadMagic, "unknown dtype " + std::to_string(bytes[5]) + " in " + where(path, 5));
  }
  MatrixFile m;
  m.dtype = static_cast<DType>(bytes[5]);
  m.rows = get_u32(bytes.data() + 6);
  m.cols = get_u32(bytes.data() + 10);
  if (m.rows < 1 || m.cols < 1) {
    throw Error(ErrorCode::FormatError, "zero dimension in header of " + where(path, 6));
  }
  const std::size_t elem = m.dtype == DType::F32 ? 4 : 8;
  const std::size_t need = m.size() * elem;
  const std::size_t have = bytes.size() - kGmxHeaderBytes;
  if (have < need) {
    throw Error(ErrorCode::TruncatedPayload, "payload needs " + std::to_string(need) + " bytes, found " +
                                                 std::to_string(have) + "; file ends at " +
                                                 where(path, bytes.size()));
  }
  if (have > need) {
    throw Error(ErrorCode::FormatError, "trailing bytes after payload in " + where(path, kGmxHeaderBytes + need));
  }
  const std::uint8_t* p = bytes.data() + kGmxHeaderBytes;
  if (m.dtype == DType::F32) {
    m.f32.resize(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
      m.f32[i] = std::bit_cast<float>(get_u32(p + 4 * i));
      if (!std::isfinite(m.f32[i])) {
        throw Error(ErrorCode::NonFiniteValue, "non-finite f32 in " + where(path, kGmxHeaderBytes + 4 * i));
      }
    }
  } else {
    m.i64.resize(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) m.i64[i] = static_cast<std::int64_t>(get_u64(p + 8 * i));
  }
  return m;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// RFC-4180 field splitting; quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

MatrixFile parse_csv(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  const std::string text(bytes.begin(), bytes.end());
  MatrixFile m;
  m.dtype = DType::F32;
  std::size_t offset = 0;
  std::size_t line_start = 0;
  while (line_start < text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string::npos) line_end = text.size();
    const std::string_view line(text.data() + line_start, line_end - line_start);
    offset = line_start;
    line_start = line_end + 1;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (m.rows == 0) {
      m.cols = static_cast<std::uint32_t>(fields.size());
    } else if (fields.size() != m.cols) {
      throw Error(ErrorCode::FormatError, "row " + std::to_string(m.rows) + " has " + std::to_string(fields.size()) +
                                              " fields, expected " + std::to_string(m.cols) + " in " +
                                              where(path, offset));
    }
    for (const auto& f : fields) {
      const auto v = trim(f);
      double value = 0.0;
      const auto res = std::from_chars(v.data(), v.data() + v.size(), value);
      if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw Error(ErrorCode::FormatError, "cannot parse \"" + std::string(v) + "\" in " + where(path, offset));
      }
      const auto as_float = static_cast<float>(value);
      if (!std::isfinite(as_float)) {
        throw Error(ErrorCode::NonFiniteValue, "non-finite value in " + where(path, offset));
      }
      m.f32.push_back(as_float);
    }
    ++m.rows;
  }
  if (m.rows == 0) throw Error(ErrorCode::TruncatedPayload, "empty CSV " + where(path, 0));
  return m;
}

}  // namespace

MatrixFile MatrixFile::from_real(const Eigen::MatrixXd& mat) {
  MatrixFile m;
  m.dtype = DType::F32;
  m.rows = static_cast<std::uint32_t>(mat.rows());
  m.cols = static_cast<std::uint32_t>(mat.cols());
  m.f32.resize(m.size());
  for (Eigen::Index r = 0; r < mat.rows(); ++r) {
    for (Eigen::Index c = 0; c < mat.cols(); ++c) m.f32[r * mat.cols() + c] = static_cast<float>(mat(r, c));
  }
  return m;
}

MatrixFile MatrixFile::from_labels(std::span<const std::int64_t> labels) {
  MatrixFile m;
  m.dtype = DType::I64;
  m.rows = static_cast<std::uint32_t>(labels.size());
  m.cols = 1;
  m.i64.assign(labels.begin(), labels.end());
  return m;
}

Eigen::MatrixXd MatrixFile::to_real() const {
  Eigen::MatrixXd out(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * cols + c;
      out(r, c) = dtype == DType::F32 ? static_cast<double>(f32[i]) : static_cast<double>(i64[i]);
    }
  }
  return out;
}

std::vector<std::int64_t> MatrixFile::to_labels() const {
  if (rows != 1 && cols != 1) {
    throw Error(ErrorCode::ShapeMismatch, "label vector must be n x 1 or 1 x n, got " + std::to_string(rows) + "x" +
                                              std::to_string(cols));
  }
  if (dtype == DType::I64) return i64;
  std::vector<std::int64_t> out(f32.size());
  for (std::size_t i = 0; i < f32.size(); ++i) {
    const float v = f32[i];
    if (std::floor(v) != v) {
      throw Error(ErrorCode::FormatError, "label value " + std::to_string(v) + " is not integral");
    }
    out[i] = static_cast<std::int64_t>(v);
  }
  return out;
}

MatrixFile read_matrix(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() >= 4 && std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) return parse_gmx(path, bytes);
  if (is_csv(path)) return parse_csv(path, bytes);
  return parse_gmx(path, bytes);
}

void write_matrix(const std::filesystem::path& path, const MatrixFile& m) {
  check_invariants(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");

  if (is_csv(path)) {
    std::string text;
    char buf[64];
    for (std::uint32_t r = 0; r < m.rows; ++r) {
      for (std::uint32_t c = 0; c < m.cols; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * m.cols + c;
        const auto res = m.dtype == DType::F32 ? std::to_chars(buf, buf + sizeof buf, m.f32[i])
                                               : std::to_chars(buf, buf + sizeof buf, m.i64[i]);
        if (c > 0) text.push_back(',');
        text.append(buf, res.ptr);
      }
      text.push_back('\n');
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
  } else {
    std::vector<std::uint8_t> bytes(kMagic.begin(), kMagic.end());
    bytes.push_back(kGmxVersion);
    bytes.push_back(static_cast<std::uint8_t>(m.dtype));
    put_u32(bytes, m.rows);
    put_u32(bytes, m.cols);
    bytes.reserve(kGmxHeaderBytes + m.size() * (m.dtype == DType::F32 ? 4 : 8));
    if (m.dtype == DType::F32) {
      for (const float v : m.f32) put_u32(bytes, std::bit_cast<std::uint32_t>(v));
    } else {
      for (const std::int64_t v : m.i64) put_u64(bytes, static_cast<std::uint64_t>(v));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace gist
