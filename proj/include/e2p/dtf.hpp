#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "e2p/tensor.hpp"

namespace e2p {

// DTF container: magic "DTF1", u32 LE version=1, u32 LE rank, rank u32 LE
// dims, u32 LE dtype code (0=f32), payload row-major f32 LE. Sidecar
// "<path>.meta" holds line-oriented key=value metadata.

namespace detail {

inline void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  require(bool(is), ErrorCategory::Truncated, "unexpected end of DTF header");
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

inline void put_f32(std::ostream& os, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

}  // namespace detail

struct DtfMeta {
  Task task = Task::Latent;
  ValueRange range{-1.0, 1.0};
  std::optional<double> enc_p2;
  std::optional<double> enc_p98;
};

inline void write_meta(const DtfMeta& meta, const std::string& dtf_path) {
  std::ofstream os(dtf_path + ".meta");
  require(bool(os), ErrorCategory::IoFailure, "cannot open " + dtf_path + ".meta");
  os.precision(17);
  os << "task=" << to_string(meta.task) << "\n";
  os << "range_lo=" << meta.range.lo << "\n";
  os << "range_hi=" << meta.range.hi << "\n";
  if (meta.enc_p2) os << "enc_p2=" << *meta.enc_p2 << "\n";
  if (meta.enc_p98) os << "enc_p98=" << *meta.enc_p98 << "\n";
}

inline DtfMeta read_meta(const std::string& dtf_path) {
  std::ifstream is(dtf_path + ".meta");
  require(bool(is), ErrorCategory::IoFailure, "cannot open " + dtf_path + ".meta");
  DtfMeta meta;
  std::string line;
  while (std::getline(is, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "task") meta.task = task_from_string(val);
    else if (key == "range_lo") meta.range.lo = std::stod(val);
    else if (key == "range_hi") meta.range.hi = std::stod(val);
    else if (key == "enc_p2") meta.enc_p2 = std::stod(val);
    else if (key == "enc_p98") meta.enc_p98 = std::stod(val);
  }
  return meta;
}

/// Byte-deterministic write; same map twice gives identical files.
inline void write_dtf(const DenseMap& m, const std::string& path, bool with_meta = true) {
  require(m.height > 0 && m.width > 0 && m.channels > 0, ErrorCategory::EmptyTensor,
          "refusing to write zero-sized tensor");
  require(m.data.size() == m.numel(), ErrorCategory::ShapeMismatch, "payload length != h*w*c");
  std::ofstream os(path, std::ios::binary);
  require(bool(os), ErrorCategory::IoFailure, "cannot open " + path);
  os.write("DTF1", 4);
  detail::put_u32(os, 1);  // version
  detail::put_u32(os, 3);  // rank
  detail::put_u32(os, uint32_t(m.height));
  detail::put_u32(os, uint32_t(m.width));
  detail::put_u32(os, uint32_t(m.channels));
  detail::put_u32(os, 0);  // dtype f32
  for (float v : m.data) detail::put_f32(os, v);
  require(bool(os), ErrorCategory::IoFailure, "short write to " + path);
  if (with_meta) write_meta({m.task, m.range, {}, {}}, path);
}

inline DenseMap read_dtf(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(bool(is), ErrorCategory::IoFailure, "cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  require(bool(is), ErrorCategory::Truncated, "file shorter than magic");
  require(std::memcmp(magic, "DTF1", 4) == 0, ErrorCategory::BadMagic,
          "bad magic in " + path);
  uint32_t version = detail::get_u32(is);
  require(version == 1, ErrorCategory::VersionMismatch, "unsupported DTF version");
  uint32_t rank = detail::get_u32(is);
  require(rank == 3, ErrorCategory::BadRank, "DTF rank must be 3");
  uint32_t h = detail::get_u32(is), w = detail::get_u32(is), c = detail::get_u32(is);
  uint32_t dtype = detail::get_u32(is);
  require(dtype == 0, ErrorCategory::Corrupt, "unknown dtype code");
  require(h > 0 && w > 0 && c > 0, ErrorCategory::EmptyTensor, "zero-sized dims in header");
  DenseMap m(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  is.read(reinterpret_cast<char*>(m.data.data()),
          std::streamsize(m.data.size() * sizeof(float)));
  require(is.gcount() == std::streamsize(m.data.size() * sizeof(float)),
          ErrorCategory::Truncated, "payload shorter than header promises");
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : m.data) {
      uint32_t bits;
      std::memcpy(&bits, &v, 4);
      bits = __builtin_bswap32(bits);
      std::memcpy(&v, &bits, 4);
    }
  }
  if (std::filesystem::exists(path + ".meta")) {
    DtfMeta meta = read_meta(path);
    m.task = meta.task;
    m.range = meta.range;
  }
  return m;
}

}  // namespace e2p
