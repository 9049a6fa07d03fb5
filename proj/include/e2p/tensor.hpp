#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "e2p/error.hpp"

namespace e2p {

enum class Task { Depth, Normal, Matting, RGB, Latent };

inline const char* to_string(Task t) {
  switch (t) {
    case Task::Depth: return "Depth";
    case Task::Normal: return "Normal";
    case Task::Matting: return "Matting";
    case Task::RGB: return "RGB";
    case Task::Latent: return "Latent";
  }
  return "Unknown";
}

inline Task task_from_string(const std::string& s) {
  if (s == "Depth" || s == "depth") return Task::Depth;
  if (s == "Normal" || s == "normal") return Task::Normal;
  if (s == "Matting" || s == "matting") return Task::Matting;
  if (s == "RGB" || s == "rgb") return Task::RGB;
  if (s == "Latent" || s == "latent") return Task::Latent;
  fail(ErrorCategory::InvalidArgument, "unknown task '" + s + "'");
}

/// Declared value interval, e.g. [-1,1] for model space or meters for depth.
struct ValueRange {
  double lo = 0.0;
  double hi = 0.0;
};

/// Rank-3 dense image tensor, row-major (row, col, channel), f32 payload.
/// Immutable by convention once constructed; all module functions take it
/// by const reference and return fresh maps.
struct DenseMap {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;
  Task task = Task::Latent;
  ValueRange range{-1.0, 1.0};

  DenseMap() = default;
  DenseMap(int h, int w, int c, Task t = Task::Latent, ValueRange r = {-1.0, 1.0})
      : height(h), width(w), channels(c), data(size_t(h) * w * c, 0.0f), task(t), range(r) {
    require(h > 0 && w > 0 && c > 0, ErrorCategory::EmptyTensor, "zero-sized dims");
  }

  size_t numel() const { return size_t(height) * width * channels; }
  size_t index(int y, int x, int c) const { return (size_t(y) * width + x) * channels + c; }
  float at(int y, int x, int c = 0) const { return data[index(y, x, c)]; }
  float& at(int y, int x, int c = 0) { return data[index(y, x, c)]; }

  bool same_shape(const DenseMap& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

inline void require_same_shape(const DenseMap& a, const DenseMap& b, const char* where) {
  require(a.same_shape(b), ErrorCategory::ShapeMismatch, std::string(where) + ": shape mismatch");
}

/// Checks the declared invariants: payload size, unit-normal pixels for
/// Task::Normal with range [-1,1], and range bounds for [-1,1] maps.
inline void validate(const DenseMap& m) {
  require(m.height > 0 && m.width > 0 && m.channels > 0, ErrorCategory::EmptyTensor,
          "zero-sized dims");
  require(m.data.size() == m.numel(), ErrorCategory::ShapeMismatch,
          "payload length != h*w*c");
  if (m.task == Task::Normal && m.range.lo == -1.0 && m.range.hi == 1.0) {
    require(m.channels == 3, ErrorCategory::ShapeMismatch, "normal map needs 3 channels");
    for (int y = 0; y < m.height; ++y)
      for (int x = 0; x < m.width; ++x) {
        double n2 = 0.0;
        for (int c = 0; c < 3; ++c) n2 += double(m.at(y, x, c)) * m.at(y, x, c);
        require(std::abs(std::sqrt(n2) - 1.0) < 1e-5, ErrorCategory::BadRange,
                "normal pixel not unit length");
      }
  } else if (m.range.lo == -1.0 && m.range.hi == 1.0) {
    for (float v : m.data)
      require(v >= -1.0f - 1e-6f && v <= 1.0f + 1e-6f, ErrorCategory::BadRange,
              "value outside declared [-1,1]");
  }
}

/// Optional validity mask: 1-channel map, >0.5 means valid. An empty
/// (default-constructed) mask means every pixel is valid.
inline bool mask_valid_at(const DenseMap& mask, int y, int x) {
  if (mask.data.empty()) return true;
  return mask.at(y, x, 0) > 0.5f;
}

}  // namespace e2p
