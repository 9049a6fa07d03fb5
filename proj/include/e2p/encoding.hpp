#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "e2p/mapping.hpp"
#include "e2p/stats.hpp"
#include "e2p/tensor.hpp"

namespace e2p {

/// Percentile anchors of the mapped depth image, in mapped units
/// (sqrt-meters for the default mapping). Together with the mapping they
/// pin down the affine normalization used at encode time.
struct DepthEncoding {
  double p_lo = 0.0;   // 2nd percentile of g(y) over valid pixels
  double p_hi = 0.0;   // 98th percentile
  Mapping mapping = Mapping::sqrt();
};

struct EncodedDepth {
  DenseMap map;  // 3 identical channels in [-1,1]
  DepthEncoding enc;
};

/// Maps physical depth to the model's [-1,1] 3-channel representation:
/// z = g(y), robust percentile normalization (p2/p98 over valid pixels),
/// clamp to [-1,1], replicate to 3 channels. Pixels outside [p2,p98] clamp
/// so the decode stays total.
inline EncodedDepth depth_encode(const DenseMap& y, const Mapping& mapping = Mapping::sqrt(),
                                 const DenseMap& valid = DenseMap{}) {
  require(y.channels == 1, ErrorCategory::ShapeMismatch, "depth map must be 1-channel");
  std::vector<double> mapped;
  mapped.reserve(y.numel());
  for (int r = 0; r < y.height; ++r)
    for (int c = 0; c < y.width; ++c) {
      if (!mask_valid_at(valid, r, c)) continue;
      double v = y.at(r, c, 0);
      require(v > 0.0, ErrorCategory::BadRange, "nonpositive depth at valid pixel");
      mapped.push_back(mapping.forward(v));
    }
  require(mapped.size() >= 2, ErrorCategory::DegenerateRange, "fewer than 2 valid pixels");
  std::sort(mapped.begin(), mapped.end());
  DepthEncoding enc;
  enc.mapping = mapping;
  enc.p_lo = percentile_sorted(mapped, 2.0);
  enc.p_hi = percentile_sorted(mapped, 98.0);
  require(enc.p_hi > enc.p_lo, ErrorCategory::DegenerateRange, "p98 == p2");

  DenseMap out(y.height, y.width, 3, Task::Depth, {-1.0, 1.0});
  double span = enc.p_hi - enc.p_lo;
  for (int r = 0; r < y.height; ++r)
    for (int c = 0; c < y.width; ++c) {
      double v = mask_valid_at(valid, r, c) ? double(y.at(r, c, 0)) : enc.p_lo;
      double d = ((mapping.forward(v) - enc.p_lo) / span - 0.5) * 2.0;
      float f = float(std::clamp(d, -1.0, 1.0));
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = f;
    }
  return {std::move(out), enc};
}

/// Inverse chain: channel mean -> denormalize -> g^{-1}. Total on all real
/// inputs for the uniform and sqrt mappings.
inline DenseMap depth_decode(const DenseMap& m, const DepthEncoding& enc) {
  require(enc.p_hi > enc.p_lo, ErrorCategory::DegenerateRange, "invalid encoding");
  DenseMap out(m.height, m.width, 1, Task::Depth, {0.0, 0.0});
  double span = enc.p_hi - enc.p_lo;
  double lo = 1e300, hi = -1e300;
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c) {
      double mean = 0.0;
      for (int ch = 0; ch < m.channels; ++ch) mean += m.at(r, c, ch);
      mean /= double(m.channels);
      double z = enc.p_lo + (mean * 0.5 + 0.5) * span;
      double y = enc.mapping.inverse(z);
      out.at(r, c, 0) = float(y);
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
  out.range = {lo, hi};
  return out;
}

/// Divides each pixel vector by its L2 norm.
inline DenseMap normal_encode(const DenseMap& n, const DenseMap& valid = DenseMap{}) {
  require(n.channels == 3, ErrorCategory::ShapeMismatch, "normal map must be 3-channel");
  DenseMap out(n.height, n.width, 3, Task::Normal, {-1.0, 1.0});
  for (int r = 0; r < n.height; ++r)
    for (int c = 0; c < n.width; ++c) {
      double nx = n.at(r, c, 0), ny = n.at(r, c, 1), nz = n.at(r, c, 2);
      double len = std::sqrt(nx * nx + ny * ny + nz * nz);
      if (!mask_valid_at(valid, r, c)) {
        out.at(r, c, 2) = 1.0f;  // placeholder unit vector at holes
        continue;
      }
      require(len > 1e-12, ErrorCategory::ZeroNorm, "zero-norm normal at valid pixel");
      out.at(r, c, 0) = float(nx / len);
      out.at(r, c, 1) = float(ny / len);
      out.at(r, c, 2) = float(nz / len);
    }
  return out;
}

/// Binarize at 0.5 (strict >) and map to {-1,+1}, replicated to 3 channels.
inline DenseMap matting_encode(const DenseMap& alpha) {
  require(alpha.channels == 1, ErrorCategory::ShapeMismatch, "alpha matte must be 1-channel");
  DenseMap out(alpha.height, alpha.width, 3, Task::Matting, {-1.0, 1.0});
  for (int r = 0; r < alpha.height; ++r)
    for (int c = 0; c < alpha.width; ++c) {
      float a = alpha.at(r, c, 0);
      require(a >= 0.0f && a <= 1.0f, ErrorCategory::BadRange, "alpha outside [0,1]");
      float v = a > 0.5f ? 1.0f : -1.0f;
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = v;
    }
  return out;
}

/// Affine map from the declared input range onto [-1,1].
inline DenseMap rgb_normalize(const DenseMap& x) {
  require(x.range.hi > x.range.lo, ErrorCategory::BadRange, "undeclared or empty input range");
  DenseMap out(x.height, x.width, x.channels, x.task, {-1.0, 1.0});
  double lo = x.range.lo, span = x.range.hi - x.range.lo;
  for (size_t i = 0; i < x.data.size(); ++i)
    out.data[i] = float(((double(x.data[i]) - lo) / span - 0.5) * 2.0);
  return out;
}

/// Interactive-matting visual prompt: up to 10 click points plus the
/// Gaussian kernel width used to rasterize them.
struct PointPrompt {
  std::vector<std::pair<int, int>> points;  // (row, col)
  double sigma = 8.0;
};

/// Soft prompt mask: max over points of a unit-peak Gaussian, then affine
/// to [-1,1]. Max (not sum) keeps the peak at +1 for any point count.
inline DenseMap point_prompt_mask(const PointPrompt& prompt, int h, int w) {
  require(!prompt.points.empty(), ErrorCategory::InvalidArgument, "empty point list");
  require(prompt.points.size() <= 10, ErrorCategory::InvalidArgument, "more than 10 points");
  for (auto [r, c] : prompt.points)
    require(r >= 0 && r < h && c >= 0 && c < w, ErrorCategory::InvalidArgument,
            "prompt point outside image");
  DenseMap out(h, w, 1, Task::Latent, {-1.0, 1.0});
  double inv2s2 = 1.0 / (2.0 * prompt.sigma * prompt.sigma);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double best = 0.0;
      for (auto [pr, pc] : prompt.points) {
        double d2 = double(r - pr) * (r - pr) + double(c - pc) * (c - pc);
        best = std::max(best, std::exp(-d2 * inv2s2));
      }
      out.at(r, c, 0) = float(best * 2.0 - 1.0);
    }
  return out;
}

}  // namespace e2p
