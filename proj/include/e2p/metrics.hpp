#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "e2p/losses.hpp"
#include "e2p/tensor.hpp"

namespace e2p {

/// Mean |y_hat_align - y| / y over valid pixels. The prediction must
/// already be scale/shift aligned (see depth_metrics for the full chain).
/// Uses the absolute value even though some write-ups omit it; a signed
/// mean can cancel to zero for biased predictions.
inline double absrel(const std::vector<double>& y_hat_align, const std::vector<double>& y,
                     const std::vector<uint8_t>& mask = {}) {
  require(y_hat_align.size() == y.size() && !y.empty(), ErrorCategory::ShapeMismatch,
          "absrel: shape mismatch");
  double acc = 0.0, n = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    if (!lossdetail::valid_at(mask, i)) continue;
    require(y[i] > 0.0, ErrorCategory::BadRange, "absrel: nonpositive ground truth");
    acc += std::abs(y_hat_align[i] - y[i]) / y[i];
    n += 1.0;
  }
  require(n > 0.0, ErrorCategory::InvalidArgument, "absrel: no valid pixels");
  return acc / n;
}

/// Fraction of valid pixels with max(y_hat/y, y/y_hat) < 1.25 (strict).
/// Nonpositive aligned predictions count as failures.
inline double delta1(const std::vector<double>& y_hat_align, const std::vector<double>& y,
                     const std::vector<uint8_t>& mask = {}) {
  require(y_hat_align.size() == y.size() && !y.empty(), ErrorCategory::ShapeMismatch,
          "delta1: shape mismatch");
  double hit = 0.0, n = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    if (!lossdetail::valid_at(mask, i)) continue;
    require(y[i] > 0.0, ErrorCategory::BadRange, "delta1: nonpositive ground truth");
    n += 1.0;
    if (y_hat_align[i] <= 0.0) continue;
    double ratio = std::max(y_hat_align[i] / y[i], y[i] / y_hat_align[i]);
    if (ratio < 1.25) hit += 1.0;
  }
  require(n > 0.0, ErrorCategory::InvalidArgument, "delta1: no valid pixels");
  return hit / n;
}

struct DepthMetrics {
  double absrel = 0.0;
  double delta1 = 0.0;
  AlignmentFit fit;
};

/// Aligns the raw prediction onto ground truth in physical space by least
/// squares, then evaluates. AbsRel is therefore exactly invariant to affine
/// transforms of the raw prediction.
inline DepthMetrics depth_metrics(const std::vector<double>& y_hat_raw,
                                  const std::vector<double>& y,
                                  const std::vector<uint8_t>& mask = {}) {
  DepthMetrics m;
  m.fit = fit_scale_shift(y_hat_raw, y, mask);
  std::vector<double> aligned(y_hat_raw.size());
  for (size_t i = 0; i < y_hat_raw.size(); ++i)
    aligned[i] = m.fit.s * y_hat_raw[i] + m.fit.t_shift;
  m.absrel = absrel(aligned, y, mask);
  m.delta1 = delta1(aligned, y, mask);
  return m;
}

struct NormalMetrics {
  double mean_deg = 0.0;
  double pct_11_25 = 0.0;
};

/// Angles via the atan2 formulation, reported in degrees; both fields are
/// renormalized defensively before the angle is taken.
inline NormalMetrics normal_metrics(const std::vector<double>& n_hat,
                                    const std::vector<double>& n,
                                    const std::vector<uint8_t>& mask = {}) {
  require(n_hat.size() == n.size() && n.size() % 3 == 0 && !n.empty(),
          ErrorCategory::ShapeMismatch, "normal_metrics: need 3-channel fields");
  size_t npix = n.size() / 3;
  double acc = 0.0, hits = 0.0, count = 0.0;
  for (size_t p = 0; p < npix; ++p) {
    if (!lossdetail::valid_at(mask, p)) continue;
    lossdetail::Vec3 a{n[3 * p], n[3 * p + 1], n[3 * p + 2]};
    lossdetail::Vec3 b{n_hat[3 * p], n_hat[3 * p + 1], n_hat[3 * p + 2]};
    double an = lossdetail::norm(a), bn = lossdetail::norm(b);
    require(an > 1e-12 && bn > 1e-12, ErrorCategory::ZeroNorm, "normal_metrics: zero-norm pixel");
    a = {a.x / an, a.y / an, a.z / an};
    b = {b.x / bn, b.y / bn, b.z / bn};
    double deg =
        std::atan2(lossdetail::norm(lossdetail::cross(a, b)), lossdetail::dot(a, b)) * 180.0 /
        M_PI;
    acc += deg;
    if (deg < 11.25) hits += 1.0;
    count += 1.0;
  }
  require(count > 0.0, ErrorCategory::InvalidArgument, "normal_metrics: no valid pixels");
  return {acc / count, hits / count};
}

struct MattingMetrics {
  double mse = 0.0;
  double mad = 0.0;
  double sad = 0.0;   // sum of absolute differences, x1e-3
  double grad = 0.0;  // gradient error (Gaussian derivative, sigma 1.4), x1e-3
  double conn = 0.0;  // connectivity error (threshold sweep 0.1), x1e-3
};

namespace matdetail {

/// 1-D Gaussian first-derivative filter pair applied separably; returns the
/// gradient magnitude map. sigma 1.4 per the standard matting protocol.
inline std::vector<double> gradient_magnitude(const std::vector<double>& img, int h, int w,
                                              double sigma) {
  int radius = int(std::ceil(3.0 * sigma));
  std::vector<double> g(2 * radius + 1), dg(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) {
    double x = double(i);
    g[i + radius] = std::exp(-x * x / (2.0 * sigma * sigma));
    dg[i + radius] = -x / (sigma * sigma) * g[i + radius];
  }
  double gsum = 0.0;
  for (double v : g) gsum += v;
  for (auto& v : g) v /= gsum;

  auto convolve = [&](const std::vector<double>& src, const std::vector<double>& kx,
                      const std::vector<double>& ky) {
    std::vector<double> tmp(src.size()), dst(src.size());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          int xx = std::clamp(x + k, 0, w - 1);
          acc += src[size_t(y) * w + xx] * kx[k + radius];
        }
        tmp[size_t(y) * w + x] = acc;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          int yy = std::clamp(y + k, 0, h - 1);
          acc += tmp[size_t(yy) * w + x] * ky[k + radius];
        }
        dst[size_t(y) * w + x] = acc;
      }
    return dst;
  };

  std::vector<double> gx = convolve(img, dg, g);
  std::vector<double> gy = convolve(img, g, dg);
  std::vector<double> mag(img.size());
  for (size_t i = 0; i < img.size(); ++i)
    mag[i] = std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]);
  return mag;
}

/// Largest 4-connected component of a binary mask.
inline std::vector<uint8_t> largest_component(const std::vector<uint8_t>& bin, int h, int w) {
  std::vector<int> label(bin.size(), -1);
  int best_label = -1;
  size_t best_size = 0;
  int next = 0;
  std::vector<size_t> stack;
  for (size_t s = 0; s < bin.size(); ++s) {
    if (!bin[s] || label[s] >= 0) continue;
    size_t size = 0;
    stack.push_back(s);
    label[s] = next;
    while (!stack.empty()) {
      size_t cur = stack.back();
      stack.pop_back();
      ++size;
      int y = int(cur / w), x = int(cur % w);
      const int dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        int yy = y + dy[k], xx = x + dx[k];
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
        size_t idx = size_t(yy) * w + xx;
        if (bin[idx] && label[idx] < 0) {
          label[idx] = next;
          stack.push_back(idx);
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best_label = next;
    }
    ++next;
  }
  std::vector<uint8_t> out(bin.size(), 0);
  if (best_label >= 0)
    for (size_t i = 0; i < bin.size(); ++i) out[i] = label[i] == best_label ? 1 : 0;
  return out;
}

/// Standard connectivity error: sweep thresholds, track the largest
/// threshold at which each pixel is still connected to the main region of
/// the intersection, then sum |phi(pred) - phi(gt)| with theta = 0.15.
inline double connectivity_error(const std::vector<double>& pred, const std::vector<double>& gt,
                                 int h, int w, double step) {
  std::vector<double> l_map(pred.size(), -1.0);
  int n_steps = int(std::round(1.0 / step));
  for (int i = 1; i <= n_steps; ++i) {
    double th = double(i) * step;
    std::vector<uint8_t> bin(pred.size());
    for (size_t p = 0; p < pred.size(); ++p) bin[p] = (pred[p] >= th && gt[p] >= th) ? 1 : 0;
    std::vector<uint8_t> omega = largest_component(bin, h, w);
    for (size_t p = 0; p < pred.size(); ++p)
      if (l_map[p] < 0.0 && !omega[p]) l_map[p] = th - step;
  }
  for (auto& v : l_map)
    if (v < 0.0) v = 1.0;

  double loss = 0.0;
  for (size_t p = 0; p < pred.size(); ++p) {
    double pd = pred[p] - l_map[p];
    double gd = gt[p] - l_map[p];
    double phi_p = 1.0 - (pd >= 0.15 ? pd : 0.0);
    double phi_g = 1.0 - (gd >= 0.15 ? gd : 0.0);
    loss += std::abs(phi_p - phi_g);
  }
  return loss;
}

}  // namespace matdetail

inline MattingMetrics matting_metrics(const DenseMap& a_hat, const DenseMap& a) {
  require_same_shape(a_hat, a, "matting_metrics");
  require(a.channels == 1, ErrorCategory::ShapeMismatch, "matting_metrics: 1-channel alphas");
  std::vector<double> pred(a_hat.data.begin(), a_hat.data.end());
  std::vector<double> gt(a.data.begin(), a.data.end());
  for (size_t i = 0; i < pred.size(); ++i)
    require(pred[i] >= -1e-6 && pred[i] <= 1.0 + 1e-6 && gt[i] >= -1e-6 && gt[i] <= 1.0 + 1e-6,
            ErrorCategory::BadRange, "matting_metrics: alpha outside [0,1]");
  MattingMetrics m;
  double n = double(pred.size());
  for (size_t i = 0; i < pred.size(); ++i) {
    double d = pred[i] - gt[i];
    m.mse += d * d / n;
    m.mad += std::abs(d) / n;
    m.sad += std::abs(d);
  }
  m.sad *= 1e-3;
  auto mp = matdetail::gradient_magnitude(pred, a.height, a.width, 1.4);
  auto mg = matdetail::gradient_magnitude(gt, a.height, a.width, 1.4);
  for (size_t i = 0; i < mp.size(); ++i) m.grad += (mp[i] - mg[i]) * (mp[i] - mg[i]);
  m.grad *= 1e-3;
  m.conn = matdetail::connectivity_error(pred, gt, a.height, a.width, 0.1) * 1e-3;
  return m;
}

// --- ranking aggregation ----------------------------------------------------

struct MetricColumn {
  std::string name;
  bool lower_is_better = true;
  /// One optional entry per method; missing entries rank last.
  std::vector<std::optional<double>> values;
};

/// Average rank per method over metric columns; ties share the mean of the
/// tied rank positions.
inline std::vector<double> avg_rank(const std::vector<MetricColumn>& columns, size_t n_methods) {
  require(n_methods >= 2, ErrorCategory::InvalidArgument, "avg_rank: need >= 2 methods");
  require(!columns.empty(), ErrorCategory::InvalidArgument, "avg_rank: no columns");
  std::vector<double> rank_sum(n_methods, 0.0);
  for (const auto& col : columns) {
    require(col.values.size() == n_methods, ErrorCategory::ShapeMismatch,
            "avg_rank: column size mismatch");
    // sort keys: missing entries get +inf (always last), direction folded in
    std::vector<double> key(n_methods);
    for (size_t i = 0; i < n_methods; ++i) {
      if (!col.values[i]) key[i] = std::numeric_limits<double>::infinity();
      else key[i] = col.lower_is_better ? *col.values[i] : -*col.values[i];
    }
    std::vector<size_t> idx(n_methods);
    for (size_t i = 0; i < n_methods; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return key[a] < key[b]; });
    size_t i = 0;
    while (i < n_methods) {
      size_t j = i;
      while (j + 1 < n_methods && key[idx[j + 1]] == key[idx[i]]) ++j;
      double shared = (double(i + 1) + double(j + 1)) / 2.0;  // mean of tied 1-based ranks
      for (size_t k = i; k <= j; ++k) rank_sum[idx[k]] += shared;
      i = j + 1;
    }
  }
  for (auto& r : rank_sum) r /= double(columns.size());
  return rank_sum;
}

/// Per-image evaluation record; aggregate rows use sample_count > 1.
struct EvalResult {
  Task task = Task::Depth;
  std::map<std::string, double> values;
  int sample_count = 1;
};

inline std::string eval_csv_header(const EvalResult& r) {
  std::string s = "image";
  for (const auto& [k, v] : r.values) s += "," + k;
  return s;
}

inline std::string eval_csv_row(const std::string& name, const EvalResult& r) {
  std::string s = name;
  char buf[40];
  for (const auto& [k, v] : r.values) {
    std::snprintf(buf, sizeof(buf), ",%.9g", v);
    s += buf;
  }
  return s;
}

}  // namespace e2p
