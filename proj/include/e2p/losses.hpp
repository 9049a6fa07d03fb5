#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "e2p/tensor.hpp"

namespace e2p {

/// Scalar loss with gradient w.r.t. the prediction buffer. Loss math runs
/// in double so gradients can be checked against central finite differences
/// at tight tolerances.
struct LossGrad {
  double value = 0.0;
  std::vector<double> grad;
};

/// Least-squares scale/shift aligning a prediction onto ground truth.
struct AlignmentFit {
  double s = 1.0;
  double t_shift = 0.0;
};

namespace lossdetail {

inline bool valid_at(const std::vector<uint8_t>& mask, size_t i) {
  return mask.empty() || mask[i] != 0;
}

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace lossdetail

/// Mean squared error between predicted and true velocity (flow-matching
/// objective). grad = 2 (v_pred - v_true) / numel.
inline LossGrad fm_loss(const std::vector<double>& v_pred, const std::vector<double>& v_true) {
  require(v_pred.size() == v_true.size() && !v_pred.empty(), ErrorCategory::ShapeMismatch,
          "fm_loss: shape mismatch");
  LossGrad out;
  out.grad.resize(v_pred.size());
  double inv_n = 1.0 / double(v_pred.size());
  for (size_t i = 0; i < v_pred.size(); ++i) {
    double d = v_pred[i] - v_true[i];
    out.value += d * d * inv_n;
    out.grad[i] = 2.0 * d * inv_n;
  }
  return out;
}

/// Closed-form least squares of s*y_hat + t ~= y over valid pixels.
inline AlignmentFit fit_scale_shift(const std::vector<double>& y_hat,
                                    const std::vector<double>& y,
                                    const std::vector<uint8_t>& mask = {}) {
  require(y_hat.size() == y.size(), ErrorCategory::ShapeMismatch, "fit: shape mismatch");
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < y_hat.size(); ++i) {
    if (!lossdetail::valid_at(mask, i)) continue;
    n += 1.0;
    sx += y_hat[i];
    sy += y[i];
    sxx += y_hat[i] * y_hat[i];
    sxy += y_hat[i] * y[i];
  }
  require(n >= 2.0, ErrorCategory::InvalidArgument, "fit: fewer than 2 valid pixels");
  double det = n * sxx - sx * sx;
  require(std::abs(det) > 1e-12 * std::max(1.0, n * sxx), ErrorCategory::DegenerateRange,
          "fit: constant prediction");
  AlignmentFit f;
  f.s = (n * sxy - sx * sy) / det;
  f.t_shift = (sy - f.s * sx) / n;
  return f;
}

/// Scale-and-shift invariant L1 depth loss: fit (s,t) by least squares,
/// then mean |y - (s*y_hat + t)| over valid pixels.
///
/// The gradient differentiates through the closed-form fit (s and t are
/// functions of y_hat); set differentiate_fit = false to treat the fit as a
/// constant (ablation variant). L1 subgradient at 0 is taken as 0.
inline LossGrad ssi_l1_depth(const std::vector<double>& y_hat, const std::vector<double>& y,
                             const std::vector<uint8_t>& mask = {},
                             bool differentiate_fit = true, AlignmentFit* fit_out = nullptr) {
  require(y_hat.size() == y.size() && !y_hat.empty(), ErrorCategory::ShapeMismatch,
          "ssi_l1_depth: shape mismatch");
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < y_hat.size(); ++i) {
    if (!lossdetail::valid_at(mask, i)) continue;
    n += 1.0;
    sx += y_hat[i];
    sy += y[i];
    sxx += y_hat[i] * y_hat[i];
    sxy += y_hat[i] * y[i];
  }
  require(n >= 2.0, ErrorCategory::InvalidArgument, "ssi_l1_depth: fewer than 2 valid pixels");
  double det = n * sxx - sx * sx;
  require(std::abs(det) > 1e-12 * std::max(1.0, n * sxx), ErrorCategory::DegenerateRange,
          "ssi_l1_depth: constant prediction");
  double c_num = n * sxy - sx * sy;
  double s = c_num / det;
  double t = (sy - s * sx) / n;
  if (fit_out) *fit_out = {s, t};

  LossGrad out;
  out.grad.assign(y_hat.size(), 0.0);
  double sum_abs = 0.0, a_sum = 0.0, b_sum = 0.0;
  for (size_t i = 0; i < y_hat.size(); ++i) {
    if (!lossdetail::valid_at(mask, i)) continue;
    double r = y[i] - s * y_hat[i] - t;
    sum_abs += std::abs(r);
    double sg = lossdetail::sgn(r);
    a_sum += sg * y_hat[i];  // sum sgn(r_j) y_hat_j
    b_sum += sg;             // sum sgn(r_j)
  }
  out.value = sum_abs / n;

  for (size_t i = 0; i < y_hat.size(); ++i) {
    if (!lossdetail::valid_at(mask, i)) continue;
    double r = y[i] - s * y_hat[i] - t;
    double g = -s * lossdetail::sgn(r);
    if (differentiate_fit) {
      double ds = ((n * y[i] - sy) * det - c_num * (2.0 * n * y_hat[i] - 2.0 * sx)) / (det * det);
      double dt = (-ds * sx - s) / n;
      g += -(a_sum * ds + b_sum * dt);
    }
    out.grad[i] = g / n;
  }
  return out;
}

namespace lossdetail {

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

}  // namespace lossdetail

/// Mean angular error via atan2(|n x n_hat|, n . n_hat). Both fields are
/// renormalized internally; the gradient is taken w.r.t. the raw n_hat
/// buffer, chained through that renormalization, and stays bounded for all
/// inputs including collinear pairs (where the subgradient is 0).
inline LossGrad angular_loss(const std::vector<double>& n_hat, const std::vector<double>& n,
                             const std::vector<uint8_t>& mask = {}) {
  require(n_hat.size() == n.size() && n.size() % 3 == 0 && !n.empty(),
          ErrorCategory::ShapeMismatch, "angular_loss: need matching 3-channel fields");
  using lossdetail::Vec3;
  size_t npix = n.size() / 3;
  LossGrad out;
  out.grad.assign(n_hat.size(), 0.0);
  double count = 0.0;
  for (size_t p = 0; p < npix; ++p) {
    if (!lossdetail::valid_at(mask, p)) continue;
    count += 1.0;
  }
  require(count > 0.0, ErrorCategory::InvalidArgument, "angular_loss: no valid pixels");
  double inv_n = 1.0 / count;

  for (size_t p = 0; p < npix; ++p) {
    if (!lossdetail::valid_at(mask, p)) continue;
    Vec3 v{n_hat[3 * p], n_hat[3 * p + 1], n_hat[3 * p + 2]};
    Vec3 g{n[3 * p], n[3 * p + 1], n[3 * p + 2]};
    double vn = lossdetail::norm(v);
    double gn = lossdetail::norm(g);
    require(vn > 1e-12, ErrorCategory::ZeroNorm, "angular_loss: zero-norm prediction pixel");
    require(gn > 1e-12, ErrorCategory::ZeroNorm, "angular_loss: zero-norm target pixel");
    Vec3 u{v.x / vn, v.y / vn, v.z / vn};
    Vec3 a{g.x / gn, g.y / gn, g.z / gn};
    Vec3 c = lossdetail::cross(a, u);
    double sin_t = lossdetail::norm(c);
    double cos_t = lossdetail::dot(a, u);
    out.value += std::atan2(sin_t, cos_t) * inv_n;

    // d theta / d u = cos * (c x a)/sin - sin * a   (unit u, sin^2+cos^2=1)
    Vec3 gu{0, 0, 0};
    if (sin_t > 1e-12) {
      Vec3 ca = lossdetail::cross(c, a);
      gu = {cos_t * ca.x / sin_t - sin_t * a.x, cos_t * ca.y / sin_t - sin_t * a.y,
            cos_t * ca.z / sin_t - sin_t * a.z};
    }
    // chain through u = v/|v|: (I - u u^T)/|v|
    double radial = lossdetail::dot(gu, u);
    out.grad[3 * p + 0] = (gu.x - radial * u.x) / vn * inv_n;
    out.grad[3 * p + 1] = (gu.y - radial * u.y) / vn * inv_n;
    out.grad[3 * p + 2] = (gu.z - radial * u.z) / vn * inv_n;
  }
  return out;
}

/// Naive arccos(n . n_hat) baseline. Kept only to demonstrate the gradient
/// explosion near collinearity; its derivative factor -1/sqrt(1-d^2) is
/// unbounded as d -> +-1 (clamped at 1e-15 from the poles to stay finite).
inline LossGrad arccos_loss_reference(const std::vector<double>& n_hat,
                                      const std::vector<double>& n) {
  require(n_hat.size() == n.size() && n.size() % 3 == 0 && !n.empty(),
          ErrorCategory::ShapeMismatch, "arccos_loss: need matching 3-channel fields");
  size_t npix = n.size() / 3;
  LossGrad out;
  out.grad.assign(n_hat.size(), 0.0);
  double inv_n = 1.0 / double(npix);
  for (size_t p = 0; p < npix; ++p) {
    double d = n[3 * p] * n_hat[3 * p] + n[3 * p + 1] * n_hat[3 * p + 1] +
               n[3 * p + 2] * n_hat[3 * p + 2];
    double dc = std::clamp(d, -1.0, 1.0);
    out.value += std::acos(dc) * inv_n;
    double dg = std::clamp(d, -1.0 + 1e-15, 1.0 - 1e-15);
    double factor = -1.0 / std::sqrt(1.0 - dg * dg);
    out.grad[3 * p + 0] += factor * n[3 * p + 0] * inv_n;
    out.grad[3 * p + 1] += factor * n[3 * p + 1] * inv_n;
    out.grad[3 * p + 2] += factor * n[3 * p + 2] * inv_n;
  }
  return out;
}

/// Per-region breakdown of the matting loss. A missing region contributes
/// nothing and is flagged so callers can tell "empty" from "zero error".
struct MattingBreakdown {
  double unknown_term = 0.0;
  double known_term = 0.0;
  size_t unknown_count = 0;
  size_t known_count = 0;
};

/// Separate mean L1 over the unknown transition region U (trimap == 1) and
/// the known region K (trimap == 0), summed.
inline LossGrad matting_region_l1(const std::vector<double>& a_hat, const std::vector<double>& a,
                                  const std::vector<uint8_t>& trimap_unknown,
                                  MattingBreakdown* breakdown = nullptr) {
  require(a_hat.size() == a.size() && a.size() == trimap_unknown.size() && !a.empty(),
          ErrorCategory::ShapeMismatch, "matting_region_l1: shape mismatch");
  MattingBreakdown bd;
  for (uint8_t u : trimap_unknown) (u ? bd.unknown_count : bd.known_count)++;
  LossGrad out;
  out.grad.assign(a_hat.size(), 0.0);
  for (size_t i = 0; i < a_hat.size(); ++i) {
    double d = a_hat[i] - a[i];
    if (trimap_unknown[i]) bd.unknown_term += std::abs(d) / double(bd.unknown_count);
    else bd.known_term += std::abs(d) / double(bd.known_count);
  }
  for (size_t i = 0; i < a_hat.size(); ++i) {
    double d = a_hat[i] - a[i];
    size_t cnt = trimap_unknown[i] ? bd.unknown_count : bd.known_count;
    out.grad[i] = lossdetail::sgn(d) / double(cnt);
  }
  out.value = bd.unknown_term + bd.known_term;
  if (breakdown) *breakdown = bd;
  return out;
}

/// Curriculum weight of Eq-style stop-gradient ratio form:
/// (|l_fm| / (|l_cons| + eps)) * max(0, step/n_step - 1). Callers must pass
/// detached (plain scalar) loss values; nothing differentiates through it.
inline double adaptive_lambda(double l_fm, double l_cons, int64_t step, int64_t n_step,
                              double eps = 0.001) {
  require(n_step >= 1, ErrorCategory::InvalidArgument, "n_step must be >= 1");
  double ramp = std::max(0.0, double(step) / double(n_step) - 1.0);
  return std::abs(l_fm) / (std::abs(l_cons) + eps) * ramp;
}

/// Binarize alpha at 0.5, then label as unknown every pixel whose Euclidean
/// distance to the nearest opposite-value pixel is <= max(radius, 1); with
/// radius 0 that is exactly the two-sided boundary. Returns 1 = U, 0 = K.
inline std::vector<uint8_t> trimap_from_alpha(const DenseMap& alpha, int dilation_radius) {
  require(alpha.channels == 1, ErrorCategory::ShapeMismatch, "alpha must be 1-channel");
  require(dilation_radius >= 0, ErrorCategory::InvalidArgument, "negative radius");
  int h = alpha.height, w = alpha.width;
  std::vector<uint8_t> fg(size_t(h) * w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) fg[size_t(r) * w + c] = alpha.at(r, c, 0) > 0.5f ? 1 : 0;

  double thr = std::max(dilation_radius, 1);
  int win = int(std::ceil(thr));
  std::vector<uint8_t> unknown(size_t(h) * w, 0);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      uint8_t me = fg[size_t(r) * w + c];
      bool hit = false;
      for (int dr = -win; dr <= win && !hit; ++dr) {
        int rr = r + dr;
        if (rr < 0 || rr >= h) continue;
        for (int dc = -win; dc <= win; ++dc) {
          int cc = c + dc;
          if (cc < 0 || cc >= w) continue;
          if (fg[size_t(rr) * w + cc] != me && double(dr) * dr + double(dc) * dc <= thr * thr) {
            hit = true;
            break;
          }
        }
      }
      unknown[size_t(r) * w + c] = hit ? 1 : 0;
    }
  return unknown;
}

/// Composite loss bookkeeping for one training step.
struct LossReport {
  int64_t step = 0;
  double l_fm = 0.0;
  double l_cons = 0.0;
  double lambda = 0.0;
  double total = 0.0;
  Task task = Task::Depth;
  std::optional<MattingBreakdown> region_breakdown;

  static std::string csv_header() { return "step,l_fm,l_cons,lambda,total"; }
  std::string csv_row() const {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g", (long long)step, l_fm, l_cons,
                  lambda, total);
    return buf;
  }
};

}  // namespace e2p
