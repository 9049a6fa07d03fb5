#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "e2p/rng.hpp"
#include "e2p/tensor.hpp"

namespace e2p {

/// One point on the rectified-flow path plus everything needed to rebuild it.
struct FlowState {
  DenseMap z_t;
  double t = 0.0;
  uint64_t z0_seed = 0;
  std::vector<DenseMap> conditioning;
};

/// Element-wise (1-t) z0 + t z1.
inline DenseMap interpolate(const DenseMap& z0, const DenseMap& z1, double t) {
  require_same_shape(z0, z1, "interpolate");
  require(t >= 0.0 && t <= 1.0, ErrorCategory::InvalidArgument, "t outside [0,1]");
  DenseMap out(z0.height, z0.width, z0.channels, Task::Latent, z0.range);
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = float((1.0 - t) * z0.data[i] + t * z1.data[i]);
  return out;
}

/// Constant velocity of the straight path, z1 - z0.
inline DenseMap velocity_target(const DenseMap& z0, const DenseMap& z1) {
  require_same_shape(z0, z1, "velocity_target");
  DenseMap out(z0.height, z0.width, z0.channels, Task::Latent, {-12.0, 12.0});
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = float(double(z1.data[i]) - double(z0.data[i]));
  return out;
}

/// Pyramid-noise schedule. Octave k is white noise rendered at scale 1/2^k,
/// bilinearly upsampled and weighted persistence(t)^k with
/// persistence(t) = persistence_0 * (1 - t), so the coarse octaves vanish
/// at the data end of the path.
struct NoiseSchedule {
  int levels = 4;
  double persistence_0 = 0.7;

  double persistence_at(double t) const { return persistence_0 * (1.0 - t); }
};

namespace detail {

/// Upsample by integer factor f with bilinear weights anchored so output
/// pixel y samples source coordinate y/f. Offsets cycle through {a/f}, which
/// keeps the per-pixel interpolation variance analytic.
inline void upsample_bilinear_add(const std::vector<float>& src, int sh, int sw, int ch,
                                  int factor, double weight, std::vector<double>& dst, int h,
                                  int w) {
  for (int y = 0; y < h; ++y) {
    double fy = double(y) / factor;
    int y0 = int(fy);
    double uy = fy - y0;
    int y1 = std::min(y0 + 1, sh - 1);
    y0 = std::min(y0, sh - 1);
    for (int x = 0; x < w; ++x) {
      double fx = double(x) / factor;
      int x0 = int(fx);
      double ux = fx - x0;
      int x1 = std::min(x0 + 1, sw - 1);
      x0 = std::min(x0, sw - 1);
      for (int c = 0; c < ch; ++c) {
        double v00 = src[(size_t(y0) * sw + x0) * ch + c];
        double v01 = src[(size_t(y0) * sw + x1) * ch + c];
        double v10 = src[(size_t(y1) * sw + x0) * ch + c];
        double v11 = src[(size_t(y1) * sw + x1) * ch + c];
        double v = (1 - uy) * ((1 - ux) * v00 + ux * v01) + uy * ((1 - ux) * v10 + ux * v11);
        dst[(size_t(y) * w + x) * ch + c] += weight * v;
      }
    }
  }
}

/// Mean per-pixel variance of one bilinear axis at integer factor f.
inline double bilinear_axis_variance(int factor) {
  double acc = 0.0;
  for (int a = 0; a < factor; ++a) {
    double u = double(a) / factor;
    acc += (1.0 - u) * (1.0 - u) + u * u;
  }
  return acc / factor;
}

}  // namespace detail

/// Annealed multi-resolution noise: sum over octaves of weighted upsampled
/// white noise, rescaled by the analytic weight norm so the pooled variance
/// stays at 1. At persistence 0 (t = 1, or levels = 1) the result is
/// bit-identical to gaussian_noise drawn from the same stream position.
inline DenseMap multires_noise(SeededRng& rng, int h, int w, int c, const NoiseSchedule& sched,
                               double t) {
  require(sched.levels >= 1, ErrorCategory::InvalidArgument, "levels must be >= 1");
  DenseMap base = gaussian_noise(rng, h, w, c);  // octave 0, full resolution
  double p = sched.persistence_at(t);

  std::vector<double> acc(base.data.begin(), base.data.end());
  double norm2 = 1.0;
  double weight = 1.0;
  for (int k = 1; k < sched.levels; ++k) {
    weight *= p;
    int factor = 1 << k;
    int sh = (h - 1) / factor + 2;  // covers source coord (h-1)/factor
    int sw = (w - 1) / factor + 2;
    std::vector<float> oct(size_t(sh) * sw * c);
    for (auto& v : oct) v = float(rng.next_gaussian());
    if (weight != 0.0) detail::upsample_bilinear_add(oct, sh, sw, c, factor, weight, acc, h, w);
    double axis = detail::bilinear_axis_variance(factor);
    norm2 += weight * weight * axis * axis;
  }
  double inv = 1.0 / std::sqrt(norm2);
  DenseMap out(h, w, c, Task::Latent, {-8.0, 8.0});
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = float(acc[i] * inv);
  return out;
}

using VelocityFn =
    std::function<DenseMap(const DenseMap& z, const std::vector<DenseMap>& cond, double t)>;

/// Euler integration of dz/dt = v(z, t) on the uniform grid t_k = k/steps.
/// steps = 1 is exactly the single-step rule z1 = z0 + v(z0, 0).
inline DenseMap euler_sample(const VelocityFn& model, const DenseMap& z0,
                             const std::vector<DenseMap>& conditioning, int steps) {
  require(steps >= 1, ErrorCategory::InvalidArgument, "steps must be >= 1");
  DenseMap z = z0;
  double dt = 1.0 / steps;
  for (int k = 0; k < steps; ++k) {
    double t = double(k) / steps;
    DenseMap v = model(z, conditioning, t);
    require(v.same_shape(z), ErrorCategory::ShapeMismatch, "model output shape mismatch");
    for (size_t i = 0; i < z.data.size(); ++i)
      z.data[i] = float(double(z.data[i]) + dt * double(v.data[i]));
  }
  return z;
}

}  // namespace e2p
