#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "e2p/bf16.hpp"
#include "e2p/mapping.hpp"
#include "e2p/rng.hpp"
#include "e2p/stats.hpp"
#include "e2p/tensor.hpp"

namespace e2p {

/// Mean relative quantization error of a mapped-and-normalized depth
/// representation over [y_min, y_max]:
///
///   (1 / (512 (y_max - y_min))) * Int_{y_min}^{y_max} (g_max - g_min) / (y g'(y)) dy
///
/// The 1/512 constant is the worst-case bf16 step on (-1,1) (1/256) times
/// the half-width of the normalization interval. Composite Simpson
/// quadrature; integrands are smooth on positive ranges.
inline double analytic_error(const Mapping& m, double y_min, double y_max, int n_quad = 100000) {
  require(y_min > 0.0 && y_max > y_min, ErrorCategory::DegenerateRange,
          "need 0 < y_min < y_max");
  require(n_quad >= 1000, ErrorCategory::InvalidArgument, "n_quad must be >= 1000");
  if (n_quad % 2 != 0) ++n_quad;  // Simpson needs an even interval count

  const double g_span = m.forward(y_max) - m.forward(y_min);
  require(std::isfinite(g_span) && g_span > 0.0, ErrorCategory::DegenerateRange,
          "mapping degenerate on range");
  auto f = [&](double y) { return g_span / (y * m.derivative(y)); };

  const double h = (y_max - y_min) / double(n_quad);
  double sum = f(y_min) + f(y_max);
  for (int i = 1; i < n_quad; ++i) sum += f(y_min + h * double(i)) * (i % 2 ? 4.0 : 2.0);
  double integral = sum * h / 3.0;
  return integral / (512.0 * (y_max - y_min));
}

/// Closed forms used as quadrature cross-checks.
inline double analytic_error_uniform_closed(double y_min, double y_max) {
  return std::log(y_max / y_min) / 512.0;
}

inline double analytic_error_sqrt_closed(double y_min, double y_max) {
  double d = std::sqrt(y_max) - std::sqrt(y_min);
  return 4.0 * d * d / (512.0 * (y_max - y_min));
}

/// Grid argmin of analytic_error over Power(p). Exact ties (within 1e-12
/// relative, which only happens on near-degenerate ranges where the
/// landscape is flat) break toward the grid value nearest 0.5.
inline double optimality_scan(const std::vector<double>& power_grid, double y_min, double y_max,
                              int n_quad = 20000) {
  require(!power_grid.empty(), ErrorCategory::InvalidArgument, "empty power grid");
  double best_p = power_grid[0];
  double best_err = analytic_error(Mapping::power(best_p), y_min, y_max, n_quad);
  for (size_t i = 1; i < power_grid.size(); ++i) {
    double p = power_grid[i];
    double err = analytic_error(Mapping::power(p), y_min, y_max, n_quad);
    bool tie = std::abs(err - best_err) <= 1e-12 * std::max(std::abs(err), std::abs(best_err));
    if ((tie && std::abs(p - 0.5) < std::abs(best_p - 0.5)) || (!tie && err < best_err)) {
      best_p = p;
      best_err = err;
    }
  }
  return best_p;
}

/// Simulates the full preprocessing chain on concrete depth samples:
/// y -> g(y) -> robust percentile normalization (p2/p98 of the mapped
/// samples) -> bf16 round-to-nearest -> inverse chain. Values outside the
/// percentile span land slightly outside [-1,1] and are not clamped, so the
/// inverse stays total. Returns mean |y_rec - y| / y.
inline double empirical_pipeline_error(const Mapping& m, const std::vector<double>& samples) {
  require(!samples.empty(), ErrorCategory::InvalidArgument, "no depth samples");
  std::vector<double> mapped(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    require(samples[i] > 0.0, ErrorCategory::BadRange, "nonpositive depth sample");
    mapped[i] = m.forward(samples[i]);
  }
  std::vector<double> sorted = mapped;
  std::sort(sorted.begin(), sorted.end());
  double p2 = percentile_sorted(sorted, 2.0);
  double p98 = percentile_sorted(sorted, 98.0);
  double span = p98 - p2;

  double acc = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    double d = span > 0.0 ? ((mapped[i] - p2) / span - 0.5) * 2.0 : 0.0;
    double q = bf16_round(d);
    double z_rec = p2 + (q * 0.5 + 0.5) * span;
    double y_rec = m.inverse(z_rec);
    acc += std::abs(y_rec - samples[i]) / samples[i];
  }
  return acc / double(samples.size());
}

inline double empirical_pipeline_error(const Mapping& m, const DenseMap& depth) {
  std::vector<double> samples(depth.data.begin(), depth.data.end());
  return empirical_pipeline_error(m, samples);
}

struct QuantReport {
  Mapping mapping;
  double y_min = 0.0;
  double y_max = 0.0;
  double analytic = 0.0;        // mean relative error, dimensionless
  double empirical = 0.0;       // from pipeline simulation
  double improvement_pp = 0.0;  // (uniform - this) in percentage points
};

/// One analytic+empirical row per mapping for a fixed range. Empirical uses
/// uniform samples over the range drawn from the given stream.
inline std::vector<QuantReport> quant_report_table(const std::vector<Mapping>& mappings,
                                                   double y_min, double y_max, SeededRng rng,
                                                   size_t n_samples = 200000,
                                                   int n_quad = 100000) {
  std::vector<double> samples(n_samples);
  for (auto& s : samples) s = y_min + (y_max - y_min) * rng.next_unit();
  double uniform_analytic = analytic_error(Mapping::uniform(), y_min, y_max, n_quad);
  std::vector<QuantReport> out;
  for (const auto& m : mappings) {
    QuantReport r;
    r.mapping = m;
    r.y_min = y_min;
    r.y_max = y_max;
    r.analytic = analytic_error(m, y_min, y_max, n_quad);
    r.empirical = empirical_pipeline_error(m, samples);
    r.improvement_pp = (uniform_analytic - r.analytic) * 100.0;
    out.push_back(r);
  }
  return out;
}

/// Line-oriented table consumed by the CLI.
inline std::string format_quant_table(const std::vector<QuantReport>& rows) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %-14s %-12s %-12s %s\n", "mapping", "range_m",
                "analytic", "empirical", "improvement_pp");
  os << buf;
  for (const auto& r : rows) {
    char range[40];
    std::snprintf(range, sizeof(range), "[%g,%g]", r.y_min, r.y_max);
    std::snprintf(buf, sizeof(buf), "%-12s %-14s %.6f%%   %.6f%%   %+.4f\n",
                  r.mapping.name().c_str(), range, r.analytic * 100.0, r.empirical * 100.0,
                  r.improvement_pp);
    os << buf;
  }
  return os.str();
}

}  // namespace e2p
