#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <vector>

#include "e2p/quant_error.hpp"
#include "e2p/rng.hpp"

using namespace e2p;

namespace {

/// Oracle: enumerate every finite normal bf16 value and pick the nearest to
/// x, ties resolved toward the even mantissa. Independent of the bit tricks
/// in bf16_round.
float bf16_nearest_by_search(float x) {
  float best = 0.0f;
  double best_dist = 1e300;
  bool best_even = false;
  for (uint32_t hi = 0; hi < 0x10000; ++hi) {
    uint32_t bits = hi << 16;
    if ((bits & 0x7F800000u) == 0x7F800000u) continue;  // inf/nan
    if ((bits & 0x7F800000u) == 0) continue;            // subnormal (flushed)
    float v;
    std::memcpy(&v, &bits, 4);
    double dist = std::abs(double(v) - double(x));
    bool even = ((hi >> 0) & 1u) == 0;
    if (dist < best_dist || (dist == best_dist && even && !best_even)) {
      best_dist = dist;
      best = v;
      best_even = even;
    }
  }
  if (std::abs(double(x)) < best_dist) return x < 0 ? -0.0f : 0.0f;  // zero closer
  return best;
}

}  // namespace

TEST_CASE("bf16_round matches the exhaustive nearest-even oracle") {
  REQUIRE(bf16_round(1.0f) == 1.0f);
  // 1 + 2^-8 sits exactly between 1.0 and 1 + 2^-7; even mantissa wins
  REQUIRE(bf16_round(1.0f + 0x1.0p-8f) == 1.0f);
  REQUIRE(bf16_round(0.7f) == 0.69921875f);
  REQUIRE(bf16_nearest_by_search(0.7f) == 0.69921875f);

  SeededRng rng(5);
  for (int i = 0; i < 300; ++i) {
    float x = float((rng.next_unit() * 2.0 - 1.0) * std::pow(10.0, rng.next_unit() * 6.0 - 3.0));
    REQUIRE(bf16_round(x) == bf16_nearest_by_search(x));
  }
}

TEST_CASE("bf16_round is idempotent and monotone") {
  SeededRng rng(6);
  std::vector<float> xs;
  for (int i = 0; i < 500; ++i)
    xs.push_back(float((rng.next_unit() * 2.0 - 1.0) * std::pow(10.0, rng.next_unit() * 4 - 2)));
  for (float x : xs) REQUIRE(bf16_round(bf16_round(x)) == bf16_round(x));
  for (size_t i = 0; i + 1 < xs.size(); ++i) {
    float a = std::min(xs[i], xs[i + 1]), b = std::max(xs[i], xs[i + 1]);
    REQUIRE(bf16_round(a) <= bf16_round(b));
  }
}

TEST_CASE("largest quantization step on (-1,1) is 1/256") {
  REQUIRE(max_quant_step_unit_interval() == 0.00390625);
  // successor oracle at 0.75: values in [0.5,1) carry exponent 126, so the
  // lattice spacing there is 2^-8, the worst case the 1/512 constant uses
  REQUIRE(bf16_step_at(0.75f) == Catch::Approx(0x1.0p-8).epsilon(0));
  REQUIRE(bf16_step_at(0.1f) < bf16_step_at(0.9f));
  // no step inside (-1,1) exceeds the quoted maximum
  SeededRng rng(7);
  for (int i = 0; i < 200; ++i) {
    float d = float(rng.next_unit() * 2.0 - 1.0);
    if (d == 0.0f) continue;
    REQUIRE(bf16_step_at(d) <= float(max_quant_step_unit_interval()));
  }
}

TEST_CASE("analytic error matches closed forms") {
  double uni = analytic_error(Mapping::uniform(), 0.1, 10.0);
  double sq = analytic_error(Mapping::sqrt(), 0.1, 10.0);
  REQUIRE(uni == Catch::Approx(analytic_error_uniform_closed(0.1, 10.0)).epsilon(1e-8));
  REQUIRE(sq == Catch::Approx(analytic_error_sqrt_closed(0.1, 10.0)).epsilon(1e-8));
  REQUIRE(uni == Catch::Approx(std::log(100.0) / 512.0).epsilon(1e-8));
  REQUIRE(sq == Catch::Approx(4.0 * 8.1 / (512.0 * 9.9)).epsilon(1e-8));
  // log mapping has a constant relative-error integrand that integrates to
  // the same mean as uniform
  double lg = analytic_error(Mapping::log(), 0.1, 10.0);
  REQUIRE(lg == Catch::Approx(uni).epsilon(1e-8));
}

TEST_CASE("theoretical improvements match the quoted indoor/outdoor values") {
  double in_uni = analytic_error(Mapping::uniform(), 0.1, 10.0);
  double in_sq = analytic_error(Mapping::sqrt(), 0.1, 10.0);
  REQUIRE((in_uni - in_sq) * 100.0 == Catch::Approx(0.26).margin(0.01));

  double out_uni = analytic_error(Mapping::uniform(), 0.1, 80.0);
  double out_sq = analytic_error(Mapping::sqrt(), 0.1, 80.0);
  REQUIRE((out_uni - out_sq) * 100.0 == Catch::Approx(0.58).margin(0.05));
}

TEST_CASE("quadrature converges: doubling n_quad moves the value < 1e-6 relative") {
  for (auto m : {Mapping::uniform(), Mapping::sqrt(), Mapping::power(0.35)}) {
    double a = analytic_error(m, 0.1, 80.0, 100000);
    double b = analytic_error(m, 0.1, 80.0, 200000);
    REQUIRE(std::abs(a - b) / std::abs(b) < 1e-6);
  }
}

TEST_CASE("optimality scan returns p = 0.5 across ranges") {
  std::vector<double> grid;
  for (double p = 0.25; p <= 1.0 + 1e-9; p += 0.05) grid.push_back(p);

  REQUIRE(optimality_scan(grid, 0.1, 10.0) == Catch::Approx(0.5));
  REQUIRE(optimality_scan(grid, 0.1, 80.0) == Catch::Approx(0.5));
  // 20 ranges spanning ratio 2x..1000x
  for (int k = 0; k < 20; ++k) {
    double ratio = 2.0 * std::pow(500.0, double(k) / 19.0);
    double y_min = 0.05 + 0.1 * k;
    REQUIRE(optimality_scan(grid, y_min, y_min * ratio) == Catch::Approx(0.5));
  }
  // near-degenerate range: flat landscape, tie-break keeps 0.5
  REQUIRE(optimality_scan(grid, 1.0, 1.001) == Catch::Approx(0.5));
}

TEST_CASE("empirical pipeline error") {
  SECTION("constant samples are a fixed point") {
    std::vector<double> samples(100, 4.0);
    REQUIRE(empirical_pipeline_error(Mapping::sqrt(), samples) == 0.0);
    REQUIRE(empirical_pipeline_error(Mapping::uniform(), samples) == 0.0);
  }

  SECTION("sqrt beats uniform on wide uniform samples; empirical <= analytic") {
    SeededRng rng(42);
    for (auto range : std::vector<std::pair<double, double>>{{0.1, 10.0}, {0.1, 80.0}}) {
      auto [lo, hi] = range;
      std::vector<double> samples(200000);
      for (auto& s : samples) s = lo + (hi - lo) * rng.next_unit();
      double e_uni = empirical_pipeline_error(Mapping::uniform(), samples);
      double e_sq = empirical_pipeline_error(Mapping::sqrt(), samples);
      double a_uni = analytic_error(Mapping::uniform(), lo, hi);
      double a_sq = analytic_error(Mapping::sqrt(), lo, hi);
      REQUIRE(e_sq < e_uni);
      REQUIRE(e_uni <= a_uni);
      REQUIRE(e_sq <= a_sq);
      REQUIRE(e_uni / a_uni >= 0.1);
      REQUIRE(e_sq / a_sq >= 0.1);
    }
  }

  SECTION("nonpositive depth rejected") {
    std::vector<double> bad{1.0, -2.0};
    REQUIRE_THROWS_AS(empirical_pipeline_error(Mapping::sqrt(), bad), Error);
  }
}

TEST_CASE("mapping forward/inverse/derivative consistency") {
  SeededRng rng(9);
  for (auto m : {Mapping::uniform(), Mapping::sqrt(), Mapping::log(), Mapping::power(0.3),
                 Mapping::power(0.8)}) {
    for (int i = 0; i < 50; ++i) {
      double y = std::pow(10.0, rng.next_unit() * 4.0 - 2.0);
      REQUIRE(m.inverse(m.forward(y)) == Catch::Approx(y).epsilon(1e-9));
      double h = y * 1e-6;
      double fd = (m.forward(y + h) - m.forward(y - h)) / (2.0 * h);
      REQUIRE(m.derivative(y) == Catch::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("quant report table has zero improvement for uniform") {
  auto rows = quant_report_table({Mapping::uniform(), Mapping::sqrt()}, 0.1, 10.0, SeededRng(1),
                                 20000, 20000);
  REQUIRE(rows[0].improvement_pp == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(rows[1].improvement_pp > 0.2);
  REQUIRE(rows[0].analytic > 0.0);
  REQUIRE(!format_quant_table(rows).empty());
}
