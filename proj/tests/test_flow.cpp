#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "e2p/flow.hpp"
#include "e2p/rng.hpp"

using namespace e2p;

namespace {

DenseMap filled(int h, int w, int c, float v) {
  DenseMap m(h, w, c);
  for (auto& x : m.data) x = v;
  return m;
}

}  // namespace

TEST_CASE("interpolate endpoints and linearity") {
  SeededRng rng(1);
  DenseMap z0 = gaussian_noise(rng, 8, 8, 3);
  DenseMap z1 = gaussian_noise(rng, 8, 8, 3);

  REQUIRE(interpolate(z0, z1, 0.0).data == z0.data);
  REQUIRE(interpolate(z0, z1, 1.0).data == z1.data);

  DenseMap zeros = filled(4, 4, 1, 0.0f), twos = filled(4, 4, 1, 2.0f);
  DenseMap mid = interpolate(zeros, twos, 0.25);
  for (float v : mid.data) REQUIRE(v == 0.5f);

  // symmetry: lerp(a,b,t) + lerp(b,a,t) == a + b
  DenseMap f = interpolate(z0, z1, 0.3), r = interpolate(z1, z0, 0.3);
  for (size_t i = 0; i < f.data.size(); ++i)
    REQUIRE(f.data[i] + r.data[i] ==
            Catch::Approx(z0.data[i] + z1.data[i]).margin(1e-6));

  DenseMap small(2, 2, 1);
  REQUIRE_THROWS_AS(interpolate(z0, small, 0.5), Error);
}

TEST_CASE("velocity target is z1 - z0 and closes the path identity") {
  SeededRng rng(2);
  DenseMap z0 = gaussian_noise(rng, 6, 6, 3);
  DenseMap z1 = gaussian_noise(rng, 6, 6, 3);

  DenseMap v = velocity_target(z0, z0);
  for (float x : v.data) REQUIRE(x == 0.0f);

  DenseMap ones = filled(3, 3, 1, 1.0f), threes = filled(3, 3, 1, 3.0f);
  for (float x : velocity_target(ones, threes).data) REQUIRE(x == 2.0f);

  // z_t + (1-t) v == z1 for all t
  v = velocity_target(z0, z1);
  for (double t : {0.0, 0.25, 0.7, 1.0}) {
    DenseMap zt = interpolate(z0, z1, t);
    for (size_t i = 0; i < zt.data.size(); ++i)
      REQUIRE(double(zt.data[i]) + (1.0 - t) * v.data[i] ==
              Catch::Approx(z1.data[i]).margin(1e-5));
  }
}

TEST_CASE("multires noise degenerate cases reduce to white noise") {
  NoiseSchedule sched;
  sched.levels = 1;
  sched.persistence_0 = 0.9;
  SeededRng a(42), b(42);
  DenseMap one_level = multires_noise(a, 16, 16, 3, sched, 0.0);
  DenseMap white = gaussian_noise(b, 16, 16, 3);
  REQUIRE(one_level.data == white.data);

  NoiseSchedule four;
  SeededRng c(42), d(42);
  DenseMap annealed = multires_noise(c, 16, 16, 3, four, 1.0);  // t=1: persistence 0
  DenseMap white2 = gaussian_noise(d, 16, 16, 3);
  REQUIRE(annealed.data == white2.data);
}

TEST_CASE("multires noise pooled variance stays near 1") {
  NoiseSchedule sched;  // levels 4, persistence 0.7
  double acc = 0.0, acc2 = 0.0;
  size_t n = 0;
  SeededRng rng(7);
  for (int s = 0; s < 32; ++s) {  // 32 x 64x64 = 1.3e5 pixels
    SeededRng sr = rng.split(s);
    DenseMap m = multires_noise(sr, 64, 64, 1, sched, 0.0);
    for (float v : m.data) {
      acc += v;
      acc2 += double(v) * v;
      ++n;
    }
  }
  double mean = acc / double(n);
  double var = acc2 / double(n) - mean * mean;
  REQUIRE(var > 0.96);
  REQUIRE(var < 1.04);
}

TEST_CASE("multires noise is reproducible and spatially correlated at t=0") {
  NoiseSchedule sched;
  SeededRng a(5), b(5);
  DenseMap m1 = multires_noise(a, 32, 32, 1, sched, 0.0);
  DenseMap m2 = multires_noise(b, 32, 32, 1, sched, 0.0);
  REQUIRE(m1.data == m2.data);

  // coarse octaves induce positive neighbor correlation, absent at t=1
  auto neighbor_corr = [](const DenseMap& m) {
    double num = 0, den = 0;
    for (int y = 0; y < m.height; ++y)
      for (int x = 0; x + 1 < m.width; ++x) {
        num += double(m.at(y, x, 0)) * m.at(y, x + 1, 0);
        den += double(m.at(y, x, 0)) * m.at(y, x, 0);
      }
    return num / den;
  };
  SeededRng c(5);
  DenseMap white = multires_noise(c, 32, 32, 1, sched, 1.0);
  REQUIRE(neighbor_corr(m1) > 0.2);
  REQUIRE(std::abs(neighbor_corr(white)) < 0.15);
}

TEST_CASE("euler sampler with the constant-velocity oracle") {
  SeededRng rng(11);
  DenseMap z0 = gaussian_noise(rng, 8, 8, 3);
  DenseMap z1 = gaussian_noise(rng, 8, 8, 3);
  DenseMap v = velocity_target(z0, z1);

  VelocityFn oracle = [&](const DenseMap&, const std::vector<DenseMap>&, double) { return v; };

  SECTION("steps = 1 lands exactly on z1") {
    DenseMap out = euler_sample(oracle, z0, {}, 1);
    for (size_t i = 0; i < out.data.size(); ++i)
      REQUIRE(double(out.data[i]) == Catch::Approx(double(z0.data[i]) + double(v.data[i])));
  }

  SECTION("steps = 25 matches within 1e-6 (constant field is integrated exactly)") {
    DenseMap out = euler_sample(oracle, z0, {}, 25);
    for (size_t i = 0; i < out.data.size(); ++i)
      REQUIRE(out.data[i] == Catch::Approx(z1.data[i]).margin(1e-6));
  }

  SECTION("null model leaves z0 untouched") {
    VelocityFn null_model = [&](const DenseMap& z, const std::vector<DenseMap>&, double) {
      DenseMap out(z.height, z.width, z.channels);
      return out;
    };
    for (int steps : {1, 7}) {
      DenseMap out = euler_sample(null_model, z0, {}, steps);
      REQUIRE(out.data == z0.data);
    }
  }

  SECTION("shape-mismatched model output is rejected") {
    VelocityFn bad = [&](const DenseMap&, const std::vector<DenseMap>&, double) {
      return DenseMap(2, 2, 1);
    };
    REQUIRE_THROWS_AS(euler_sample(bad, z0, {}, 1), Error);
    REQUIRE_THROWS_AS(euler_sample(oracle, z0, {}, 0), Error);
  }
}

TEST_CASE("fixed seed gives bit-identical z0 and sampler outputs") {
  NoiseSchedule sched;
  auto run_once = [&]() {
    SeededRng rng = SeededRng(1234).split(99);
    DenseMap z0 = multires_noise(rng, 16, 16, 3, sched, 0.0);
    VelocityFn decay = [](const DenseMap& z, const std::vector<DenseMap>&, double t) {
      DenseMap v(z.height, z.width, z.channels);
      for (size_t i = 0; i < v.data.size(); ++i)
        v.data[i] = float(-0.5 * z.data[i] + 0.1 * t);
      return v;
    };
    return euler_sample(decay, z0, {}, 4);
  };
  DenseMap a = run_once(), b = run_once();
  REQUIRE(a.data == b.data);
}
