#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "e2p/metrics.hpp"
#include "e2p/rng.hpp"

using namespace e2p;

TEST_CASE("absrel fixtures") {
  std::vector<double> y{1.0};
  REQUIRE(absrel(y, y) == 0.0);
  REQUIRE(absrel({1.1}, {1.0}) == Catch::Approx(0.1).epsilon(1e-9));

  // pre-alignment 2x scaling is absorbed by the alignment step
  SeededRng rng(1);
  std::vector<double> gt(32), pred(32);
  for (auto& v : gt) v = 1.0 + 9.0 * rng.next_unit();
  for (size_t i = 0; i < gt.size(); ++i) pred[i] = 2.0 * gt[i];
  DepthMetrics m = depth_metrics(pred, gt);
  REQUIRE(m.absrel == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(m.delta1 == 1.0);
  REQUIRE(m.fit.s == Catch::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("absrel is exactly affine invariant through alignment") {
  SeededRng rng(2);
  std::vector<double> gt(64), pred(64);
  for (auto& v : gt) v = 0.5 + 9.0 * rng.next_unit();
  for (size_t i = 0; i < gt.size(); ++i) pred[i] = gt[i] + 0.3 * rng.next_gaussian();
  double base = depth_metrics(pred, gt).absrel;
  for (int trial = 0; trial < 20; ++trial) {
    double a = 0.1 + 9.9 * rng.next_unit(), b = -5.0 + 10.0 * rng.next_unit();
    std::vector<double> re(pred.size());
    for (size_t i = 0; i < re.size(); ++i) re[i] = a * pred[i] + b;
    REQUIRE(depth_metrics(re, gt).absrel == Catch::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("delta1 threshold is strict") {
  REQUIRE(delta1({1.0, 1.3}, {1.0, 1.0}) == Catch::Approx(0.5));
  REQUIRE(delta1({1.25}, {1.0}) == 0.0);          // ratio exactly 1.25 excluded
  REQUIRE(delta1({1.2499999}, {1.0}) == 1.0);
  REQUIRE(delta1({-0.5}, {1.0}) == 0.0);          // nonpositive prediction fails
  REQUIRE_THROWS_AS(delta1({1.0}, {-1.0}), Error);
}

TEST_CASE("delta1 decays monotonically under growing noise") {
  SeededRng rng(3);
  std::vector<double> gt(4096);
  for (auto& v : gt) v = 1.0 + 9.0 * rng.next_unit();
  double prev = 1.1;
  for (double sigma : {0.0, 0.2, 0.5, 1.0, 2.0, 4.0}) {
    SeededRng nrng(4);
    std::vector<double> pred(gt.size());
    for (size_t i = 0; i < gt.size(); ++i) pred[i] = gt[i] + sigma * nrng.next_gaussian();
    double d = delta1(pred, gt);
    REQUIRE(d <= prev + 1e-12);
    prev = d;
  }
}

TEST_CASE("normal metrics fixtures") {
  // identical fields
  std::vector<double> n{0, 0, 1, 1, 0, 0};
  NormalMetrics same = normal_metrics(n, n);
  REQUIRE(same.mean_deg == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(same.pct_11_25 == 1.0);

  // all pixels at exactly 90 degrees
  std::vector<double> a{0, 0, 1, 0, 0, 1}, b{1, 0, 0, 0, 1, 0};
  NormalMetrics ninety = normal_metrics(b, a);
  REQUIRE(ninety.mean_deg == Catch::Approx(90.0).epsilon(1e-12));
  REQUIRE(ninety.pct_11_25 == 0.0);

  // half at 5 degrees, half at 20 -> mean 12.5, fraction 0.5
  auto tilted = [](double deg) {
    double r = deg * M_PI / 180.0;
    return std::vector<double>{std::sin(r), 0.0, std::cos(r)};
  };
  std::vector<double> gt{0, 0, 1, 0, 0, 1};
  std::vector<double> pred;
  for (double deg : {5.0, 20.0})
    for (double v : tilted(deg)) pred.push_back(v);
  NormalMetrics mix = normal_metrics(pred, gt);
  REQUIRE(mix.mean_deg == Catch::Approx(12.5).epsilon(1e-9));
  REQUIRE(mix.pct_11_25 == Catch::Approx(0.5));
}

TEST_CASE("matting metrics fixtures") {
  SECTION("identical maps score zero everywhere") {
    DenseMap a(10, 10, 1, Task::Matting, {0.0, 1.0});
    SeededRng rng(5);
    for (auto& v : a.data) v = float(rng.next_unit());
    MattingMetrics m = matting_metrics(a, a);
    REQUIRE(m.mse == 0.0);
    REQUIRE(m.mad == 0.0);
    REQUIRE(m.sad == 0.0);
    REQUIRE(m.grad == 0.0);
    REQUIRE(m.conn == 0.0);
  }

  SECTION("constant offset 0.1 on 100 pixels") {
    DenseMap gt(10, 10, 1, Task::Matting, {0.0, 1.0});
    DenseMap pred = gt;
    for (auto& v : gt.data) v = 0.4f;
    for (auto& v : pred.data) v = 0.5f;
    MattingMetrics m = matting_metrics(pred, gt);
    REQUIRE(m.mse == Catch::Approx(0.01).epsilon(1e-6));
    REQUIRE(m.mad == Catch::Approx(0.1).epsilon(1e-6));
    REQUIRE(m.sad == Catch::Approx(10.0 * 1e-3).epsilon(1e-6));
    // flat maps have zero gradients regardless of offset
    REQUIRE(m.grad == Catch::Approx(0.0).margin(1e-12));
  }

  SECTION("gradient metric reacts to edges, not uniform shifts") {
    DenseMap gt(16, 16, 1, Task::Matting, {0.0, 1.0});
    DenseMap pred(16, 16, 1, Task::Matting, {0.0, 1.0});
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        gt.at(y, x, 0) = x < 8 ? 1.0f : 0.0f;
        pred.at(y, x, 0) = x < 10 ? 1.0f : 0.0f;  // edge displaced
      }
    REQUIRE(matting_metrics(pred, gt).grad > 0.0);
  }

  SECTION("range violation rejected") {
    DenseMap a(2, 2, 1, Task::Matting, {0.0, 1.0});
    DenseMap b = a;
    b.data[0] = 1.5f;
    REQUIRE_THROWS_AS(matting_metrics(b, a), Error);
  }
}

TEST_CASE("connectivity error penalizes disconnected prediction blobs") {
  DenseMap gt(16, 16, 1, Task::Matting, {0.0, 1.0});
  DenseMap pred(16, 16, 1, Task::Matting, {0.0, 1.0});
  // ground truth: one solid block; prediction: same block plus a far blob
  for (int y = 4; y < 12; ++y)
    for (int x = 0; x < 6; ++x) gt.at(y, x, 0) = 1.0f;
  pred.data = gt.data;
  for (int y = 4; y < 8; ++y)
    for (int x = 12; x < 16; ++x) pred.at(y, x, 0) = 1.0f;
  MattingMetrics m = matting_metrics(pred, gt);
  REQUIRE(m.conn > 0.0);
}

TEST_CASE("avg rank") {
  SECTION("dominating method ranks 1.0") {
    std::vector<MetricColumn> cols(3);
    for (auto& c : cols) c.lower_is_better = true;
    cols[0].values = {std::optional<double>(1.0), 2.0, 3.0};
    cols[1].values = {std::optional<double>(0.1), 0.5, 0.9};
    cols[2].values = {std::optional<double>(5.0), 6.0, 7.0};
    auto ranks = avg_rank(cols, 3);
    REQUIRE(ranks[0] == Catch::Approx(1.0));
    REQUIRE(ranks[2] == Catch::Approx(3.0));
  }

  SECTION("two methods splitting wins evenly over 2 columns both get 1.5") {
    std::vector<MetricColumn> cols(2);
    cols[0].lower_is_better = true;
    cols[0].values = {std::optional<double>(1.0), 2.0};
    cols[1].lower_is_better = true;
    cols[1].values = {std::optional<double>(2.0), 1.0};
    auto ranks = avg_rank(cols, 2);
    REQUIRE(ranks[0] == Catch::Approx(1.5));
    REQUIRE(ranks[1] == Catch::Approx(1.5));
  }

  SECTION("hand table with ties, a higher-better column, and a missing entry") {
    // col1 (lower): {1,2,3}        -> ranks 1,2,3
    // col2 (lower): {5,4,6}        -> ranks 2,1,3
    // col3 (lower): {2,2,1}        -> tie at 2.5, 2.5; winner 1
    // col4 (higher): {miss, 2, 1}  -> 2 best (rank 1), 1 rank 2, missing last
    std::vector<MetricColumn> cols(4);
    cols[0].lower_is_better = true;
    cols[0].values = {std::optional<double>(1.0), 2.0, 3.0};
    cols[1].lower_is_better = true;
    cols[1].values = {std::optional<double>(5.0), 4.0, 6.0};
    cols[2].lower_is_better = true;
    cols[2].values = {std::optional<double>(2.0), 2.0, 1.0};
    cols[3].lower_is_better = false;
    cols[3].values = {std::nullopt, std::optional<double>(2.0), 1.0};
    auto ranks = avg_rank(cols, 3);
    REQUIRE(ranks[0] == Catch::Approx((1.0 + 2.0 + 2.5 + 3.0) / 4.0).epsilon(1e-12));
    REQUIRE(ranks[1] == Catch::Approx((2.0 + 1.0 + 2.5 + 1.0) / 4.0).epsilon(1e-12));
    REQUIRE(ranks[2] == Catch::Approx((3.0 + 3.0 + 1.0 + 2.0) / 4.0).epsilon(1e-12));
  }

  SECTION("brute-force ranking oracle on random tables") {
    SeededRng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
      size_t n = 2 + rng.next_u64() % 4;
      std::vector<MetricColumn> cols(3);
      for (auto& c : cols) {
        c.lower_is_better = rng.next_unit() < 0.5;
        for (size_t i = 0; i < n; ++i)
          c.values.push_back(std::optional<double>(double(1 + rng.next_u64() % 5)));
      }
      auto ranks = avg_rank(cols, n);
      // oracle: rank of method i in a column = 1 + #strictly better
      //         + (#tied-with-me - 1)/2, direction folded in
      for (size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (const auto& c : cols) {
          double vi = c.lower_is_better ? *c.values[i] : -*c.values[i];
          int better = 0, tied = 0;
          for (size_t j = 0; j < n; ++j) {
            double vj = c.lower_is_better ? *c.values[j] : -*c.values[j];
            if (vj < vi) ++better;
            if (vj == vi) ++tied;
          }
          acc += 1.0 + better + (tied - 1) / 2.0;
        }
        REQUIRE(ranks[i] == Catch::Approx(acc / 3.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("eval result serializes to CSV") {
  EvalResult r;
  r.task = Task::Depth;
  r.values["absrel"] = 0.05;
  r.values["delta1"] = 0.97;
  REQUIRE(eval_csv_header(r) == "image,absrel,delta1");
  REQUIRE(eval_csv_row("00001", r) == "00001,0.05,0.97");
}
