#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <functional>

#include "e2p/autodiff.hpp"
#include "e2p/net.hpp"
#include "e2p/rng.hpp"

using namespace e2p;
namespace fs = std::filesystem;

namespace {

ADTensor<double> random_tensor(std::vector<int> shape, SeededRng& rng, double scale = 1.0) {
  ADTensor<double> t(std::move(shape));
  for (auto& v : t.v) v = rng.next_gaussian() * scale;
  return t;
}

/// FD check of d mean(f(x)) / dx for a tape-built graph, one input at a time.
double fd_check(const std::function<int(Tape<double>&, int)>& build, ADTensor<double> x) {
  Tape<double> tape;
  int xid = tape.leaf(x, true);
  int out = tape.mean(build(tape, xid));
  tape.backward(out);
  ADTensor<double> grad = tape.grad(xid);

  double worst = 0.0;
  for (size_t i = 0; i < x.numel(); ++i) {
    double h = 1e-6 * std::max(1.0, std::abs(x.v[i]));
    auto eval = [&](double v) {
      ADTensor<double> xp = x;
      xp.v[i] = v;
      Tape<double> t2;
      int id = t2.leaf(xp, true);
      return t2.value(t2.mean(build(t2, id))).v[0];
    };
    double fd = (eval(x.v[i] + h) - eval(x.v[i] - h)) / (2.0 * h);
    double denom = std::max({std::abs(fd), std::abs(grad.v[i]), 1e-8});
    worst = std::max(worst, std::abs(fd - grad.v[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("single-parameter sanity: d(w^2)/dw = 2w") {
  Tape<double> tape;
  ADTensor<double> w({1});
  w.v[0] = 3.0;
  int wid = tape.leaf(w, true);
  int sq = tape.mul(wid, wid);
  tape.backward(tape.sum(sq));
  REQUIRE(tape.grad(wid).v[0] == Catch::Approx(6.0));
}

TEST_CASE("every primitive passes finite-difference verification") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    SeededRng rng(seed);
    ADTensor<double> other = random_tensor({4, 4, 3}, rng);
    ADTensor<double> weight = random_tensor({2, 3, 3, 3}, rng, 0.5);
    ADTensor<double> bias = random_tensor({3}, rng);
    ADTensor<double> mat = random_tensor({5, 4}, rng);

    SECTION("ops, seed " + std::to_string(seed)) {}

    REQUIRE(fd_check([&](Tape<double>& t, int x) { return t.add(x, t.leaf(other)); },
                     random_tensor({4, 4, 3}, rng)) < 1e-7);
    REQUIRE(fd_check([&](Tape<double>& t, int x) { return t.sub(t.leaf(other), x); },
                     random_tensor({4, 4, 3}, rng)) < 1e-7);
    REQUIRE(fd_check([&](Tape<double>& t, int x) { return t.mul(x, t.leaf(other)); },
                     random_tensor({4, 4, 3}, rng)) < 1e-6);
    REQUIRE(fd_check([&](Tape<double>& t, int x) { return t.mul(x, x); },
                     random_tensor({4, 4, 3}, rng)) < 1e-6);
    REQUIRE(fd_check([&](Tape<double>& t, int x) { return t.scale(x, -2.5); },
                     random_tensor({4, 4, 3}, rng)) < 1e-7);
    REQUIRE(fd_check([&](Tape<double>& t, int x) { return t.relu(x); },
                     random_tensor({4, 4, 3}, rng)) < 1e-6);
    REQUIRE(fd_check([&](Tape<double>& t, int x) { return t.sum(x); },
                     random_tensor({4, 4, 3}, rng)) < 1e-7);
    // conv: gradient w.r.t. input and w.r.t. weights (fixed counterpart input)
    ADTensor<double> ximg = random_tensor({4, 4, 3}, rng);
    ADTensor<double> xside = random_tensor({4, 4, 2}, rng);
    ADTensor<double> amat = random_tensor({3, 5}, rng);
    REQUIRE(fd_check([&](Tape<double>& t, int x) { return t.conv3x3(x, t.leaf(weight)); },
                     random_tensor({4, 4, 3}, rng)) < 1e-6);
    REQUIRE(fd_check([&](Tape<double>& t, int w) { return t.conv3x3(t.leaf(ximg), w); },
                     weight) < 1e-6);
    REQUIRE(fd_check([&](Tape<double>& t, int x) { return t.add_bias(x, t.leaf(bias)); },
                     random_tensor({4, 4, 3}, rng)) < 1e-7);
    REQUIRE(fd_check([&](Tape<double>& t, int b) { return t.add_bias(t.leaf(ximg), b); },
                     bias) < 1e-6);
    REQUIRE(fd_check([&](Tape<double>& t, int x) { return t.concat_c({x, t.leaf(xside)}); },
                     random_tensor({4, 4, 3}, rng)) < 1e-7);
    REQUIRE(fd_check([&](Tape<double>& t, int a) { return t.matmul(a, t.leaf(mat)); },
                     random_tensor({3, 5}, rng)) < 1e-6);
    REQUIRE(fd_check([&](Tape<double>& t, int b) { return t.matmul(t.leaf(amat), b); }, mat) <
            1e-6);
  }
}

TEST_CASE("composite graph gradient (conv-relu-conv-mean)") {
  for (uint64_t seed = 100; seed < 105; ++seed) {
    SeededRng rng(seed);
    ADTensor<double> w1 = random_tensor({4, 3, 3, 2}, rng, 0.4);
    ADTensor<double> w2 = random_tensor({1, 3, 3, 4}, rng, 0.4);
    auto net = [&](Tape<double>& t, int x) {
      return t.conv3x3(t.relu(t.conv3x3(x, t.leaf(w1))), t.leaf(w2));
    };
    REQUIRE(fd_check(net, random_tensor({6, 6, 2}, rng)) < 1e-5);
  }
}

TEST_CASE("tape rejects non-finite values with the node id") {
  Tape<double> tape;
  ADTensor<double> bad({2});
  bad.v = {1.0, std::nan("")};
  REQUIRE_THROWS_MATCHES(tape.leaf(bad), Error, Catch::Matchers::Predicate<Error>(
      [](const Error& e) { return e.category() == ErrorCategory::NonFinite; }));
}

TEST_CASE("backward on a disconnected output is rejected") {
  Tape<double> tape;
  ADTensor<double> x({2});
  int xid = tape.leaf(x, false);  // not a parameter
  int out = tape.sum(xid);
  REQUIRE_THROWS_AS(tape.backward(out), Error);
}

TEST_CASE("velocity net forward contracts") {
  NetConfig cfg;
  cfg.widths[0] = 4;
  cfg.widths[1] = 6;
  cfg.widths[2] = 4;
  VelocityNet net(cfg, SeededRng(77));

  DenseMap z_t(16, 16, 3), cx(16, 16, 3);
  SeededRng rng(3);
  for (auto& v : z_t.data) v = float(rng.next_gaussian());
  for (auto& v : cx.data) v = float(rng.next_gaussian());

  SECTION("zero-initialized final layer gives v_pred == 0") {
    DenseMap v = net.predict(z_t, {cx}, 0.3);
    for (float x : v.data) REQUIRE(x == 0.0f);
  }

  SECTION("deterministic and shape preserving") {
    // nudge the final layer so the output is nontrivial
    net.params()[6].value.v[0] = 0.05f;
    DenseMap a = net.predict(z_t, {cx}, 0.5);
    DenseMap b = net.predict(z_t, {cx}, 0.5);
    REQUIRE(a.data == b.data);
    REQUIRE(a.height == 16);
    REQUIRE(a.width == 16);
    REQUIRE(a.channels == 3);
    bool any = false;
    for (float x : a.data) any = any || x != 0.0f;
    REQUIRE(any);
  }

  SECTION("gradients flow to every parameter through the tape") {
    Tape<float> tape;
    auto fn = net.forward(tape, z_t, {cx}, 0.2);
    int loss = tape.mean(tape.mul(fn.v_pred, fn.v_pred));
    tape.backward(loss);
    // zero final layer means zero output, so final-layer weight grads are 0
    // but earlier structure is still wired; just check buffers exist
    for (int id : fn.param_ids) REQUIRE(tape.grad(id).numel() > 0);
  }
}

TEST_CASE("net gradient check against finite differences on a downsized net") {
  // 8x8 input, 4-channel trunk, rebuilt on a double tape with the same
  // weights so finite differences probe the backward math, not f32 rounding
  NetConfig cfg;
  cfg.widths[0] = 4;
  cfg.widths[1] = 4;
  cfg.widths[2] = 4;
  VelocityNet fnet(cfg, SeededRng(5));
  SeededRng wrng(6);
  for (auto& v : fnet.params()[6].value.v) v = float(wrng.next_gaussian() * 0.1);

  std::vector<ADTensor<double>> params;
  for (const auto& p : fnet.params()) {
    ADTensor<double> d(p.value.shape);
    for (size_t i = 0; i < d.numel(); ++i) d.v[i] = p.value.v[i];
    params.push_back(std::move(d));
  }

  SeededRng rng(7);
  ADTensor<double> input({8, 8, cfg.in_channels()});
  for (auto& v : input.v) v = rng.next_gaussian();
  ADTensor<double> target({8, 8, 3});
  for (auto& v : target.v) v = rng.next_gaussian();

  // same wiring as VelocityNet::forward: conv+bias per layer, relu between
  auto loss_and_grads = [&](bool want_grads, std::vector<ADTensor<double>>* grads) {
    Tape<double> tape;
    std::vector<int> pids;
    for (auto& p : params) pids.push_back(tape.leaf(p, true));
    int x = tape.leaf(input);
    size_t n_layers = params.size() / 2;
    for (size_t l = 0; l < n_layers; ++l) {
      x = tape.add_bias(tape.conv3x3(x, pids[2 * l]), pids[2 * l + 1]);
      if (l + 1 < n_layers) x = tape.relu(x);
    }
    int diff = tape.sub(x, tape.leaf(target));
    int loss = tape.mean(tape.mul(diff, diff));
    double value = tape.value(loss).v[0];
    if (want_grads) {
      tape.backward(loss);
      grads->clear();
      for (int id : pids) grads->push_back(tape.grad(id));
    }
    return value;
  };

  std::vector<ADTensor<double>> grads;
  loss_and_grads(true, &grads);

  SeededRng pick(8);
  for (size_t k = 0; k < params.size(); ++k) {
    for (int probe = 0; probe < 3; ++probe) {
      size_t i = pick.next_u64() % params[k].numel();
      double keep = params[k].v[i];
      double h = 1e-6 * std::max(1.0, std::abs(keep));
      params[k].v[i] = keep + h;
      double fp = loss_and_grads(false, nullptr);
      params[k].v[i] = keep - h;
      double fm = loss_and_grads(false, nullptr);
      params[k].v[i] = keep;
      double fd = (fp - fm) / (2.0 * h);
      double got = grads[k].v[i];
      double denom = std::max({std::abs(fd), std::abs(got), 1e-8});
      REQUIRE(std::abs(fd - got) / denom < 1e-3);
    }
  }
}

TEST_CASE("checkpoint round-trip restores forward bit-exactly") {
  NetConfig cfg;
  VelocityNet net(cfg, SeededRng(123));
  SeededRng wrng(9);
  for (auto& v : net.params().back().value.v) v = float(wrng.next_gaussian() * 0.01);
  for (auto& v : net.params()[net.params().size() - 2].value.v)
    v = float(wrng.next_gaussian() * 0.01);

  fs::path dir = fs::temp_directory_path() / "e2p_tests";
  fs::create_directories(dir);
  std::string path = (dir / "ckpt.e2pc").string();
  CheckpointMeta meta{cfg, Task::Depth, Mapping::sqrt(), 1234};
  save_checkpoint(net, meta, path);

  LoadedCheckpoint lc = load_checkpoint(path);
  REQUIRE(lc.meta.step == 1234);
  REQUIRE(lc.meta.task == Task::Depth);
  REQUIRE(lc.meta.mapping.kind == MappingKind::Sqrt);

  DenseMap z_t(8, 8, 3), cx(8, 8, 3);
  SeededRng rng(10);
  for (auto& v : z_t.data) v = float(rng.next_gaussian());
  for (auto& v : cx.data) v = float(rng.next_gaussian());
  DenseMap a = net.predict(z_t, {cx}, 0.1);
  DenseMap b = lc.net.predict(z_t, {cx}, 0.1);
  REQUIRE(a.data == b.data);
}

TEST_CASE("checkpoint corruption and shape mismatch are rejected") {
  NetConfig cfg;
  VelocityNet net(cfg, SeededRng(1));
  fs::path dir = fs::temp_directory_path() / "e2p_tests";
  fs::create_directories(dir);
  std::string path = (dir / "ckpt_bad.e2pc").string();
  save_checkpoint(net, {cfg, Task::Depth, Mapping::sqrt(), 1}, path);

  fs::resize_file(path, fs::file_size(path) / 2);
  REQUIRE_THROWS_MATCHES(load_checkpoint(path), Error, Catch::Matchers::Predicate<Error>(
      [](const Error& e) {
        return e.category() == ErrorCategory::Truncated ||
               e.category() == ErrorCategory::Corrupt;
      }));

  std::string path2 = (dir / "ckpt_shape.e2pc").string();
  save_checkpoint(net, {cfg, Task::Depth, Mapping::sqrt(), 1}, path2);
  NetConfig other = cfg;
  other.widths[1] = cfg.widths[1] * 2;
  VelocityNet target(other, SeededRng(2));
  REQUIRE_THROWS_MATCHES(load_checkpoint_into(target, path2), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.category() == ErrorCategory::ShapeMismatch;
                         }));
}

TEST_CASE("timestep embedding is constant per channel and distinguishes t") {
  auto e1 = VelocityNet::timestep_embedding(4, 4, 4, 0.25);
  auto e2 = VelocityNet::timestep_embedding(4, 4, 4, 0.75);
  for (int c = 0; c < 4; ++c)
    for (size_t px = 0; px < 16; ++px) REQUIRE(e1.v[px * 4 + c] == e1.v[c]);
  REQUIRE(e1.v != e2.v);
}
