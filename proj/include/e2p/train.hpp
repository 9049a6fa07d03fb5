#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "e2p/bf16.hpp"
#include "e2p/dtf.hpp"
#include "e2p/encoding.hpp"
#include "e2p/flow.hpp"
#include "e2p/losses.hpp"
#include "e2p/net.hpp"
#include "e2p/threads.hpp"

namespace e2p {

struct TrainerConfig {
  double lr = 3e-4;
  int batch = 8;
  int64_t n_step = 0;  // steps per epoch; 0 = derive from dataset size
  int epochs = 3;
  uint64_t seed = 42;
  Task task = Task::Depth;
  bool use_cons = true;
  Mapping mapping = Mapping::sqrt();
  NetConfig net;
  NoiseSchedule noise;
  double lambda_eps = 0.001;
  double cons_t_min = 0.0;  // consistency applied for t >= this threshold
  bool differentiate_fit = true;
  double weight_decay = 0.0;

  std::string serialize() const {
    std::ostringstream os;
    os.precision(17);
    os << "lr=" << lr << "\nbatch=" << batch << "\nn_step=" << n_step
       << "\nepochs=" << epochs << "\nseed=" << seed << "\ntask=" << to_string(task)
       << "\nuse_cons=" << (use_cons ? "true" : "false") << "\nmapping=" << mapping.name()
       << "\nlevels=" << noise.levels << "\npersistence=" << noise.persistence_0
       << "\nlambda_eps=" << lambda_eps << "\ncons_t_min=" << cons_t_min
       << "\ndifferentiate_fit=" << (differentiate_fit ? "true" : "false")
       << "\nweight_decay=" << weight_decay << "\n" << net.serialize();
    return os.str();
  }
};

/// One training sample with everything precomputed that does not depend on
/// the timestep: bf16-rounded conditioning and encoded target (the model's
/// BF16 tensor contract), plus the physical ground truth for the
/// consistency loss.
struct PreparedSample {
  DenseMap cx;                  // conditioning image, [-1,1], bf16-rounded
  DenseMap z1;                  // encoded target, bf16-rounded
  DenseMap prompt;              // matting only; empty otherwise
  std::vector<double> gt;       // meters (depth), unit vectors (normal), alpha
  DepthEncoding enc;            // depth only
  std::vector<uint8_t> trimap;  // matting only; 1 = unknown
};

inline DenseMap bf16_map(DenseMap m) {
  for (auto& v : m.data) v = bf16_round(v);
  return m;
}

inline PreparedSample prepare_sample(const DenseMap& rgb, const DenseMap& target,
                                     const DenseMap& prompt, const TrainerConfig& cfg) {
  PreparedSample s;
  s.cx = bf16_map(rgb_normalize(rgb));
  switch (cfg.task) {
    case Task::Depth: {
      EncodedDepth ed = depth_encode(target, cfg.mapping);
      s.z1 = bf16_map(std::move(ed.map));
      s.enc = ed.enc;
      s.gt.assign(target.data.begin(), target.data.end());
      break;
    }
    case Task::Normal: {
      DenseMap n = normal_encode(target);
      s.gt.assign(n.data.begin(), n.data.end());
      s.z1 = bf16_map(std::move(n));
      break;
    }
    case Task::Matting: {
      s.z1 = bf16_map(matting_encode(target));
      s.gt.assign(target.data.begin(), target.data.end());
      s.trimap = trimap_from_alpha(target, 3);
      s.prompt = prompt;
      break;
    }
    default:
      fail(ErrorCategory::InvalidArgument, "unsupported training task");
  }
  return s;
}

namespace traindetail {

/// Inverse of the depth mapping together with its derivative, total on all
/// reals for the mappings the trainer supports.
inline std::pair<double, double> mapping_inverse_with_grad(const Mapping& m, double u) {
  switch (m.kind) {
    case MappingKind::Uniform: return {u, 1.0};
    case MappingKind::Sqrt: return {u * u, 2.0 * u};
    case MappingKind::Log: return {std::exp(u), std::exp(u)};
    case MappingKind::Power: {
      if (u <= 1e-12) return {0.0, 0.0};
      double y = std::pow(u, 1.0 / m.exponent);
      return {y, y / (m.exponent * u)};
    }
  }
  return {u, 1.0};
}

struct SampleWork {
  Tape<float> tape{true};
  VelocityNet::ForwardNodes nodes;
  double t = 0.0;
  double l_fm = 0.0;
  double l_cons = 0.0;
  bool cons_active = false;
  std::vector<double> g_fm;    // dL_fm / dv_pred
  std::vector<double> g_cons;  // dL_cons / dv_pred
  MattingBreakdown breakdown;
};

/// Forward pass plus per-sample loss values and gradients w.r.t. v_pred.
/// The batch lambda is applied later, so this is safe to run in parallel.
inline void forward_sample(const VelocityNet& net, const PreparedSample& s,
                           const TrainerConfig& cfg, SeededRng rng_t, SeededRng rng_noise,
                           SampleWork& w) {
  w.t = rng_t.next_unit();
  DenseMap z0 = multires_noise(rng_noise, s.z1.height, s.z1.width, s.z1.channels, cfg.noise, w.t);
  DenseMap z_t = interpolate(z0, s.z1, w.t);

  std::vector<DenseMap> cond;
  cond.push_back(s.cx);
  if (cfg.net.with_prompt) cond.push_back(s.prompt);
  w.nodes = net.forward(w.tape, z_t, cond, w.t);
  const auto& v_pred = w.tape.value(w.nodes.v_pred).v;

  size_t n = v_pred.size();
  std::vector<double> vp(n), vt(n);
  for (size_t i = 0; i < n; ++i) {
    vp[i] = v_pred[i];
    vt[i] = double(s.z1.data[i]) - double(z0.data[i]);
  }
  LossGrad fm = fm_loss(vp, vt);
  w.l_fm = fm.value;
  w.g_fm = std::move(fm.grad);

  w.cons_active = cfg.use_cons && w.t >= cfg.cons_t_min;
  if (!w.cons_active) return;

  // one-step estimate of the clean latent: z1_hat = z_t + (1-t) v_pred
  double rem = 1.0 - w.t;
  std::vector<double> z1_hat(n);
  for (size_t i = 0; i < n; ++i) z1_hat[i] = double(z_t.data[i]) + rem * vp[i];

  size_t npix = n / 3;
  w.g_cons.assign(n, 0.0);
  switch (cfg.task) {
    case Task::Depth: {
      double span = s.enc.p_hi - s.enc.p_lo;
      std::vector<double> y_hat(npix), dy_du(npix);
      for (size_t p = 0; p < npix; ++p) {
        double mean = (z1_hat[3 * p] + z1_hat[3 * p + 1] + z1_hat[3 * p + 2]) / 3.0;
        double u = s.enc.p_lo + (mean * 0.5 + 0.5) * span;
        auto [y, dy] = mapping_inverse_with_grad(s.enc.mapping, u);
        y_hat[p] = y;
        dy_du[p] = dy;
      }
      LossGrad cons = ssi_l1_depth(y_hat, s.gt, {}, cfg.differentiate_fit);
      w.l_cons = cons.value;
      for (size_t p = 0; p < npix; ++p) {
        double g = cons.grad[p] * dy_du[p] * (span * 0.5) * (1.0 / 3.0) * rem;
        w.g_cons[3 * p] = g;
        w.g_cons[3 * p + 1] = g;
        w.g_cons[3 * p + 2] = g;
      }
      break;
    }
    case Task::Normal: {
      LossGrad cons = angular_loss(z1_hat, s.gt);
      w.l_cons = cons.value;
      for (size_t i = 0; i < n; ++i) w.g_cons[i] = cons.grad[i] * rem;
      break;
    }
    case Task::Matting: {
      std::vector<double> a_hat(npix);
      for (size_t p = 0; p < npix; ++p) {
        double mean = (z1_hat[3 * p] + z1_hat[3 * p + 1] + z1_hat[3 * p + 2]) / 3.0;
        a_hat[p] = mean * 0.5 + 0.5;
      }
      LossGrad cons = matting_region_l1(a_hat, s.gt, s.trimap, &w.breakdown);
      w.l_cons = cons.value;
      for (size_t p = 0; p < npix; ++p) {
        double g = cons.grad[p] * 0.5 * (1.0 / 3.0) * rem;
        w.g_cons[3 * p] = g;
        w.g_cons[3 * p + 1] = g;
        w.g_cons[3 * p + 2] = g;
      }
      break;
    }
    default:
      fail(ErrorCategory::InvalidArgument, "unsupported training task");
  }
}

}  // namespace traindetail

/// Adam with double-precision moments; bias-corrected, decoupled weight
/// decay (off by default).
class Adam {
 public:
  Adam(double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8, double wd = 0.0)
      : lr_(lr), b1_(b1), b2_(b2), eps_(eps), wd_(wd) {}

  void step(std::vector<Param>& params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.value.numel(), 0.0);
        v_.emplace_back(p.value.numel(), 0.0);
      }
    }
    ++t_;
    double bc1 = 1.0 - std::pow(b1_, double(t_));
    double bc2 = 1.0 - std::pow(b2_, double(t_));
    for (size_t k = 0; k < params.size(); ++k) {
      auto& p = params[k];
      for (size_t i = 0; i < p.value.numel(); ++i) {
        double g = p.grad.v[i];
        m_[k][i] = b1_ * m_[k][i] + (1.0 - b1_) * g;
        v_[k][i] = b2_ * v_[k][i] + (1.0 - b2_) * g * g;
        double update = lr_ * (m_[k][i] / bc1) / (std::sqrt(v_[k][i] / bc2) + eps_);
        double val = double(p.value.v[i]) - update - lr_ * wd_ * double(p.value.v[i]);
        p.value.v[i] = float(val);
      }
    }
  }

 private:
  double lr_, b1_, b2_, eps_, wd_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// One optimization step over a batch. Per-sample forward/backward may run
/// on worker threads; gradients reduce in fixed sample order so the whole
/// step is bit-deterministic for a given seed.
inline LossReport train_step(VelocityNet& net, const std::vector<const PreparedSample*>& batch,
                             const TrainerConfig& cfg, int64_t step_index, Adam& opt) {
  require(!batch.empty(), ErrorCategory::InvalidArgument, "empty batch");
  require(cfg.n_step >= 1, ErrorCategory::InvalidArgument, "n_step must be >= 1");
  int b = int(batch.size());
  std::vector<traindetail::SampleWork> work(b);

  parallel_for(b, [&](int i) {
    SeededRng rng_t = SeededRng(cfg.seed).split(uint64_t(step_index) * 2048 + uint64_t(i) * 2 + 0);
    SeededRng rng_n = SeededRng(cfg.seed).split(uint64_t(step_index) * 2048 + uint64_t(i) * 2 + 1);
    traindetail::forward_sample(net, *batch[i], cfg, rng_t, rng_n, work[i]);
  });

  double l_fm = 0.0, l_cons = 0.0;
  int cons_n = 0;
  for (const auto& w : work) {
    l_fm += w.l_fm / b;
    if (w.cons_active) {
      l_cons += w.l_cons;
      ++cons_n;
    }
  }
  if (cons_n > 0) l_cons /= cons_n;
  double lambda =
      cfg.use_cons && cons_n > 0
          ? adaptive_lambda(l_fm, l_cons, step_index, cfg.n_step, cfg.lambda_eps)
          : 0.0;

  parallel_for(b, [&](int i) {
    auto& w = work[i];
    size_t n = w.g_fm.size();
    ADTensor<float> seed(w.tape.value(w.nodes.v_pred).shape);
    for (size_t j = 0; j < n; ++j) {
      double g = w.g_fm[j];
      if (w.cons_active && lambda > 0.0) g += lambda * w.g_cons[j];
      seed.v[j] = float(g / b);
    }
    w.tape.backward(w.nodes.v_pred, &seed);
  });

  // fixed-order reduction into the parameter gradient buffers
  auto& params = net.params();
  for (auto& p : params) std::fill(p.grad.v.begin(), p.grad.v.end(), 0.0f);
  for (int i = 0; i < b; ++i)
    for (size_t k = 0; k < params.size(); ++k) {
      const auto& g = work[i].tape.grad(work[i].nodes.param_ids[k]);
      for (size_t j = 0; j < g.numel(); ++j) params[k].grad.v[j] += g.v[j];
    }
  opt.step(params);

  LossReport rep;
  rep.step = step_index;
  rep.task = cfg.task;
  rep.l_fm = l_fm;
  rep.l_cons = l_cons;
  rep.lambda = lambda;
  rep.total = l_fm + lambda * l_cons;
  if (cfg.task == Task::Matting && !work.empty()) rep.region_breakdown = work[0].breakdown;
  require(std::isfinite(rep.total) && rep.total < 1e6, ErrorCategory::Divergence,
          "training diverged");
  return rep;
}

struct TrainOutput {
  std::vector<LossReport> reports;
  int64_t n_step = 0;
};

/// Full loop: shuffled batches, global step counter, lambda gated to zero
/// through the first epoch by construction of adaptive_lambda.
inline TrainOutput train_loop(VelocityNet& net, const std::vector<PreparedSample>& data,
                              TrainerConfig cfg, std::ostream* csv = nullptr) {
  require(!data.empty(), ErrorCategory::InvalidArgument, "empty dataset");
  int64_t steps_per_epoch = (int64_t(data.size()) + cfg.batch - 1) / cfg.batch;
  if (cfg.n_step == 0) cfg.n_step = steps_per_epoch;
  Adam opt(cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay);
  TrainOutput out;
  out.n_step = cfg.n_step;
  if (csv) *csv << LossReport::csv_header() << "\n";

  int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<size_t> order(data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    SeededRng shuffle_rng = SeededRng(cfg.seed).split(0x5F0F1E00ull + uint64_t(epoch));
    for (size_t i = order.size(); i > 1; --i) {
      size_t j = size_t(shuffle_rng.next_u64() % i);
      std::swap(order[i - 1], order[j]);
    }
    for (size_t start = 0; start < order.size(); start += size_t(cfg.batch)) {
      std::vector<const PreparedSample*> batch;
      for (size_t i = start; i < std::min(order.size(), start + size_t(cfg.batch)); ++i)
        batch.push_back(&data[order[i]]);
      ++step;
      LossReport rep = train_step(net, batch, cfg, step, opt);
      if (csv) *csv << rep.csv_row() << "\n";
      out.reports.push_back(rep);
    }
  }
  return out;
}

/// Deterministic inference: fixed-seed multi-resolution noise at t=0, then
/// Euler integration with the trained net. Returns the raw latent estimate.
inline DenseMap infer_latent(const VelocityNet& net, const DenseMap& rgb, const DenseMap& prompt,
                             int steps, uint64_t seed, const NoiseSchedule& noise = {}) {
  DenseMap cx = bf16_map(rgb_normalize(rgb));
  std::vector<DenseMap> cond;
  cond.push_back(cx);
  if (net.config().with_prompt) cond.push_back(prompt);
  SeededRng rng = SeededRng(seed).split(0x1FE);
  DenseMap z0 = multires_noise(rng, rgb.height, rgb.width, 3, noise, 0.0);
  VelocityFn fn = [&](const DenseMap& z, const std::vector<DenseMap>& c, double t) {
    return net.predict(z, c, t);
  };
  return euler_sample(fn, z0, cond, steps);
}

}  // namespace e2p
