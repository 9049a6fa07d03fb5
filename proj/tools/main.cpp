// e2p: deterministic flow-matching dense-perception toolkit CLI.
//
// Subcommands: quant-analyze, gen-data, train, infer, eval, steps-sweep,
// grad-check. Every command with the same flags and seed produces
// byte-identical primary outputs; runs write their fully resolved
// configuration next to their outputs.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "e2p/dataset.hpp"
#include "e2p/losses.hpp"
#include "e2p/metrics.hpp"
#include "e2p/quant_error.hpp"
#include "e2p/svg.hpp"
#include "e2p/synthdata.hpp"
#include "e2p/train.hpp"

namespace fs = std::filesystem;
using namespace e2p;

namespace {

struct RangeSpec {
  double lo = 0.1;
  double hi = 10.0;
};

RangeSpec parse_range(const std::string& s) {
  auto colon = s.find(':');
  require(colon != std::string::npos, ErrorCategory::InvalidArgument,
          "range must be LO:HI, got '" + s + "'");
  RangeSpec r{std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
  require(r.lo > 0.0 && r.hi > r.lo, ErrorCategory::BadRange, "need 0 < LO < HI");
  return r;
}

Task parse_task(const std::string& s) {
  if (s == "depth") return Task::Depth;
  if (s == "normal") return Task::Normal;
  if (s == "matting") return Task::Matting;
  fail(ErrorCategory::InvalidArgument, "task must be depth|normal|matting");
}

std::vector<int> parse_steps_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  require(!out.empty(), ErrorCategory::InvalidArgument, "empty steps list");
  return out;
}

/// Reproducibility receipt: the fully resolved settings for this run.
void write_receipt(const fs::path& out_dir, const std::string& command,
                   const std::map<std::string, std::string>& kv) {
  fs::create_directories(out_dir);
  std::ofstream os(out_dir / "run_config.txt");
  os << "command=" << command << "\n";
  for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
}

DenseMap decode_prediction(Task task, const DenseMap& latent, const DepthEncoding& enc) {
  switch (task) {
    case Task::Depth:
      return depth_decode(latent, enc);
    case Task::Normal: {
      DenseMap out(latent.height, latent.width, 3, Task::Normal, {-1.0, 1.0});
      for (int y = 0; y < latent.height; ++y)
        for (int x = 0; x < latent.width; ++x) {
          double v[3];
          double n2 = 0;
          for (int c = 0; c < 3; ++c) {
            v[c] = latent.at(y, x, c);
            n2 += v[c] * v[c];
          }
          double len = std::sqrt(n2);
          for (int c = 0; c < 3; ++c)
            out.at(y, x, c) = float(len > 1e-12 ? v[c] / len : (c == 2 ? 1.0 : 0.0));
        }
      return out;
    }
    case Task::Matting: {
      DenseMap out(latent.height, latent.width, 1, Task::Matting, {0.0, 1.0});
      for (int y = 0; y < latent.height; ++y)
        for (int x = 0; x < latent.width; ++x) {
          double mean = 0;
          for (int c = 0; c < 3; ++c) mean += latent.at(y, x, c);
          out.at(y, x, 0) = float(std::clamp(mean / 3.0 * 0.5 + 0.5, 0.0, 1.0));
        }
      return out;
    }
    default:
      fail(ErrorCategory::InvalidArgument, "cannot decode this task");
  }
}

/// Runs inference over a dataset dir and writes one prediction map per
/// image. Depth decodes through the per-image anchors of the ground-truth
/// sidecar chain (computed from the stored depth map; the downstream
/// evaluation is scale/shift invariant anyway).
void infer_dataset(const VelocityNet& net, const CheckpointMeta& meta, const std::string& data,
                   const std::string& out_dir, int steps, uint64_t seed) {
  auto images = load_images(data, meta.task);
  fs::create_directories(out_dir);
  for (const auto& img : images) {
    DenseMap latent = infer_latent(net, img.rgb, img.prompt, steps, seed);
    DepthEncoding enc;
    if (meta.task == Task::Depth) enc = depth_encode(img.target, meta.mapping).enc;
    DenseMap pred = decode_prediction(meta.task, latent, enc);
    std::string path = (fs::path(out_dir) / (img.id + ".dtf")).string();
    write_dtf(pred, path, false);
    DtfMeta dm{pred.task, pred.range, {}, {}};
    if (meta.task == Task::Depth) {
      dm.enc_p2 = enc.p_lo;
      dm.enc_p98 = enc.p_hi;
    }
    write_meta(dm, path);
  }
}

struct EvalSummary {
  EvalResult aggregate;
  std::vector<std::pair<std::string, EvalResult>> per_image;
};

EvalSummary eval_dataset(const std::string& pred_dir, const std::string& gt_dir, Task task) {
  auto images = load_images(gt_dir, task);
  EvalSummary summary;
  summary.aggregate.task = task;
  summary.aggregate.sample_count = 0;
  for (const auto& img : images) {
    std::string pred_path = (fs::path(pred_dir) / (img.id + ".dtf")).string();
    DenseMap pred = read_dtf(pred_path);
    EvalResult r;
    r.task = task;
    switch (task) {
      case Task::Depth: {
        std::vector<double> p(pred.data.begin(), pred.data.end());
        std::vector<double> g(img.target.data.begin(), img.target.data.end());
        DepthMetrics m = depth_metrics(p, g);
        r.values["absrel"] = m.absrel;
        r.values["delta1"] = m.delta1;
        break;
      }
      case Task::Normal: {
        std::vector<double> p(pred.data.begin(), pred.data.end());
        std::vector<double> g(img.target.data.begin(), img.target.data.end());
        NormalMetrics m = normal_metrics(p, g);
        r.values["mean_deg"] = m.mean_deg;
        r.values["pct_11_25"] = m.pct_11_25;
        break;
      }
      case Task::Matting: {
        MattingMetrics m = matting_metrics(pred, img.target);
        r.values["mse"] = m.mse;
        r.values["mad"] = m.mad;
        r.values["sad"] = m.sad;
        r.values["grad"] = m.grad;
        r.values["conn"] = m.conn;
        break;
      }
      default:
        fail(ErrorCategory::InvalidArgument, "unsupported eval task");
    }
    for (const auto& [k, v] : r.values) summary.aggregate.values[k] += v;
    summary.aggregate.sample_count += 1;
    summary.per_image.emplace_back(img.id, std::move(r));
  }
  for (auto& [k, v] : summary.aggregate.values) v /= summary.aggregate.sample_count;
  return summary;
}

void print_eval_table(const EvalSummary& s, std::ostream& os) {
  os << "metric          mean_over_" << s.aggregate.sample_count << "_images\n";
  for (const auto& [k, v] : s.aggregate.values) {
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%-14s %.6f\n", k.c_str(), v);
    os << buf;
  }
}

void write_eval_csv(const EvalSummary& s, const std::string& path) {
  std::ofstream os(path);
  require(bool(os), ErrorCategory::IoFailure, "cannot open " + path);
  os << eval_csv_header(s.aggregate) << "\n";
  for (const auto& [name, r] : s.per_image) os << eval_csv_row(name, r) << "\n";
  os << eval_csv_row("aggregate", s.aggregate) << "\n";
}

// --- grad-check ------------------------------------------------------------

double fd_scalar(const std::function<double(const std::vector<double>&)>& f,
                 std::vector<double> x, size_t i) {
  double h = 1e-6 * std::max(1.0, std::abs(x[i]));
  double keep = x[i];
  x[i] = keep + h;
  double fp = f(x);
  x[i] = keep - h;
  double fm = f(x);
  return (fp - fm) / (2.0 * h);
}

bool check_loss_gradient(const std::string& name,
                         const std::function<LossGrad(const std::vector<double>&)>& loss,
                         const std::vector<double>& x0, double tol, std::ostream& os) {
  LossGrad lg = loss(x0);
  double worst = 0.0;
  auto value = [&](const std::vector<double>& x) { return loss(x).value; };
  for (size_t i = 0; i < x0.size(); ++i) {
    double fd = fd_scalar(value, x0, i);
    double denom = std::max({std::abs(fd), std::abs(lg.grad[i]), 1e-8});
    worst = std::max(worst, std::abs(fd - lg.grad[i]) / denom);
  }
  bool ok = worst < tol;
  char buf[120];
  std::snprintf(buf, sizeof(buf), "%-28s max_rel_err %.3e   %s\n", name.c_str(), worst,
                ok ? "PASS" : "FAIL");
  os << buf;
  return ok;
}

int cmd_grad_check() {
  std::ostream& os = std::cout;
  bool all_ok = true;
  SeededRng rng(2024);

  {
    std::vector<double> vt(27), vp(27);
    for (auto& v : vt) v = rng.next_gaussian();
    for (auto& v : vp) v = rng.next_gaussian();
    all_ok &= check_loss_gradient(
        "fm_loss", [&](const std::vector<double>& x) { return fm_loss(x, vt); }, vp, 1e-6, os);
  }
  {
    std::vector<double> y(16), y_hat(16);
    for (auto& v : y) v = 1.0 + 8.0 * rng.next_unit();
    for (size_t i = 0; i < y.size(); ++i) y_hat[i] = 1.3 * y[i] + 0.4 * rng.next_gaussian();
    all_ok &= check_loss_gradient(
        "ssi_l1_depth",
        [&](const std::vector<double>& x) { return ssi_l1_depth(x, y); }, y_hat, 1e-4, os);
  }
  {
    std::vector<double> n, n_hat;
    for (int p = 0; p < 5; ++p) {
      double a[3], b[3], an = 0;
      for (int c = 0; c < 3; ++c) {
        a[c] = rng.next_gaussian();
        b[c] = rng.next_gaussian();
        an += a[c] * a[c];
      }
      for (int c = 0; c < 3; ++c) {
        n.push_back(a[c] / std::sqrt(an));
        n_hat.push_back(b[c]);
      }
    }
    all_ok &= check_loss_gradient(
        "angular_loss",
        [&](const std::vector<double>& x) { return angular_loss(x, n); }, n_hat, 1e-4, os);
  }
  {
    std::vector<double> gt(12), pred(12);
    std::vector<uint8_t> tri(12);
    for (size_t i = 0; i < gt.size(); ++i) {
      gt[i] = rng.next_unit();
      pred[i] = gt[i] + (rng.next_unit() > 0.5 ? 0.25 : -0.25);
      tri[i] = i % 2;
    }
    all_ok &= check_loss_gradient(
        "matting_region_l1",
        [&](const std::vector<double>& x) { return matting_region_l1(x, gt, tri); }, pred, 1e-6,
        os);
  }

  // primitive tape ops in double precision
  auto tape_check = [&](const std::string& name,
                        const std::function<int(Tape<double>&, int)>& build,
                        std::vector<int> shape) {
    ADTensor<double> x(shape);
    for (auto& v : x.v) v = rng.next_gaussian();
    Tape<double> tape;
    int xid = tape.leaf(x, true);
    tape.backward(tape.mean(build(tape, xid)));
    ADTensor<double> grad = tape.grad(xid);
    double worst = 0.0;
    for (size_t i = 0; i < x.numel(); ++i) {
      double h = 1e-6 * std::max(1.0, std::abs(x.v[i]));
      auto eval = [&](double v) {
        ADTensor<double> xp = x;
        xp.v[i] = v;
        Tape<double> t;
        int id = t.leaf(xp, true);
        return t.value(t.mean(build(t, id))).v[0];
      };
      double fd = (eval(x.v[i] + h) - eval(x.v[i] - h)) / (2.0 * h);
      double denom = std::max({std::abs(fd), std::abs(grad.v[i]), 1e-8});
      worst = std::max(worst, std::abs(fd - grad.v[i]) / denom);
    }
    bool ok = worst < 1e-5;
    char buf[120];
    std::snprintf(buf, sizeof(buf), "%-28s max_rel_err %.3e   %s\n", ("op:" + name).c_str(),
                  worst, ok ? "PASS" : "FAIL");
    os << buf;
    all_ok &= ok;
  };

  ADTensor<double> w({2, 3, 3, 3});
  for (auto& v : w.v) v = rng.next_gaussian() * 0.5;
  ADTensor<double> bias({3});
  for (auto& v : bias.v) v = rng.next_gaussian();
  ADTensor<double> other({4, 4, 3});
  for (auto& v : other.v) v = rng.next_gaussian();

  tape_check("add", [&](Tape<double>& t, int x) { return t.add(x, t.leaf(other)); }, {4, 4, 3});
  tape_check("sub", [&](Tape<double>& t, int x) { return t.sub(x, t.leaf(other)); }, {4, 4, 3});
  tape_check("mul", [&](Tape<double>& t, int x) { return t.mul(x, t.leaf(other)); }, {4, 4, 3});
  tape_check("relu", [&](Tape<double>& t, int x) { return t.relu(x); }, {4, 4, 3});
  tape_check("conv3x3", [&](Tape<double>& t, int x) { return t.conv3x3(x, t.leaf(w)); },
             {4, 4, 3});
  tape_check("add_bias", [&](Tape<double>& t, int x) { return t.add_bias(x, t.leaf(bias)); },
             {4, 4, 3});
  tape_check("concat_c",
             [&](Tape<double>& t, int x) { return t.concat_c({x, t.leaf(other)}); }, {4, 4, 3});
  tape_check("sum", [&](Tape<double>& t, int x) { return t.sum(x); }, {4, 4, 3});

  // atan2 vs arccos contrast near collinearity
  os << "\ndot            atan2_grad    arccos_grad\n";
  std::vector<double> a{1, 0, 0};
  double sup_atan = 0, sup_acos = 0;
  for (int k = 4; k <= 9; ++k) {
    double d = 1.0 - std::pow(10.0, -double(k));
    std::vector<double> b{d, std::sqrt(1.0 - d * d), 0.0};
    auto norm3 = [](const std::vector<double>& g) {
      return std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
    };
    double ga = norm3(angular_loss(b, a).grad);
    double gc = norm3(arccos_loss_reference(b, a).grad);
    sup_atan = std::max(sup_atan, ga);
    sup_acos = std::max(sup_acos, gc);
    char buf[120];
    std::snprintf(buf, sizeof(buf), "1 - 1e-%d      %.4e    %.4e\n", k, ga, gc);
    os << buf;
  }
  bool contrast_ok = sup_atan < 10.0 && sup_acos > 1e3;
  os << "gradient-stability contrast        " << (contrast_ok ? "PASS" : "FAIL") << "\n";
  all_ok &= contrast_ok;

  os << (all_ok ? "grad-check: all PASS\n" : "grad-check: FAILURES above\n");
  return all_ok ? 0 : 1;
}

// --- subcommand bodies -------------------------------------------------------

int cmd_quant_analyze(const std::vector<std::string>& ranges,
                      const std::vector<std::string>& mappings, bool power_sweep,
                      uint64_t seed, const std::string& out_dir) {
  std::vector<Mapping> maps;
  for (const auto& m : mappings) maps.push_back(mapping_from_string(m));
  std::vector<QuantReport> all_rows;
  for (const auto& rs : ranges) {
    RangeSpec r = parse_range(rs);
    auto rows = quant_report_table(maps, r.lo, r.hi, SeededRng(seed));
    std::cout << format_quant_table(rows);
    all_rows.insert(all_rows.end(), rows.begin(), rows.end());
  }

  if (power_sweep) {
    std::cout << "\npower sweep (range " << ranges[0] << "):\n";
    RangeSpec r = parse_range(ranges[0]);
    std::vector<double> grid;
    for (double p = 0.25; p <= 1.0 + 1e-9; p += 0.05) grid.push_back(p);
    double best = optimality_scan(grid, r.lo, r.hi);
    for (double p : grid) {
      double err = analytic_error(Mapping::power(p), r.lo, r.hi, 20000);
      char buf[80];
      std::snprintf(buf, sizeof(buf), "p=%.2f  analytic %.6f%%%s\n", p, err * 100.0,
                    p == best ? "   <- argmin" : "");
      std::cout << buf;
    }
  }

  if (!out_dir.empty()) {
    write_receipt(out_dir, "quant-analyze",
                  {{"seed", std::to_string(seed)}});
    std::ofstream os(fs::path(out_dir) / "quant_table.txt");
    os << format_quant_table(all_rows);
    SvgChart chart("analytic relative error", "mapping index", "error (%)");
    std::vector<double> xs, ys;
    for (size_t i = 0; i < all_rows.size(); ++i) {
      xs.push_back(double(i));
      ys.push_back(all_rows[i].analytic * 100.0);
    }
    chart.add_bars("analytic", xs, ys);
    chart.write((fs::path(out_dir) / "quant_analytic.svg").string());
  }
  return 0;
}

int cmd_gen_data(const std::string& out, uint64_t seed, const std::string& range, int n_train,
                 int n_val, int resolution, int max_objects) {
  RangeSpec r = parse_range(range);
  SceneParams params;
  params.resolution = resolution;
  params.max_objects = max_objects;
  params.y_min = r.lo;
  params.y_max = r.hi;
  make_split(SeededRng(seed), n_train, n_val, params, out);
  write_receipt(out, "gen-data",
                {{"seed", std::to_string(seed)},
                 {"range", range},
                 {"n_train", std::to_string(n_train)},
                 {"n_val", std::to_string(n_val)},
                 {"resolution", std::to_string(resolution)},
                 {"max_objects", std::to_string(max_objects)}});
  std::cout << "wrote " << n_train << " train + " << n_val << " val scenes to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& data, const std::string& out, TrainerConfig cfg) {
  auto images = load_images(data, cfg.task);
  cfg.net.with_prompt = cfg.task == Task::Matting;
  auto prepared = prepare_dataset(images, cfg);

  fs::create_directories(out);
  VelocityNet net(cfg.net, SeededRng(cfg.seed));
  std::ofstream csv(fs::path(out) / "loss.csv");
  TrainOutput result = train_loop(net, prepared, cfg, &csv);

  std::string ckpt_path = (fs::path(out) / "model.e2pc").string();
  CheckpointMeta meta{cfg.net, cfg.task, cfg.mapping, uint32_t(result.reports.size())};
  save_checkpoint(net, meta, ckpt_path);

  std::map<std::string, std::string> kv;
  std::istringstream cfg_lines(cfg.serialize());
  std::string line;
  while (std::getline(cfg_lines, line)) {
    auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  kv["data"] = data;
  kv["n_step_resolved"] = std::to_string(result.n_step);
  write_receipt(out, "train", kv);

  SvgChart chart("training losses", "step", "loss");
  std::vector<double> xs, fm, total;
  for (const auto& rep : result.reports) {
    xs.push_back(double(rep.step));
    fm.push_back(rep.l_fm);
    total.push_back(rep.total);
  }
  chart.add_line("l_fm", xs, fm);
  chart.add_line("total", xs, total);
  chart.write((fs::path(out) / "loss.svg").string());

  std::cout << "trained " << result.reports.size() << " steps; checkpoint at " << ckpt_path
            << "\n";
  return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& data, const std::string& out,
              int steps, uint64_t seed) {
  LoadedCheckpoint lc = load_checkpoint(ckpt);
  infer_dataset(lc.net, lc.meta, data, out, steps, seed);
  write_receipt(out, "infer",
                {{"ckpt", ckpt},
                 {"data", data},
                 {"steps", std::to_string(steps)},
                 {"seed", std::to_string(seed)},
                 {"task", to_string(lc.meta.task)},
                 {"mapping", lc.meta.mapping.name()}});
  std::cout << "predictions written to " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& pred, const std::string& data, const std::string& task_name,
             const std::string& out) {
  Task task = parse_task(task_name);
  EvalSummary s = eval_dataset(pred, data, task);
  print_eval_table(s, std::cout);
  if (!out.empty()) {
    fs::create_directories(out);
    write_eval_csv(s, (fs::path(out) / "eval.csv").string());
    write_receipt(out, "eval", {{"pred", pred}, {"data", data}, {"task", task_name}});
  }
  return 0;
}

int cmd_steps_sweep(const std::string& ckpt, const std::string& data, const std::string& steps,
                    const std::string& out, uint64_t seed) {
  LoadedCheckpoint lc = load_checkpoint(ckpt);
  std::vector<int> step_list = parse_steps_list(steps);
  fs::create_directories(out);

  std::vector<double> xs;
  std::map<std::string, std::vector<double>> series;
  std::ofstream table(fs::path(out) / "steps_sweep.txt");
  std::cout << "steps   metrics\n";
  table << "steps   metrics\n";
  for (int s : step_list) {
    std::string pred_dir = (fs::path(out) / ("steps_" + std::to_string(s))).string();
    infer_dataset(lc.net, lc.meta, data, pred_dir, s, seed);
    EvalSummary summary = eval_dataset(pred_dir, data, lc.meta.task);
    xs.push_back(double(s));
    std::ostringstream row;
    row << s << "   ";
    for (const auto& [k, v] : summary.aggregate.values) {
      series[k].push_back(v);
      char buf[64];
      std::snprintf(buf, sizeof(buf), " %s=%.6f", k.c_str(), v);
      row << buf;
    }
    std::cout << row.str() << "\n";
    table << row.str() << "\n";
  }
  SvgChart chart("metric vs inference steps", "steps", "metric");
  for (auto& [k, ys] : series) chart.add_line(k, xs, ys);
  chart.write((fs::path(out) / "steps_sweep.svg").string());
  write_receipt(out, "steps-sweep",
                {{"ckpt", ckpt}, {"data", data}, {"steps", steps}, {"seed", std::to_string(seed)}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic flow-matching dense-perception toolkit"};
  app.require_subcommand(1);
  app.set_config("--config");

  // quant-analyze
  auto* quant = app.add_subcommand("quant-analyze", "analytic + empirical bf16 error tables");
  std::vector<std::string> ranges{"0.1:10", "0.1:80"};
  std::vector<std::string> mappings{"uni", "sqrt"};
  bool power_sweep = false;
  uint64_t seed = 42;
  std::string out_dir;
  quant->add_option("--range", ranges, "depth range LO:HI (repeatable)");
  quant->add_option("--mapping", mappings, "mapping kind (repeatable)");
  quant->add_flag("--power-sweep", power_sweep, "scan Power(p) and mark the argmin");
  quant->add_option("--seed", seed, "sampling seed");
  quant->add_option("--out", out_dir, "optional output directory");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset split");
  std::string gen_out = "dataset";
  std::string gen_range = "0.1:10";
  uint64_t gen_seed = 42;
  int n_train = 100, n_val = 20, resolution = 64, max_objects = 5;
  gen->add_option("--out", gen_out, "output dataset root")->required();
  gen->add_option("--seed", gen_seed, "master seed");
  gen->add_option("--range", gen_range, "depth range LO:HI");
  gen->add_option("--n-train", n_train, "training scenes");
  gen->add_option("--n-val", n_val, "validation scenes");
  gen->add_option("--res", resolution, "image resolution");
  gen->add_option("--max-objects", max_objects, "max objects per scene");

  // train
  auto* train = app.add_subcommand("train", "train the toy velocity net");
  std::string train_data, train_out = "run";
  std::string task_name = "depth", mapping_name = "sqrt";
  TrainerConfig cfg;
  bool use_cons = true;
  train->add_option("--data", train_data, "train split directory")->required();
  train->add_option("--out", train_out, "output directory");
  train->add_option("--task", task_name, "depth|normal|matting");
  train->add_option("--mapping", mapping_name, "uni|sqrt|log|power:P");
  train->add_option("--use-cons", use_cons, "enable the consistency loss");
  train->add_option("--seed", cfg.seed, "training seed");
  train->add_option("--epochs", cfg.epochs, "epochs");
  train->add_option("--batch", cfg.batch, "batch size");
  train->add_option("--lr", cfg.lr, "learning rate");

  // infer
  auto* infer = app.add_subcommand("infer", "run deterministic inference over a dataset");
  std::string in_ckpt, in_data, in_out = "pred";
  int in_steps = 1;
  uint64_t in_seed = 42;
  infer->add_option("--ckpt", in_ckpt, "checkpoint file")->required();
  infer->add_option("--data", in_data, "dataset directory")->required();
  infer->add_option("--out", in_out, "output directory");
  infer->add_option("--steps", in_steps, "Euler steps (default 1)");
  infer->add_option("--seed", in_seed, "noise seed");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate predictions against ground truth");
  std::string ev_pred, ev_data, ev_task = "depth", ev_out;
  eval->add_option("--pred", ev_pred, "prediction directory")->required();
  eval->add_option("--data", ev_data, "ground-truth dataset directory")->required();
  eval->add_option("--task", ev_task, "depth|normal|matting");
  eval->add_option("--out", ev_out, "optional output directory for CSV");

  // steps-sweep
  auto* sweep = app.add_subcommand("steps-sweep", "metric-vs-steps table for a checkpoint");
  std::string sw_ckpt, sw_data, sw_steps = "1,2,4,10,25", sw_out = "sweep";
  uint64_t sw_seed = 42;
  sweep->add_option("--ckpt", sw_ckpt, "checkpoint file")->required();
  sweep->add_option("--data", sw_data, "validation dataset directory")->required();
  sweep->add_option("--steps", sw_steps, "comma-separated step counts");
  sweep->add_option("--out", sw_out, "output directory");
  sweep->add_option("--seed", sw_seed, "noise seed");

  // grad-check
  app.add_subcommand("grad-check", "finite-difference verification of all gradients");

  CLI11_PARSE(app, argc, argv);

  try {
    if (quant->parsed())
      return cmd_quant_analyze(ranges, mappings, power_sweep, seed, out_dir);
    if (gen->parsed())
      return cmd_gen_data(gen_out, gen_seed, gen_range, n_train, n_val, resolution, max_objects);
    if (train->parsed()) {
      cfg.task = parse_task(task_name);
      cfg.mapping = mapping_from_string(mapping_name);
      cfg.use_cons = use_cons;
      return cmd_train(train_data, train_out, cfg);
    }
    if (infer->parsed()) return cmd_infer(in_ckpt, in_data, in_out, in_steps, in_seed);
    if (eval->parsed()) return cmd_eval(ev_pred, ev_data, ev_task, ev_out);
    if (sweep->parsed()) return cmd_steps_sweep(sw_ckpt, sw_data, sw_steps, sw_out, sw_seed);
    return cmd_grad_check();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Unhandled: " << e.what() << "\n";
    return 1;
  }
}
