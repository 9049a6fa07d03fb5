#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "e2p/autodiff.hpp"
#include "e2p/dtf.hpp"
#include "e2p/mapping.hpp"
#include "e2p/rng.hpp"
#include "e2p/tensor.hpp"

namespace e2p {

/// Architecture of the stand-in velocity network: a plain stack of 3x3
/// convolutions with ReLU between, ending in a zero-initialized projection
/// to 3 channels. Input is concat(z_t, c_x, [prompt mask], t embedding).
struct NetConfig {
  int widths[3] = {16, 32, 16};
  int t_embed_channels = 4;
  bool with_prompt = false;

  int in_channels() const { return 3 + 3 + (with_prompt ? 1 : 0) + t_embed_channels; }

  std::vector<int> layer_channels() const {
    return {in_channels(), widths[0], widths[1], widths[2], 3};
  }

  std::string serialize() const {
    std::ostringstream os;
    os << "widths=" << widths[0] << "," << widths[1] << "," << widths[2] << "\n"
       << "t_embed=" << t_embed_channels << "\n"
       << "with_prompt=" << (with_prompt ? 1 : 0) << "\n";
    return os.str();
  }
};

/// Named parameter with its gradient buffer.
struct Param {
  std::string name;
  ADTensor<float> value;
  ADTensor<float> grad;
};

inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

class VelocityNet {
 public:
  VelocityNet() = default;

  explicit VelocityNet(const NetConfig& cfg, SeededRng rng) : cfg_(cfg) {
    auto ch = cfg.layer_channels();
    for (size_t l = 0; l + 1 < ch.size(); ++l) {
      Param w{"conv" + std::to_string(l) + ".w", ADTensor<float>({ch[l + 1], 3, 3, ch[l]}), {}};
      Param b{"conv" + std::to_string(l) + ".b", ADTensor<float>({ch[l + 1]}), {}};
      bool last = (l + 2 == ch.size());
      if (!last) {
        double bound = 1.0 / std::sqrt(9.0 * ch[l]);
        for (auto& v : w.value.v) v = float((rng.next_unit() * 2.0 - 1.0) * bound);
      }
      // final layer stays zero so v_pred starts at 0
      w.grad = ADTensor<float>(w.value.shape);
      b.grad = ADTensor<float>(b.value.shape);
      params_.push_back(std::move(w));
      params_.push_back(std::move(b));
    }
  }

  const NetConfig& config() const { return cfg_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }

  /// Sinusoidal timestep embedding broadcast to h x w constant channels:
  /// sin/cos of pi 2^k t.
  static ADTensor<float> timestep_embedding(int h, int w, int channels, double t) {
    ADTensor<float> e({h, w, channels});
    std::vector<float> vals(channels);
    for (int k = 0; k < channels / 2; ++k) {
      double freq = M_PI * double(1 << k);
      vals[2 * k] = float(std::sin(freq * t));
      vals[2 * k + 1] = float(std::cos(freq * t));
    }
    if (channels % 2) vals[channels - 1] = float(t);
    for (size_t px = 0; px < size_t(h) * w; ++px)
      for (int c = 0; c < channels; ++c) e.v[px * channels + c] = vals[c];
    return e;
  }

  struct ForwardNodes {
    int v_pred = -1;
    std::vector<int> param_ids;  // same order as params()
  };

  /// Records the full forward pass on the tape. Conditioning maps are
  /// concatenated after z_t in the order given; the timestep embedding is
  /// appended last.
  ForwardNodes forward(Tape<float>& tape, const DenseMap& z_t,
                       const std::vector<DenseMap>& conditioning, double t) const {
    require(z_t.channels == 3, ErrorCategory::ShapeMismatch, "z_t must have 3 channels");
    ForwardNodes fn;
    std::vector<int> inputs;
    inputs.push_back(tape.leaf(from_dense<float>(z_t)));
    int cond_ch = 0;
    for (const auto& c : conditioning) {
      require(c.height == z_t.height && c.width == z_t.width, ErrorCategory::ShapeMismatch,
              "conditioning spatial dims differ");
      cond_ch += c.channels;
      inputs.push_back(tape.leaf(from_dense<float>(c)));
    }
    require(3 + cond_ch + cfg_.t_embed_channels == cfg_.in_channels(),
            ErrorCategory::ShapeMismatch, "conditioning channels do not match config");
    inputs.push_back(tape.leaf(
        timestep_embedding(z_t.height, z_t.width, cfg_.t_embed_channels, t)));
    int x = tape.concat_c(inputs);

    for (auto& p : params_) fn.param_ids.push_back(tape.leaf(p.value, true));
    size_t n_layers = params_.size() / 2;
    for (size_t l = 0; l < n_layers; ++l) {
      x = tape.conv3x3(x, fn.param_ids[2 * l]);
      x = tape.add_bias(x, fn.param_ids[2 * l + 1]);
      if (l + 1 < n_layers) x = tape.relu(x);
    }
    fn.v_pred = x;
    return fn;
  }

  /// Convenience forward returning a fresh DenseMap (inference path).
  DenseMap predict(const DenseMap& z_t, const std::vector<DenseMap>& conditioning,
                   double t) const {
    Tape<float> tape;
    auto fn = forward(tape, z_t, conditioning, t);
    return to_dense(tape.value(fn.v_pred));
  }

 private:
  NetConfig cfg_;
  std::vector<Param> params_;
};

// --- checkpoint container -------------------------------------------------
// magic "E2PC", u32 version, u64 config hash, u32 step, u32 config string
// length + bytes, u32 tensor count, then per tensor: u32 name length, name,
// u32 rank, u32 dims..., f32 payload.

struct CheckpointMeta {
  NetConfig net;
  Task task = Task::Depth;
  Mapping mapping = Mapping::sqrt();
  uint32_t step = 0;
};

namespace ckptdetail {

inline std::string meta_string(const CheckpointMeta& m) {
  std::ostringstream os;
  os << m.net.serialize() << "task=" << to_string(m.task) << "\n"
     << "mapping=" << m.mapping.name() << "\n";
  return os.str();
}

inline CheckpointMeta parse_meta(const std::string& s, uint32_t step) {
  CheckpointMeta m;
  m.step = step;
  std::istringstream is(s);
  std::string line;
  while (std::getline(is, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "widths") {
      std::sscanf(val.c_str(), "%d,%d,%d", &m.net.widths[0], &m.net.widths[1], &m.net.widths[2]);
    } else if (key == "t_embed") {
      m.net.t_embed_channels = std::stoi(val);
    } else if (key == "with_prompt") {
      m.net.with_prompt = val == "1";
    } else if (key == "task") {
      m.task = task_from_string(val);
    } else if (key == "mapping") {
      m.mapping = mapping_from_string(val);
    }
  }
  return m;
}

}  // namespace ckptdetail

inline void save_checkpoint(const VelocityNet& net, const CheckpointMeta& meta,
                            const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  require(bool(os), ErrorCategory::IoFailure, "cannot open " + path);
  os.write("E2PC", 4);
  detail::put_u32(os, 1);
  std::string ms = ckptdetail::meta_string(meta);
  uint64_t hash = fnv1a64(ms);
  detail::put_u32(os, uint32_t(hash & 0xFFFFFFFFull));
  detail::put_u32(os, uint32_t(hash >> 32));
  detail::put_u32(os, meta.step);
  detail::put_u32(os, uint32_t(ms.size()));
  os.write(ms.data(), std::streamsize(ms.size()));
  detail::put_u32(os, uint32_t(net.params().size()));
  for (const auto& p : net.params()) {
    detail::put_u32(os, uint32_t(p.name.size()));
    os.write(p.name.data(), std::streamsize(p.name.size()));
    detail::put_u32(os, uint32_t(p.value.shape.size()));
    for (int d : p.value.shape) detail::put_u32(os, uint32_t(d));
    for (float v : p.value.v) detail::put_f32(os, v);
  }
  require(bool(os), ErrorCategory::IoFailure, "short write to " + path);
}

struct LoadedCheckpoint {
  VelocityNet net;
  CheckpointMeta meta;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(bool(is), ErrorCategory::IoFailure, "cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  require(bool(is) && std::memcmp(magic, "E2PC", 4) == 0, ErrorCategory::BadMagic,
          "not a checkpoint file");
  require(detail::get_u32(is) == 1, ErrorCategory::VersionMismatch, "checkpoint version");
  uint64_t hash = detail::get_u32(is);
  hash |= uint64_t(detail::get_u32(is)) << 32;
  uint32_t step = detail::get_u32(is);
  uint32_t mlen = detail::get_u32(is);
  require(mlen < (1u << 20), ErrorCategory::Corrupt, "implausible metadata length");
  std::string ms(mlen, '\0');
  is.read(ms.data(), mlen);
  require(bool(is), ErrorCategory::Truncated, "truncated checkpoint metadata");
  require(fnv1a64(ms) == hash, ErrorCategory::HashMismatch, "config hash mismatch");

  LoadedCheckpoint out;
  out.meta = ckptdetail::parse_meta(ms, step);
  out.net = VelocityNet(out.meta.net, SeededRng(0));

  uint32_t count = detail::get_u32(is);
  require(count == out.net.params().size(), ErrorCategory::ShapeMismatch,
          "parameter count differs from config");
  for (auto& p : out.net.params()) {
    uint32_t nlen = detail::get_u32(is);
    require(nlen < 256, ErrorCategory::Corrupt, "implausible name length");
    std::string name(nlen, '\0');
    is.read(name.data(), nlen);
    require(bool(is) && name == p.name, ErrorCategory::Corrupt, "unexpected tensor name");
    uint32_t rank = detail::get_u32(is);
    require(rank == p.value.shape.size(), ErrorCategory::ShapeMismatch, "tensor rank differs");
    for (int d : p.value.shape)
      require(detail::get_u32(is) == uint32_t(d), ErrorCategory::ShapeMismatch,
              "tensor dims differ");
    is.read(reinterpret_cast<char*>(p.value.v.data()),
            std::streamsize(p.value.v.size() * sizeof(float)));
    require(is.gcount() == std::streamsize(p.value.v.size() * sizeof(float)),
            ErrorCategory::Truncated, "truncated tensor payload");
  }
  return out;
}

/// Restores weights into an existing net; the checkpoint must have been
/// written by a net of identical architecture.
inline uint32_t load_checkpoint_into(VelocityNet& net, const std::string& path) {
  LoadedCheckpoint lc = load_checkpoint(path);
  require(lc.meta.net.serialize() == net.config().serialize(), ErrorCategory::ShapeMismatch,
          "checkpoint architecture differs from target net");
  for (size_t i = 0; i < net.params().size(); ++i)
    net.params()[i].value = lc.net.params()[i].value;
  return lc.meta.step;
}

}  // namespace e2p
