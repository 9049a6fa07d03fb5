#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "e2p/error.hpp"
#include "e2p/tensor.hpp"

namespace e2p {

/// Flat n-d value buffer for the tape. Image tensors are {h, w, c} row-major
/// (same layout as DenseMap); conv weights are {c_out, 3, 3, c_in} so the
/// innermost input-channel loop is contiguous on both sides.
template <class T>
struct ADTensor {
  std::vector<int> shape;
  std::vector<T> v;

  ADTensor() = default;
  explicit ADTensor(std::vector<int> s) : shape(std::move(s)) {
    size_t n = 1;
    for (int d : shape) {
      require(d > 0, ErrorCategory::EmptyTensor, "nonpositive dim");
      n *= size_t(d);
    }
    v.assign(n, T(0));
  }

  size_t numel() const { return v.size(); }
  bool same_shape(const ADTensor& o) const { return shape == o.shape; }
};

template <class T>
ADTensor<T> from_dense(const DenseMap& m) {
  ADTensor<T> t({m.height, m.width, m.channels});
  for (size_t i = 0; i < m.data.size(); ++i) t.v[i] = T(m.data[i]);
  return t;
}

template <class T>
DenseMap to_dense(const ADTensor<T>& t, Task task = Task::Latent) {
  require(t.shape.size() == 3, ErrorCategory::BadRank, "expected rank-3 tensor");
  DenseMap m(t.shape[0], t.shape[1], t.shape[2], task, {-12.0, 12.0});
  for (size_t i = 0; i < t.v.size(); ++i) m.data[i] = float(t.v[i]);
  return m;
}

enum class OpKind { Leaf, Add, Sub, Mul, Scale, MatMul, Conv3x3, AddBias, Relu, Mean, Sum, ConcatC };

/// Eager reverse-mode tape. Nodes are appended in execution order, so node
/// ids already form a topological order; backward walks them once in
/// reverse. The loss adjoint seeds to 1 unless an explicit seed is given.
template <class T>
class Tape {
 public:
  struct Node {
    OpKind op = OpKind::Leaf;
    std::vector<int> in;
    ADTensor<T> val;
    ADTensor<T> adj;  // allocated on demand in backward
    double k = 0.0;   // Scale factor
    bool needs_grad = false;
  };

  explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}

  int leaf(ADTensor<T> value, bool needs_grad = false) {
    Node n;
    n.op = OpKind::Leaf;
    n.val = std::move(value);
    n.needs_grad = needs_grad;
    return push(std::move(n));
  }

  int add(int a, int b) { return binary_ew(OpKind::Add, a, b); }
  int sub(int a, int b) { return binary_ew(OpKind::Sub, a, b); }
  int mul(int a, int b) { return binary_ew(OpKind::Mul, a, b); }

  int scale(int a, double k) {
    Node n = make(OpKind::Scale, {a});
    n.k = k;
    n.val = ADTensor<T>(nodes_[a].val.shape);
    for (size_t i = 0; i < n.val.numel(); ++i) n.val.v[i] = T(double(nodes_[a].val.v[i]) * k);
    return push(std::move(n));
  }

  int matmul(int a, int b) {
    const auto& A = nodes_[a].val;
    const auto& B = nodes_[b].val;
    require(A.shape.size() == 2 && B.shape.size() == 2 && A.shape[1] == B.shape[0],
            ErrorCategory::ShapeMismatch, "matmul: bad shapes");
    int m = A.shape[0], k = A.shape[1], nn = B.shape[1];
    Node n = make(OpKind::MatMul, {a, b});
    n.val = ADTensor<T>({m, nn});
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < nn; ++j) {
        T acc = 0;
        for (int p = 0; p < k; ++p) acc += A.v[size_t(i) * k + p] * B.v[size_t(p) * nn + j];
        n.val.v[size_t(i) * nn + j] = acc;
      }
    return push(std::move(n));
  }

  /// Same-size 3x3 convolution with zero padding. x {h,w,ci}, w {co,3,3,ci}.
  int conv3x3(int x, int w) {
    const auto& X = nodes_[x].val;
    const auto& W = nodes_[w].val;
    require(X.shape.size() == 3, ErrorCategory::ShapeMismatch, "conv3x3: input must be rank 3");
    require(W.shape.size() == 4 && W.shape[1] == 3 && W.shape[2] == 3 &&
                W.shape[3] == X.shape[2],
            ErrorCategory::ShapeMismatch, "conv3x3: weight must be {co,3,3,ci}");
    int h = X.shape[0], wd = X.shape[1], ci = X.shape[2], co = W.shape[0];
    Node n = make(OpKind::Conv3x3, {x, w});
    n.val = ADTensor<T>({h, wd, co});
    conv_forward(X.v.data(), h, wd, ci, W.v.data(), co, n.val.v.data());
    return push(std::move(n));
  }

  /// Per-output-channel bias broadcast over h,w. b {c}.
  int add_bias(int x, int b) {
    const auto& X = nodes_[x].val;
    const auto& B = nodes_[b].val;
    require(X.shape.size() == 3 && B.shape.size() == 1 && B.shape[0] == X.shape[2],
            ErrorCategory::ShapeMismatch, "add_bias: bias must match channels");
    Node n = make(OpKind::AddBias, {x, b});
    n.val = ADTensor<T>(X.shape);
    int c = X.shape[2];
    for (size_t i = 0; i < X.numel(); ++i) n.val.v[i] = X.v[i] + B.v[i % size_t(c)];
    return push(std::move(n));
  }

  int relu(int a) {
    Node n = make(OpKind::Relu, {a});
    n.val = ADTensor<T>(nodes_[a].val.shape);
    for (size_t i = 0; i < n.val.numel(); ++i) {
      T x = nodes_[a].val.v[i];
      n.val.v[i] = x > T(0) ? x : T(0);
    }
    return push(std::move(n));
  }

  int mean(int a) { return reduce(OpKind::Mean, a); }
  int sum(int a) { return reduce(OpKind::Sum, a); }

  int concat_c(const std::vector<int>& xs) {
    require(!xs.empty(), ErrorCategory::InvalidArgument, "concat_c: no inputs");
    const auto& first = nodes_[xs[0]].val;
    require(first.shape.size() == 3, ErrorCategory::ShapeMismatch, "concat_c: rank-3 only");
    int h = first.shape[0], w = first.shape[1], ctot = 0;
    for (int id : xs) {
      const auto& s = nodes_[id].val.shape;
      require(s.size() == 3 && s[0] == h && s[1] == w, ErrorCategory::ShapeMismatch,
              "concat_c: spatial dims differ");
      ctot += s[2];
    }
    Node n = make(OpKind::ConcatC, xs);
    n.val = ADTensor<T>({h, w, ctot});
    for (size_t px = 0; px < size_t(h) * w; ++px) {
      size_t off = px * ctot;
      for (int id : xs) {
        int c = nodes_[id].val.shape[2];
        const T* src = nodes_[id].val.v.data() + px * c;
        for (int j = 0; j < c; ++j) n.val.v[off + j] = src[j];
        off += size_t(c);
      }
    }
    return push(std::move(n));
  }

  const ADTensor<T>& value(int id) const { return nodes_[id].val; }
  const ADTensor<T>& grad(int id) const { return nodes_[id].adj; }
  size_t size() const { return nodes_.size(); }

  /// Reverse pass from out_id. seed defaults to all-ones (a scalar loss
  /// seeds to 1); pass an explicit seed to chain externally computed
  /// adjoints, e.g. hand-derived loss gradients.
  void backward(int out_id, const ADTensor<T>* seed = nullptr) {
    require(out_id >= 0 && size_t(out_id) < nodes_.size(), ErrorCategory::InvalidArgument,
            "backward: bad node id");
    require(nodes_[out_id].needs_grad, ErrorCategory::InvalidArgument,
            "backward: output disconnected from parameters");
    for (auto& n : nodes_)
      if (n.needs_grad) n.adj = ADTensor<T>(n.val.shape);
    if (seed) {
      require(seed->same_shape(nodes_[out_id].val), ErrorCategory::ShapeMismatch,
              "backward: seed shape mismatch");
      nodes_[out_id].adj = *seed;
    } else {
      for (auto& g : nodes_[out_id].adj.v) g = T(1);
    }
    for (int id = out_id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.needs_grad || n.op == OpKind::Leaf) continue;
      step_backward(n);
    }
  }

 private:
  Node make(OpKind op, std::vector<int> in) {
    Node n;
    n.op = op;
    n.in = std::move(in);
    for (int id : n.in) {
      require(id >= 0 && size_t(id) < nodes_.size(), ErrorCategory::InvalidArgument,
              "bad input node id");
      n.needs_grad = n.needs_grad || nodes_[id].needs_grad;
    }
    return n;
  }

  int push(Node n) {
    if (check_finite_) {
      for (T x : n.val.v)
        require(std::isfinite(double(x)), ErrorCategory::NonFinite,
                "non-finite value in node " + std::to_string(nodes_.size()));
    }
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
  }

  int binary_ew(OpKind op, int a, int b) {
    require(nodes_[a].val.same_shape(nodes_[b].val), ErrorCategory::ShapeMismatch,
            "elementwise op: shape mismatch");
    Node n = make(op, {a, b});
    n.val = ADTensor<T>(nodes_[a].val.shape);
    const auto& A = nodes_[a].val.v;
    const auto& B = nodes_[b].val.v;
    for (size_t i = 0; i < n.val.numel(); ++i)
      n.val.v[i] = op == OpKind::Add ? A[i] + B[i] : op == OpKind::Sub ? A[i] - B[i] : A[i] * B[i];
    return push(std::move(n));
  }

  int reduce(OpKind op, int a) {
    Node n = make(op, {a});
    n.val = ADTensor<T>({1});
    T acc = 0;
    for (T x : nodes_[a].val.v) acc += x;
    n.val.v[0] = op == OpKind::Mean ? T(double(acc) / double(nodes_[a].val.numel())) : acc;
    return push(std::move(n));
  }

  static void conv_forward(const T* x, int h, int w, int ci, const T* wt, int co, T* out) {
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        T* o = out + (size_t(y) * w + xx) * co;
        for (int oc = 0; oc < co; ++oc) {
          T acc = 0;
          const T* wrow = wt + size_t(oc) * 9 * ci;
          for (int ky = 0; ky < 3; ++ky) {
            int yy = y + ky - 1;
            if (yy < 0 || yy >= h) continue;
            for (int kx = 0; kx < 3; ++kx) {
              int xs = xx + kx - 1;
              if (xs < 0 || xs >= w) continue;
              const T* src = x + (size_t(yy) * w + xs) * ci;
              const T* wk = wrow + (ky * 3 + kx) * ci;
              for (int c = 0; c < ci; ++c) acc += src[c] * wk[c];
            }
          }
          o[oc] = acc;
        }
      }
  }

  void step_backward(Node& n) {
    const auto& g = n.adj.v;
    switch (n.op) {
      case OpKind::Add:
      case OpKind::Sub: {
        accumulate(n.in[0], g, 1.0);
        accumulate(n.in[1], g, n.op == OpKind::Add ? 1.0 : -1.0);
        break;
      }
      case OpKind::Mul: {
        if (nodes_[n.in[0]].needs_grad) {
          auto& da = nodes_[n.in[0]].adj.v;
          const auto& b = nodes_[n.in[1]].val.v;
          for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * b[i];
        }
        if (nodes_[n.in[1]].needs_grad) {
          auto& db = nodes_[n.in[1]].adj.v;
          const auto& a = nodes_[n.in[0]].val.v;
          for (size_t i = 0; i < g.size(); ++i) db[i] += g[i] * a[i];
        }
        break;
      }
      case OpKind::Scale: {
        accumulate(n.in[0], g, n.k);
        break;
      }
      case OpKind::MatMul: {
        const auto& A = nodes_[n.in[0]].val;
        const auto& B = nodes_[n.in[1]].val;
        int m = A.shape[0], k = A.shape[1], nn = B.shape[1];
        if (nodes_[n.in[0]].needs_grad) {
          auto& dA = nodes_[n.in[0]].adj.v;
          for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
              T acc = 0;
              for (int j = 0; j < nn; ++j)
                acc += g[size_t(i) * nn + j] * B.v[size_t(p) * nn + j];
              dA[size_t(i) * k + p] += acc;
            }
        }
        if (nodes_[n.in[1]].needs_grad) {
          auto& dB = nodes_[n.in[1]].adj.v;
          for (int p = 0; p < k; ++p)
            for (int j = 0; j < nn; ++j) {
              T acc = 0;
              for (int i = 0; i < m; ++i)
                acc += A.v[size_t(i) * k + p] * g[size_t(i) * nn + j];
              dB[size_t(p) * nn + j] += acc;
            }
        }
        break;
      }
      case OpKind::Conv3x3: {
        const auto& X = nodes_[n.in[0]].val;
        const auto& W = nodes_[n.in[1]].val;
        int h = X.shape[0], w = X.shape[1], ci = X.shape[2], co = W.shape[0];
        T* dx = nodes_[n.in[0]].needs_grad ? nodes_[n.in[0]].adj.v.data() : nullptr;
        T* dw = nodes_[n.in[1]].needs_grad ? nodes_[n.in[1]].adj.v.data() : nullptr;
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < w; ++xx) {
            const T* go = g.data() + (size_t(y) * w + xx) * co;
            for (int oc = 0; oc < co; ++oc) {
              T gv = go[oc];
              if (gv == T(0)) continue;
              const T* wrow = W.v.data() + size_t(oc) * 9 * ci;
              T* dwrow = dw ? dw + size_t(oc) * 9 * ci : nullptr;
              for (int ky = 0; ky < 3; ++ky) {
                int yy = y + ky - 1;
                if (yy < 0 || yy >= h) continue;
                for (int kx = 0; kx < 3; ++kx) {
                  int xs = xx + kx - 1;
                  if (xs < 0 || xs >= w) continue;
                  size_t src_off = (size_t(yy) * w + xs) * ci;
                  size_t k_off = size_t(ky * 3 + kx) * ci;
                  if (dx) {
                    const T* wk = wrow + k_off;
                    T* d = dx + src_off;
                    for (int c = 0; c < ci; ++c) d[c] += gv * wk[c];
                  }
                  if (dwrow) {
                    const T* src = X.v.data() + src_off;
                    T* d = dwrow + k_off;
                    for (int c = 0; c < ci; ++c) d[c] += gv * src[c];
                  }
                }
              }
            }
          }
        break;
      }
      case OpKind::AddBias: {
        if (nodes_[n.in[0]].needs_grad) accumulate(n.in[0], g, 1.0);
        if (nodes_[n.in[1]].needs_grad) {
          auto& db = nodes_[n.in[1]].adj.v;
          int c = nodes_[n.in[0]].val.shape[2];
          for (size_t i = 0; i < g.size(); ++i) db[i % size_t(c)] += g[i];
        }
        break;
      }
      case OpKind::Relu: {
        auto& da = nodes_[n.in[0]].adj.v;
        const auto& x = nodes_[n.in[0]].val.v;
        for (size_t i = 0; i < g.size(); ++i)
          if (x[i] > T(0)) da[i] += g[i];
        break;
      }
      case OpKind::Mean: {
        double inv = 1.0 / double(nodes_[n.in[0]].val.numel());
        auto& da = nodes_[n.in[0]].adj.v;
        for (auto& d : da) d += T(double(g[0]) * inv);
        break;
      }
      case OpKind::Sum: {
        auto& da = nodes_[n.in[0]].adj.v;
        for (auto& d : da) d += g[0];
        break;
      }
      case OpKind::ConcatC: {
        int h = n.val.shape[0], w = n.val.shape[1], ctot = n.val.shape[2];
        for (size_t px = 0; px < size_t(h) * w; ++px) {
          size_t off = px * ctot;
          for (int id : n.in) {
            int c = nodes_[id].val.shape[2];
            if (nodes_[id].needs_grad) {
              T* dst = nodes_[id].adj.v.data() + px * c;
              for (int j = 0; j < c; ++j) dst[j] += g[off + j];
            }
            off += size_t(c);
          }
        }
        break;
      }
      case OpKind::Leaf:
        break;
    }
  }

  void accumulate(int id, const std::vector<T>& g, double k) {
    if (!nodes_[id].needs_grad) return;
    auto& d = nodes_[id].adj.v;
    if (k == 1.0) {
      for (size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    } else {
      for (size_t i = 0; i < g.size(); ++i) d[i] += T(double(g[i]) * k);
    }
  }

  std::vector<Node> nodes_;
  bool check_finite_ = true;
};

}  // namespace e2p
