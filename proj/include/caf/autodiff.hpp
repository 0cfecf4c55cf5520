#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <utility>
#include <vector>

#include "caf/rng.hpp"
#include "caf/tensor.hpp"

namespace caf {

namespace detail {

inline std::vector<size_t> broadcast_shape(const std::vector<size_t>& a,
                                           const std::vector<size_t>& b) {
  const size_t r = std::max(a.size(), b.size());
  std::vector<size_t> out(r);
  for (size_t i = 0; i < r; ++i) {
    const size_t da = (i < r - a.size()) ? 1 : a[i - (r - a.size())];
    const size_t db = (i < r - b.size()) ? 1 : b[i - (r - b.size())];
    require(da == db || da == 1 || db == 1, Errc::shape_mismatch,
            "incompatible broadcast " + shape_str(a) + " vs " + shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

// Element strides of `shape` right-aligned into the `out` index space,
// zero on broadcast axes.
inline std::vector<size_t> broadcast_strides(const std::vector<size_t>& shape,
                                             const std::vector<size_t>& out) {
  const size_t r = out.size();
  std::vector<size_t> strides(r, 0);
  size_t acc = 1;
  for (size_t i = shape.size(); i-- > 0;) {
    const size_t oi = i + (r - shape.size());
    strides[oi] = (shape[i] == 1 && out[oi] != 1) ? 0 : acc;
    acc *= shape[i];
  }
  return strides;
}

// Odometer over a broadcast output space, tracking flat offsets into the
// two source operands.
struct BcastIter {
  BcastIter(const std::vector<size_t>& a_shape, const std::vector<size_t>& b_shape,
            const std::vector<size_t>& out_shape)
      : shape(out_shape),
        idx(out_shape.size(), 0),
        sa(broadcast_strides(a_shape, out_shape)),
        sb(broadcast_strides(b_shape, out_shape)) {
    for (size_t d : shape)
      if (d == 0) done = true;
  }

  void advance() {
    for (size_t i = shape.size(); i-- > 0;) {
      ++idx[i];
      oa += sa[i];
      ob += sb[i];
      if (idx[i] < shape[i]) return;
      oa -= sa[i] * shape[i];
      ob -= sb[i] * shape[i];
      idx[i] = 0;
    }
    done = true;
  }

  std::vector<size_t> shape, idx, sa, sb;
  size_t oa = 0, ob = 0;
  bool done = false;
};

// outer/axis/inner decomposition for reductions and softmax
struct AxisSplit {
  size_t outer = 1, m = 1, inner = 1;
};
inline AxisSplit axis_split(const std::vector<size_t>& shape, int axis) {
  const int r = int(shape.size());
  if (axis < 0) axis += r;
  require(axis >= 0 && axis < r, Errc::shape_mismatch, "axis out of range");
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  s.m = shape[axis];
  for (int i = axis + 1; i < r; ++i) s.inner *= shape[i];
  return s;
}

}  // namespace detail

// Reverse-mode tape over Tensor<T>. One tape per forward pass; backward()
// walks nodes in reverse creation order, which is a valid topological order
// because ops only reference already-created ids.
template <typename T>
class Tape {
 public:
  using Id = int;

  Id leaf(Tensor<T> v, bool needs_grad = false) {
    return push(std::move(v), needs_grad, nullptr);
  }

  const Tensor<T>& val(Id id) const { return nodes_[size_t(id)].value; }
  const Tensor<T>& grad(Id id) const { return nodes_[size_t(id)].grad; }
  size_t num_nodes() const { return nodes_.size(); }

  // ---- elementwise with broadcasting ----

  Id add(Id a, Id b) {
    return binary(
        a, b, [](T x, T y) { return x + y; },
        [](T, T, T g, T& ga, T& gb) {
          ga += g;
          gb += g;
        });
  }

  Id sub(Id a, Id b) {
    return binary(
        a, b, [](T x, T y) { return x - y; },
        [](T, T, T g, T& ga, T& gb) {
          ga += g;
          gb -= g;
        });
  }

  Id mul(Id a, Id b) {
    return binary(
        a, b, [](T x, T y) { return x * y; },
        [](T x, T y, T g, T& ga, T& gb) {
          ga += g * y;
          gb += g * x;
        });
  }

  Id scale(Id a, T c) {
    const Tensor<T>& A = val(a);
    Tensor<T> out = A;
    for (auto& x : out.data) x *= c;
    return push(std::move(out), nodes_[size_t(a)].needs_grad, [this, a, c](Id self) {
      const Tensor<T>& g = nodes_[size_t(self)].grad;
      Tensor<T>& ga = nodes_[size_t(a)].grad;
      for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * c;
    });
  }

  // ---- linear algebra ----

  // a: [..., k] times w: [k, q] -> [..., q]
  Id matmul(Id a, Id w) {
    const Tensor<T>& A = val(a);
    const Tensor<T>& W = val(w);
    require(W.rank() == 2, Errc::shape_mismatch, "matmul weight must be rank 2");
    require(A.rank() >= 1 && A.shape.back() == W.shape[0], Errc::shape_mismatch,
            "matmul inner dims " + shape_str(A.shape) + " x " + shape_str(W.shape));
    const size_t k = W.shape[0], q = W.shape[1];
    const size_t rows = A.size() / k;
    std::vector<size_t> out_shape = A.shape;
    out_shape.back() = q;
    Tensor<T> out(out_shape);
    const T* ad = A.data.data();
    const T* wd = W.data.data();
    T* od = out.data.data();
    for (size_t r = 0; r < rows; ++r) {
      for (size_t kk = 0; kk < k; ++kk) {
        const T av = ad[r * k + kk];
        if (av == T(0)) continue;
        const T* wrow = wd + kk * q;
        T* orow = od + r * q;
        for (size_t qq = 0; qq < q; ++qq) orow[qq] += av * wrow[qq];
      }
    }
    bool ng = nodes_[size_t(a)].needs_grad || nodes_[size_t(w)].needs_grad;
    return push(std::move(out), ng, [this, a, w, rows, k, q](Id self) {
      const Tensor<T>& g = nodes_[size_t(self)].grad;
      const Tensor<T>& A2 = nodes_[size_t(a)].value;
      const Tensor<T>& W2 = nodes_[size_t(w)].value;
      Tensor<T>& ga = nodes_[size_t(a)].grad;
      Tensor<T>& gw = nodes_[size_t(w)].grad;
      const T* gd = g.data.data();
      const T* ad = A2.data.data();
      const T* wd = W2.data.data();
      if (nodes_[size_t(a)].needs_grad) {
        T* gad = ga.data.data();
        for (size_t r = 0; r < rows; ++r)
          for (size_t kk = 0; kk < k; ++kk) {
            const T* wrow = wd + kk * q;
            const T* grow = gd + r * q;
            T acc = T(0);
            for (size_t qq = 0; qq < q; ++qq) acc += grow[qq] * wrow[qq];
            gad[r * k + kk] += acc;
          }
      }
      if (nodes_[size_t(w)].needs_grad) {
        T* gwd = gw.data.data();
        for (size_t r = 0; r < rows; ++r)
          for (size_t kk = 0; kk < k; ++kk) {
            const T av = ad[r * k + kk];
            if (av == T(0)) continue;
            const T* grow = gd + r * q;
            T* gwrow = gwd + kk * q;
            for (size_t qq = 0; qq < q; ++qq) gwrow[qq] += av * grow[qq];
          }
      }
    });
  }

  // ---- reductions ----

  Id sum_axis(Id a, int axis, bool keepdim) { return reduce(a, axis, keepdim, false); }
  Id mean_axis(Id a, int axis, bool keepdim) { return reduce(a, axis, keepdim, true); }

  // ---- shape ----

  Id reshape(Id a, std::vector<size_t> s) {
    Tensor<T> out = val(a).reshaped(s);
    return push(std::move(out), nodes_[size_t(a)].needs_grad, [this, a](Id self) {
      const Tensor<T>& g = nodes_[size_t(self)].grad;
      Tensor<T>& ga = nodes_[size_t(a)].grad;
      for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
    });
  }

  // axis of size one -> count copies
  Id expand_axis(Id a, int axis, size_t count) {
    const Tensor<T>& A = val(a);
    auto sp = detail::axis_split(A.shape, axis);
    require(sp.m == 1, Errc::shape_mismatch, "expand_axis needs size-1 axis");
    std::vector<size_t> os = A.shape;
    os[axis < 0 ? A.rank() + size_t(axis) : size_t(axis)] = count;
    Tensor<T> out(os);
    for (size_t o = 0; o < sp.outer; ++o)
      for (size_t c = 0; c < count; ++c)
        for (size_t i = 0; i < sp.inner; ++i)
          out.data[(o * count + c) * sp.inner + i] = A.data[o * sp.inner + i];
    return push(std::move(out), nodes_[size_t(a)].needs_grad, [this, a, sp, count](Id self) {
      const Tensor<T>& g = nodes_[size_t(self)].grad;
      Tensor<T>& ga = nodes_[size_t(a)].grad;
      for (size_t o = 0; o < sp.outer; ++o)
        for (size_t c = 0; c < count; ++c)
          for (size_t i = 0; i < sp.inner; ++i)
            ga.data[o * sp.inner + i] += g.data[(o * count + c) * sp.inner + i];
    });
  }

  Id concat(const std::vector<Id>& parts, int axis) {
    require(!parts.empty(), Errc::invalid_argument, "concat of nothing");
    const Tensor<T>& first = val(parts[0]);
    const int r = int(first.rank());
    int ax = axis < 0 ? axis + r : axis;
    require(ax >= 0 && ax < r, Errc::shape_mismatch, "concat axis out of range");
    size_t total = 0;
    std::vector<detail::AxisSplit> splits;
    for (Id p : parts) {
      const Tensor<T>& P = val(p);
      require(int(P.rank()) == r, Errc::shape_mismatch, "concat rank mismatch");
      for (int i = 0; i < r; ++i)
        require(i == ax || P.shape[size_t(i)] == first.shape[size_t(i)], Errc::shape_mismatch,
                "concat shape mismatch");
      splits.push_back(detail::axis_split(P.shape, ax));
      total += P.shape[size_t(ax)];
    }
    std::vector<size_t> os = first.shape;
    os[size_t(ax)] = total;
    Tensor<T> out(os);
    const auto osp = detail::axis_split(os, ax);
    size_t off = 0;
    for (size_t pi = 0; pi < parts.size(); ++pi) {
      const Tensor<T>& P = val(parts[pi]);
      const auto& sp = splits[pi];
      for (size_t o = 0; o < sp.outer; ++o)
        for (size_t m = 0; m < sp.m; ++m)
          for (size_t i = 0; i < sp.inner; ++i)
            out.data[(o * osp.m + off + m) * sp.inner + i] =
                P.data[(o * sp.m + m) * sp.inner + i];
      off += sp.m;
    }
    bool ng = false;
    for (Id p : parts) ng = ng || nodes_[size_t(p)].needs_grad;
    std::vector<Id> ps = parts;
    return push(std::move(out), ng, [this, ps, splits, osp](Id self) {
      const Tensor<T>& g = nodes_[size_t(self)].grad;
      size_t off = 0;
      for (size_t pi = 0; pi < ps.size(); ++pi) {
        Tensor<T>& gp = nodes_[size_t(ps[pi])].grad;
        const auto& sp = splits[pi];
        for (size_t o = 0; o < sp.outer; ++o)
          for (size_t m = 0; m < sp.m; ++m)
            for (size_t i = 0; i < sp.inner; ++i)
              gp.data[(o * sp.m + m) * sp.inner + i] +=
                  g.data[(o * osp.m + off + m) * sp.inner + i];
        off += sp.m;
      }
    });
  }

  // ---- nonlinearities ----

  Id gelu(Id a) {
    constexpr double kInvSqrt2 = 0.70710678118654752440;
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    const Tensor<T>& A = val(a);
    Tensor<T> out = A;
    for (auto& x : out.data) x = T(0.5 * double(x) * (1.0 + std::erf(double(x) * kInvSqrt2)));
    return push(std::move(out), nodes_[size_t(a)].needs_grad, [this, a](Id self) {
      const Tensor<T>& g = nodes_[size_t(self)].grad;
      const Tensor<T>& A2 = nodes_[size_t(a)].value;
      Tensor<T>& ga = nodes_[size_t(a)].grad;
      for (size_t i = 0; i < g.size(); ++i) {
        const double x = double(A2.data[i]);
        const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        ga.data[i] += g.data[i] * T(cdf + x * pdf);
      }
    });
  }

  Id softmax_axis(Id a, int axis) {
    const Tensor<T>& A = val(a);
    const auto sp = detail::axis_split(A.shape, axis);
    Tensor<T> out(A.shape);
    for (size_t o = 0; o < sp.outer; ++o)
      for (size_t i = 0; i < sp.inner; ++i) {
        T mx = A.data[o * sp.m * sp.inner + i];
        for (size_t m = 1; m < sp.m; ++m)
          mx = std::max(mx, A.data[(o * sp.m + m) * sp.inner + i]);
        T denom = T(0);
        for (size_t m = 0; m < sp.m; ++m) {
          const size_t ix = (o * sp.m + m) * sp.inner + i;
          out.data[ix] = std::exp(A.data[ix] - mx);
          denom += out.data[ix];
        }
        for (size_t m = 0; m < sp.m; ++m) out.data[(o * sp.m + m) * sp.inner + i] /= denom;
      }
    return push(std::move(out), nodes_[size_t(a)].needs_grad, [this, a, sp](Id self) {
      const Tensor<T>& g = nodes_[size_t(self)].grad;
      const Tensor<T>& s = nodes_[size_t(self)].value;
      Tensor<T>& ga = nodes_[size_t(a)].grad;
      for (size_t o = 0; o < sp.outer; ++o)
        for (size_t i = 0; i < sp.inner; ++i) {
          T dot = T(0);
          for (size_t m = 0; m < sp.m; ++m) {
            const size_t ix = (o * sp.m + m) * sp.inner + i;
            dot += g.data[ix] * s.data[ix];
          }
          for (size_t m = 0; m < sp.m; ++m) {
            const size_t ix = (o * sp.m + m) * sp.inner + i;
            ga.data[ix] += s.data[ix] * (g.data[ix] - dot);
          }
        }
    });
  }

  // LayerNorm over the last axis. gain/bias are rank-1 of size D.
  Id layer_norm(Id a, Id gain, Id bias, T eps = T(1e-5)) {
    const Tensor<T>& A = val(a);
    const size_t dcount = A.shape.back();
    require(val(gain).size() == dcount && val(bias).size() == dcount, Errc::shape_mismatch,
            "layer_norm gain/bias size");
    const size_t rows = A.size() / dcount;
    Tensor<T> out(A.shape);
    Tensor<T> xhat(A.shape);
    std::vector<T> inv_std(rows);
    const Tensor<T>& G = val(gain);
    const Tensor<T>& B = val(bias);
    for (size_t r = 0; r < rows; ++r) {
      const T* x = A.data.data() + r * dcount;
      T mean = T(0);
      for (size_t j = 0; j < dcount; ++j) mean += x[j];
      mean /= T(dcount);
      T var = T(0);
      for (size_t j = 0; j < dcount; ++j) var += (x[j] - mean) * (x[j] - mean);
      var /= T(dcount);
      const T is = T(1) / std::sqrt(var + eps);
      inv_std[r] = is;
      for (size_t j = 0; j < dcount; ++j) {
        const T xh = (x[j] - mean) * is;
        xhat.data[r * dcount + j] = xh;
        out.data[r * dcount + j] = G.data[j] * xh + B.data[j];
      }
    }
    bool ng = nodes_[size_t(a)].needs_grad || nodes_[size_t(gain)].needs_grad ||
              nodes_[size_t(bias)].needs_grad;
    auto xh_keep = std::make_shared<Tensor<T>>(std::move(xhat));
    auto is_keep = std::make_shared<std::vector<T>>(std::move(inv_std));
    return push(std::move(out), ng,
                [this, a, gain, bias, rows, dcount, xh_keep, is_keep](Id self) {
                  const Tensor<T>& g = nodes_[size_t(self)].grad;
                  const Tensor<T>& G = nodes_[size_t(gain)].value;
                  Tensor<T>& ga = nodes_[size_t(a)].grad;
                  Tensor<T>& gg = nodes_[size_t(gain)].grad;
                  Tensor<T>& gb = nodes_[size_t(bias)].grad;
                  for (size_t r = 0; r < rows; ++r) {
                    const T* grow = g.data.data() + r * dcount;
                    const T* xh = xh_keep->data.data() + r * dcount;
                    const T is = (*is_keep)[r];
                    T mean_gh = T(0), mean_ghx = T(0);
                    for (size_t j = 0; j < dcount; ++j) {
                      const T gh = grow[j] * G.data[j];
                      mean_gh += gh;
                      mean_ghx += gh * xh[j];
                    }
                    mean_gh /= T(dcount);
                    mean_ghx /= T(dcount);
                    for (size_t j = 0; j < dcount; ++j) {
                      const T gh = grow[j] * G.data[j];
                      ga.data[r * dcount + j] += is * (gh - mean_gh - xh[j] * mean_ghx);
                      gg.data[j] += grow[j] * xh[j];
                      gb.data[j] += grow[j];
                    }
                  }
                });
  }

  // Inverted dropout; identity when not training or rate == 0.
  Id dropout(Id a, double rate, uint64_t seed, bool training) {
    if (!training || rate <= 0.0) return a;
    require(rate < 1.0, Errc::invalid_argument, "dropout rate must be < 1");
    const Tensor<T>& A = val(a);
    Rng rng(seed);
    auto mask = std::make_shared<Tensor<T>>(A.shape);
    const T keep_scale = T(1.0 / (1.0 - rate));
    Tensor<T> out(A.shape);
    for (size_t i = 0; i < A.size(); ++i) {
      const T m = (rng.uniform() < rate) ? T(0) : keep_scale;
      mask->data[i] = m;
      out.data[i] = A.data[i] * m;
    }
    return push(std::move(out), nodes_[size_t(a)].needs_grad, [this, a, mask](Id self) {
      const Tensor<T>& g = nodes_[size_t(self)].grad;
      Tensor<T>& ga = nodes_[size_t(a)].grad;
      for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * mask->data[i];
    });
  }

  // ---- MIL head ops ----

  // o_cam: [N, S, C] -> o_pred: [N, C], mean of the k largest scores along S
  // per (sample, class). Ties break toward the lower slot index. When `valid`
  // is given, selection is restricted to valid slots; a row with fewer than k
  // valid slots falls back to all slots. Selected values are accumulated in
  // descending order so the sum is invariant under slot permutation.
  // topk_idx_out (optional): [N, k, C] selected slot indices.
  Id topk_mean(Id ocam, size_t k, const Tensor<uint8_t>* valid,
               Tensor<int32_t>* topk_idx_out) {
    const Tensor<T>& A = val(ocam);
    require(A.rank() == 3, Errc::shape_mismatch, "topk_mean input must be [N,S,C]");
    const size_t n = A.shape[0], s = A.shape[1], c = A.shape[2];
    require(k >= 1 && k <= s, Errc::invalid_argument,
            "k out of range: k=" + std::to_string(k) + " slots=" + std::to_string(s));
    if (valid) {
      require(valid->shape == std::vector<size_t>({n, s}), Errc::shape_mismatch,
              "valid mask must be [N,S]");
    }
    Tensor<T> out({n, c});
    auto sel = std::make_shared<std::vector<int32_t>>(n * k * c);  // [N,k,C]
    if (topk_idx_out) *topk_idx_out = Tensor<int32_t>({n, k, c});
    std::vector<int32_t> cand;
    cand.reserve(s);
    for (size_t in = 0; in < n; ++in) {
      for (size_t ic = 0; ic < c; ++ic) {
        cand.clear();
        if (valid) {
          for (size_t j = 0; j < s; ++j)
            if (valid->at(in, j)) cand.push_back(int32_t(j));
          if (cand.size() < k) cand.clear();
        }
        if (cand.empty())
          for (size_t j = 0; j < s; ++j) cand.push_back(int32_t(j));
        std::partial_sort(cand.begin(), cand.begin() + std::ptrdiff_t(k), cand.end(),
                          [&](int32_t x, int32_t y) {
                            const T vx = A.at(in, size_t(x), ic), vy = A.at(in, size_t(y), ic);
                            if (vx != vy) return vx > vy;
                            return x < y;
                          });
        T acc = T(0);
        for (size_t t = 0; t < k; ++t) {
          const int32_t j = cand[t];
          acc += A.at(in, size_t(j), ic);
          (*sel)[(in * k + t) * c + ic] = j;
          if (topk_idx_out) topk_idx_out->at(in, t, ic) = j;
        }
        out.at(in, ic) = acc / T(k);
      }
    }
    return push(std::move(out), nodes_[size_t(ocam)].needs_grad,
                [this, ocam, k, n, s, c, sel](Id self) {
                  const Tensor<T>& g = nodes_[size_t(self)].grad;
                  Tensor<T>& ga = nodes_[size_t(ocam)].grad;
                  for (size_t in = 0; in < n; ++in)
                    for (size_t ic = 0; ic < c; ++ic) {
                      const T gv = g.at(in, ic) / T(k);
                      for (size_t t = 0; t < k; ++t) {
                        const int32_t j = (*sel)[(in * k + t) * c + ic];
                        ga.data[(in * s + size_t(j)) * c + ic] += gv;
                      }
                    }
                });
  }

  // Softmax cross-entropy against integer labels, averaged over the batch.
  // logits: [N, C] -> scalar.
  Id cross_entropy_mean(Id logits, const std::vector<int>& labels) {
    const Tensor<T>& Z = val(logits);
    require(Z.rank() == 2, Errc::shape_mismatch, "cross_entropy logits must be [N,C]");
    const size_t n = Z.shape[0], c = Z.shape[1];
    require(labels.size() == n, Errc::shape_mismatch, "label count mismatch");
    auto probs = std::make_shared<Tensor<T>>(Z.shape);
    T loss = T(0);
    for (size_t i = 0; i < n; ++i) {
      require(labels[i] >= 0 && size_t(labels[i]) < c, Errc::invalid_argument,
              "label out of range at row " + std::to_string(i));
      const T* z = Z.data.data() + i * c;
      T mx = z[0];
      for (size_t j = 1; j < c; ++j) mx = std::max(mx, z[j]);
      T denom = T(0);
      for (size_t j = 0; j < c; ++j) {
        probs->data[i * c + j] = std::exp(z[j] - mx);
        denom += probs->data[i * c + j];
      }
      for (size_t j = 0; j < c; ++j) probs->data[i * c + j] /= denom;
      loss += std::log(denom) + mx - z[size_t(labels[i])];
    }
    loss /= T(n);
    auto lbl = std::make_shared<std::vector<int>>(labels);
    return push(Tensor<T>::scalar(loss), nodes_[size_t(logits)].needs_grad,
                [this, logits, n, c, probs, lbl](Id self) {
                  const T g0 = nodes_[size_t(self)].grad.data[0];
                  Tensor<T>& ga = nodes_[size_t(logits)].grad;
                  for (size_t i = 0; i < n; ++i)
                    for (size_t j = 0; j < c; ++j) {
                      T p = probs->data[i * c + j];
                      if (j == size_t((*lbl)[i])) p -= T(1);
                      ga.data[i * c + j] += g0 * p / T(n);
                    }
                });
  }

  // ---- backward ----

  void backward(Id root) {
    require(val(root).size() == 1, Errc::invalid_argument, "backward needs a scalar root");
    for (auto& nd : nodes_) {
      nd.grad = Tensor<T>(nd.value.shape);
    }
    nodes_[size_t(root)].grad.data[0] = T(1);
    for (Id i = root; i >= 0; --i) {
      auto& nd = nodes_[size_t(i)];
      if (nd.back && nd.needs_grad) nd.back(i);
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::function<void(Id)> back;
    bool needs_grad = false;
  };

  Id push(Tensor<T> v, bool needs_grad, std::function<void(Id)> back) {
    nodes_.push_back(Node{std::move(v), Tensor<T>(), std::move(back), needs_grad});
    return Id(nodes_.size() - 1);
  }

  template <typename FwdF, typename BwdF>
  Id binary(Id a, Id b, FwdF fwd, BwdF bwd) {
    const Tensor<T>& A = val(a);
    const Tensor<T>& B = val(b);
    auto os = detail::broadcast_shape(A.shape, B.shape);
    Tensor<T> out(os);
    {
      detail::BcastIter it(A.shape, B.shape, os);
      for (size_t f = 0; f < out.size(); ++f, it.advance())
        out.data[f] = fwd(A.data[it.oa], B.data[it.ob]);
    }
    bool ng = nodes_[size_t(a)].needs_grad || nodes_[size_t(b)].needs_grad;
    return push(std::move(out), ng, [this, a, b, os, bwd](Id self) {
      const Tensor<T>& g = nodes_[size_t(self)].grad;
      const Tensor<T>& A2 = nodes_[size_t(a)].value;
      const Tensor<T>& B2 = nodes_[size_t(b)].value;
      Tensor<T>& ga = nodes_[size_t(a)].grad;
      Tensor<T>& gb = nodes_[size_t(b)].grad;
      detail::BcastIter it(A2.shape, B2.shape, os);
      for (size_t f = 0; f < g.size(); ++f, it.advance())
        bwd(A2.data[it.oa], B2.data[it.ob], g.data[f], ga.data[it.oa], gb.data[it.ob]);
    });
  }

  Id reduce(Id a, int axis, bool keepdim, bool mean) {
    const Tensor<T>& A = val(a);
    const auto sp = detail::axis_split(A.shape, axis);
    const int r = int(A.rank());
    const size_t ax = size_t(axis < 0 ? axis + r : axis);
    std::vector<size_t> os;
    for (size_t i = 0; i < A.rank(); ++i) {
      if (i == ax) {
        if (keepdim) os.push_back(1);
      } else {
        os.push_back(A.shape[i]);
      }
    }
    if (os.empty()) os.push_back(1);
    Tensor<T> out(os);
    const T denom = mean ? T(sp.m) : T(1);
    for (size_t o = 0; o < sp.outer; ++o)
      for (size_t i = 0; i < sp.inner; ++i) {
        T acc = T(0);
        for (size_t m = 0; m < sp.m; ++m) acc += A.data[(o * sp.m + m) * sp.inner + i];
        out.data[o * sp.inner + i] = acc / denom;
      }
    return push(std::move(out), nodes_[size_t(a)].needs_grad, [this, a, sp, denom](Id self) {
      const Tensor<T>& g = nodes_[size_t(self)].grad;
      Tensor<T>& ga = nodes_[size_t(a)].grad;
      for (size_t o = 0; o < sp.outer; ++o)
        for (size_t i = 0; i < sp.inner; ++i) {
          const T gv = g.data[o * sp.inner + i] / denom;
          for (size_t m = 0; m < sp.m; ++m) ga.data[(o * sp.m + m) * sp.inner + i] += gv;
        }
    });
  }

  std::vector<Node> nodes_;
};

}  // namespace caf
