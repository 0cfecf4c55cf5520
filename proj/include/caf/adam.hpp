#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "caf/params.hpp"
#include "caf/tensor.hpp"

namespace caf {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a ParamStore. Moment tensors are kept in the
// store's order; `step_count` is the shared timestep t.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(const AdamConfig& cfg, const ParamStore<T>& params) : cfg_(cfg) {
    for (const auto& [name, t] : params) {
      m_.push_back(Tensor<T>(t.shape));
      v_.push_back(Tensor<T>(t.shape));
    }
  }

  // grads aligned with the store order
  void step(ParamStore<T>& params, const std::vector<Tensor<T>>& grads) {
    require(grads.size() == params.count() && m_.size() == params.count(),
            Errc::shape_mismatch, "adam: gradient list misaligned with parameters");
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(step_count_));
    for (size_t p = 0; p < params.count(); ++p) {
      Tensor<T>& theta = params.tensor(p);
      const Tensor<T>& g = grads[p];
      require(g.shape == theta.shape, Errc::shape_mismatch,
              "adam: gradient shape mismatch for " + params.name(p));
      require(g.all_finite(), Errc::not_finite,
              "non-finite gradient for parameter " + params.name(p));
      Tensor<T>& m = m_[p];
      Tensor<T>& v = v_[p];
      for (size_t i = 0; i < theta.size(); ++i) {
        const double gi = double(g.data[i]);
        const double mi = cfg_.beta1 * double(m.data[i]) + (1.0 - cfg_.beta1) * gi;
        const double vi = cfg_.beta2 * double(v.data[i]) + (1.0 - cfg_.beta2) * gi * gi;
        m.data[i] = T(mi);
        v.data[i] = T(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        theta.data[i] = T(double(theta.data[i]) - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

  uint64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return cfg_; }

  // checkpoint access
  std::vector<Tensor<T>>& moments_m() { return m_; }
  std::vector<Tensor<T>>& moments_v() { return v_; }
  void restore(uint64_t step_count) { step_count_ = step_count; }

 private:
  AdamConfig cfg_;
  std::vector<Tensor<T>> m_, v_;
  uint64_t step_count_ = 0;
};

}  // namespace caf
