#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "arr/error.hpp"
#include "arr/numerics/tensor.hpp"

namespace arr {

/// Linear warmup from 0 to base_lr, then half-cosine decay to 0.
struct LrSchedule {
  double base_lr = 1e-4;
  std::size_t warmup_epochs = 20;
  std::size_t cosine_epochs = 30;
  std::size_t steps_per_epoch = 1;

  std::size_t warmup_steps() const { return warmup_epochs * steps_per_epoch; }
  std::size_t cosine_steps() const { return cosine_epochs * steps_per_epoch; }
};

inline double lr_at_step(const LrSchedule& s, std::size_t step) {
  const std::size_t warm = s.warmup_steps();
  const std::size_t cos_span = s.cosine_steps();
  if (step < warm) return s.base_lr * static_cast<double>(step) / static_cast<double>(warm);
  const std::size_t into = step - warm;
  if (into > cos_span) return 0.0;
  if (cos_span == 0) return step == warm ? s.base_lr : 0.0;
  const double u = static_cast<double>(into) / static_cast<double>(cos_span);
  return s.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * u));
}

// beta1/beta2/eps defaults are the customary Adam values.
struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 4e-5;
};

/// Adam with decoupled weight decay. Moments are kept per parameter in the
/// order of the ParameterList passed to step().
template <class T>
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  std::uint64_t steps() const { return step_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }

  /// One update of every parameter from its accumulated grad.
  void step(const ParameterList<T>& params, double lr) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.param->value.shape());
        v_.emplace_back(p.param->value.shape());
      }
    }
    if (m_.size() != params.size()) throw ShapeError("adam: parameter list changed between steps");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Parameter<T>& p = *params[i].param;
      if (m_[i].shape() != p.value.shape() || p.grad.shape() != p.value.shape()) {
        throw ShapeError("adam: shape mismatch for parameter " + params[i].name);
      }
      if (!p.grad.all_finite()) throw NumericError("adam: non-finite gradient in parameter " + params[i].name);
    }
    ++step_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    const double decay = 1.0 - lr * cfg_.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter<T>& p = *params[i].param;
      T* theta = p.value.data();
      const T* g = p.grad.data();
      T* m = m_[i].data();
      T* v = v_[i].data();
      for (std::size_t j = 0; j < p.value.size(); ++j) {
        double th = static_cast<double>(theta[j]) * decay;
        const double gj = g[j];
        const double mj = b1 * static_cast<double>(m[j]) + (1.0 - b1) * gj;
        const double vj = b2 * static_cast<double>(v[j]) + (1.0 - b2) * gj * gj;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        th -= lr * (mj / bc1) / (std::sqrt(vj / bc2) + cfg_.eps);
        theta[j] = static_cast<T>(th);
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::uint64_t step_ = 0;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
};

}  // namespace arr
