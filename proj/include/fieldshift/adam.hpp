#pragma once

#include <cmath>
#include <vector>

#include "fieldshift/network.hpp"

namespace fieldshift {

/// Adam with bias correction; one slot pair (m, v) per parameter tensor.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(double lr, double beta1, double beta2, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void attach(const NetworkState<T>& net) {
    m_.clear();
    v_.clear();
    for (const auto& p : net.params) {
      m_.emplace_back(p.size(), T(0));
      v_.emplace_back(p.size(), T(0));
    }
    step_ = 0;
  }

  /// Applies one update from the accumulated gradients in `net`.
  void step(NetworkState<T>& net) {
    if (m_.size() != net.params.size())
      throw ParameterError("Adam: optimizer slots do not align with the parameter set");
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (size_t pi = 0; pi < net.params.size(); ++pi) {
      auto& p = net.params[pi];
      T* value = p.data();
      const T* grad = p.grad_data();
      T* m = m_[pi].data();
      T* v = v_[pi].data();
      for (size_t i = 0; i < p.size(); ++i) {
        const double g = static_cast<double>(grad[i]);
        const double mi = beta1_ * static_cast<double>(m[i]) + (1.0 - beta1_) * g;
        const double vi = beta2_ * static_cast<double>(v[i]) + (1.0 - beta2_) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        value[i] = static_cast<T>(static_cast<double>(value[i]) -
                                  lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  long step_count() const { return step_; }
  void set_step_count(long s) { step_ = s; }
  double lr() const { return lr_; }

  std::vector<std::vector<T>>& first_moments() { return m_; }
  std::vector<std::vector<T>>& second_moments() { return v_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }

 private:
  double lr_ = 2e-4;
  double beta1_ = 0.5;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long step_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

}  // namespace fieldshift
