#pragma once

#include <algorithm>
#include <cmath>

#include "fieldshift/tensor.hpp"

namespace fieldshift {

// Least-squares adversarial losses over linear patch scores (LSGAN form),
// plus L1 cycle consistency and binary cross-entropy for the DCGAN path.

/// mean((scores - 1)^2): how far the discriminator is from calling the
/// generated batch real.
template <typename T>
double adversarial_loss_generator(const Tensor4<T>& d_scores) {
  double acc = 0.0;
  for (size_t i = 0; i < d_scores.size(); ++i) {
    const double d = static_cast<double>(d_scores[i]) - 1.0;
    acc += d * d;
  }
  return acc / static_cast<double>(d_scores.size());
}

/// d/d scores of adversarial_loss_generator.
template <typename T>
Tensor4<T> adversarial_loss_generator_grad(const Tensor4<T>& d_scores) {
  Tensor4<T> g(d_scores.n(), d_scores.c(), d_scores.h(), d_scores.w());
  const T scale = static_cast<T>(2.0 / static_cast<double>(d_scores.size()));
  for (size_t i = 0; i < g.size(); ++i) g[i] = scale * (d_scores[i] - T(1));
  return g;
}

/// 0.5 * [mean((real-1)^2) + mean(fake^2)].
template <typename T>
double adversarial_loss_discriminator(const Tensor4<T>& real_scores,
                                      const Tensor4<T>& fake_scores) {
  double real_acc = 0.0, fake_acc = 0.0;
  for (size_t i = 0; i < real_scores.size(); ++i) {
    const double d = static_cast<double>(real_scores[i]) - 1.0;
    real_acc += d * d;
  }
  for (size_t i = 0; i < fake_scores.size(); ++i) {
    const double d = static_cast<double>(fake_scores[i]);
    fake_acc += d * d;
  }
  return 0.5 * (real_acc / static_cast<double>(real_scores.size()) +
                fake_acc / static_cast<double>(fake_scores.size()));
}

template <typename T>
Tensor4<T> adversarial_loss_discriminator_grad_real(const Tensor4<T>& real_scores) {
  Tensor4<T> g(real_scores.n(), real_scores.c(), real_scores.h(), real_scores.w());
  const T scale = static_cast<T>(1.0 / static_cast<double>(real_scores.size()));
  for (size_t i = 0; i < g.size(); ++i) g[i] = scale * (real_scores[i] - T(1));
  return g;
}

template <typename T>
Tensor4<T> adversarial_loss_discriminator_grad_fake(const Tensor4<T>& fake_scores) {
  Tensor4<T> g(fake_scores.n(), fake_scores.c(), fake_scores.h(), fake_scores.w());
  const T scale = static_cast<T>(1.0 / static_cast<double>(fake_scores.size()));
  for (size_t i = 0; i < g.size(); ++i) g[i] = scale * fake_scores[i];
  return g;
}

/// Mean absolute difference per element (L1).
template <typename T>
double cycle_loss(const Tensor4<T>& x, const Tensor4<T>& reconstructed) {
  check_same_shape(x, reconstructed, "cycle_loss");
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i)
    acc += std::abs(static_cast<double>(reconstructed[i]) - static_cast<double>(x[i]));
  return acc / static_cast<double>(x.size());
}

/// d/d reconstructed of cycle_loss: sign(reconstructed - x)/N.
template <typename T>
Tensor4<T> cycle_loss_grad(const Tensor4<T>& x, const Tensor4<T>& reconstructed) {
  check_same_shape(x, reconstructed, "cycle_loss");
  Tensor4<T> g(x.n(), x.c(), x.h(), x.w());
  const T scale = static_cast<T>(1.0 / static_cast<double>(x.size()));
  for (size_t i = 0; i < g.size(); ++i) {
    const T d = reconstructed[i] - x[i];
    g[i] = d > T(0) ? scale : (d < T(0) ? -scale : T(0));
  }
  return g;
}

inline constexpr double kBceClamp = 1e-7;

/// mean of -[y ln p + (1-y) ln(1-p)], p clamped to [1e-7, 1-1e-7].
template <typename T>
double bce_loss(const Tensor4<T>& predictions, const Tensor4<T>& labels) {
  check_same_shape(predictions, labels, "bce_loss");
  double acc = 0.0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    const double p = std::clamp(static_cast<double>(predictions[i]), kBceClamp,
                                1.0 - kBceClamp);
    const double y = static_cast<double>(labels[i]);
    acc -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return acc / static_cast<double>(predictions.size());
}

/// d/d predictions of bce_loss; zero where the clamp is active.
template <typename T>
Tensor4<T> bce_loss_grad(const Tensor4<T>& predictions, const Tensor4<T>& labels) {
  check_same_shape(predictions, labels, "bce_loss");
  Tensor4<T> g(predictions.n(), predictions.c(), predictions.h(), predictions.w());
  const double scale = 1.0 / static_cast<double>(predictions.size());
  for (size_t i = 0; i < g.size(); ++i) {
    const double p = static_cast<double>(predictions[i]);
    if (p < kBceClamp || p > 1.0 - kBceClamp) {
      g[i] = T(0);
      continue;
    }
    const double y = static_cast<double>(labels[i]);
    g[i] = static_cast<T>(scale * (p - y) / (p * (1.0 - p)));
  }
  return g;
}

}  // namespace fieldshift
