#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "fieldshift/rng.hpp"
#include "fieldshift/tensor.hpp"

namespace fieldshift {

/// Mutable view of one parameter buffer plus its analytic gradient buffer.
template <typename T>
struct ParamView {
  std::string name;
  T* data = nullptr;
  size_t size = 0;
  const T* grad = nullptr;
};

struct GradCheckOptions {
  double eps = 1e-4;
  /// Cap on checked coordinates per parameter; 0 checks every coordinate.
  int max_coords_per_param = 0;
  uint64_t seed = 0x5eed;
};

template <typename T>
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
};

/// Compares analytic gradients against central differences of the scalar
/// objective L = sum(P * forward()) for a fixed random projection P.
///
/// forward() must be deterministic and re-runnable; backward(P) must fill
/// every ParamView::grad with dL/dparam for grad_out = P.
template <typename T>
GradCheckReport<T> grad_check(const std::function<Tensor4<T>()>& forward,
                              const std::function<void(const Tensor4<T>&)>& backward,
                              std::vector<ParamView<T>> params,
                              GradCheckOptions opt = {}) {
  Rng rng(opt.seed);
  Tensor4<T> probe = forward();
  Tensor4<T> projection(probe.n(), probe.c(), probe.h(), probe.w());
  for (size_t i = 0; i < projection.size(); ++i)
    projection[i] = static_cast<T>(rng.normal());

  auto objective = [&]() -> double {
    Tensor4<T> y = forward();
    double acc = 0.0;
    for (size_t i = 0; i < y.size(); ++i)
      acc += static_cast<double>(y[i]) * static_cast<double>(projection[i]);
    return acc;
  };

  backward(projection);

  GradCheckReport<T> report;
  const T eps = static_cast<T>(opt.eps);
  for (const auto& p : params) {
    for (size_t i = 0; i < p.size; ++i)
      if (!std::isfinite(static_cast<double>(p.grad[i])))
        throw GradCheckError("grad_check: non-finite gradient in parameter " + p.name);

    std::vector<size_t> coords;
    if (opt.max_coords_per_param <= 0 ||
        p.size <= static_cast<size_t>(opt.max_coords_per_param)) {
      coords.resize(p.size);
      for (size_t i = 0; i < p.size; ++i) coords[i] = i;
    } else {
      coords.reserve(opt.max_coords_per_param);
      for (int j = 0; j < opt.max_coords_per_param; ++j)
        coords.push_back(rng.bounded(p.size));
    }

    for (size_t i : coords) {
      const T orig = p.data[i];
      p.data[i] = orig + eps;
      const double up = objective();
      p.data[i] = orig - eps;
      const double down = objective();
      p.data[i] = orig;
      const double fd = (up - down) / (2.0 * static_cast<double>(eps));
      const double an = static_cast<double>(p.grad[i]);
      const double denom = std::max({std::abs(an), std::abs(fd), 1e-8});
      const double rel = std::abs(an - fd) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

}  // namespace fieldshift
