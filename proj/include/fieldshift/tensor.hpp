#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fieldshift/errors.hpp"

namespace fieldshift {

/// Dense 4-D array in (batch, channel, row, col) order; the universal value
/// for images, activations, weights and gradients.
template <typename T>
class Tensor4 {
 public:
  Tensor4() = default;

  Tensor4(int n, int c, int h, int w) : n_(n), c_(c), h_(h), w_(w) {
    if (n < 1 || c < 1 || h < 1 || w < 1)
      throw DimensionError("Tensor4: all dimensions must be >= 1, got (" +
                           shape_str(n, c, h, w) + ")");
    data_.assign(static_cast<size_t>(n) * c * h * w, T(0));
  }

  Tensor4(int n, int c, int h, int w, T fill_value) : Tensor4(n, c, h, w) {
    data_.assign(data_.size(), fill_value);
  }

  int n() const { return n_; }
  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  size_t plane_size() const { return static_cast<size_t>(h_) * w_; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  T& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  const T& at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

  size_t index(int n, int c, int y, int x) const {
    return ((static_cast<size_t>(n) * c_ + c) * h_ + y) * w_ + x;
  }

  void fill(T value) { data_.assign(data_.size(), value); }

  bool same_shape(const Tensor4& other) const {
    return n_ == other.n_ && c_ == other.c_ && h_ == other.h_ && w_ == other.w_;
  }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  /// View the same storage with a new shape; element count must match.
  Tensor4 reshaped(int n, int c, int h, int w) const {
    if (static_cast<size_t>(n) * c * h * w != data_.size())
      throw DimensionError("Tensor4::reshaped: element count mismatch, (" +
                           shape_str(n, c, h, w) + ") vs " +
                           std::to_string(data_.size()) + " elements");
    Tensor4 out;
    out.n_ = n;
    out.c_ = c;
    out.h_ = h;
    out.w_ = w;
    out.data_ = data_;
    return out;
  }

  template <typename U>
  Tensor4<U> cast() const {
    Tensor4<U> out(n_, c_, h_, w_);
    for (size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  std::string shape_str() const { return shape_str(n_, c_, h_, w_); }

  static std::string shape_str(int n, int c, int h, int w) {
    return std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w);
  }

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<T> data_;
};

template <typename T>
void check_same_shape(const Tensor4<T>& a, const Tensor4<T>& b, const char* op) {
  if (a.n() != b.n())
    throw DimensionError(std::string(op) + ": batch axis mismatch (" +
                         std::to_string(a.n()) + " vs " + std::to_string(b.n()) + ")");
  if (a.c() != b.c())
    throw DimensionError(std::string(op) + ": channel axis mismatch (" +
                         std::to_string(a.c()) + " vs " + std::to_string(b.c()) + ")");
  if (a.h() != b.h() || a.w() != b.w())
    throw DimensionError(std::string(op) + ": spatial axes mismatch (" +
                         std::to_string(a.h()) + "x" + std::to_string(a.w()) +
                         " vs " + std::to_string(b.h()) + "x" +
                         std::to_string(b.w()) + ")");
}

}  // namespace fieldshift
