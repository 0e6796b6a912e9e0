#pragma once

#include <vector>

#include "fieldshift/rng.hpp"
#include "fieldshift/tensor.hpp"

namespace fieldshift {

/// History buffer of generated images used to update the discriminators.
/// Until the buffer is full every fresh image passes through and is stored;
/// afterwards each fresh image is swapped with a random buffered one with
/// probability one half.
template <typename T>
class ImagePool {
 public:
  ImagePool() = default;
  ImagePool(int capacity, uint64_t seed) : capacity_(capacity), rng_(seed) {
    if (capacity < 0) throw ParameterError("ImagePool: capacity must be >= 0");
  }

  /// Query per image of the batch; returned batch matches the input shape.
  Tensor4<T> query(const Tensor4<T>& fresh) {
    Tensor4<T> out(fresh.n(), fresh.c(), fresh.h(), fresh.w());
    const size_t image_size = fresh.size() / fresh.n();
    for (int k = 0; k < fresh.n(); ++k) {
      const T* src = fresh.data() + k * image_size;
      T* dst = out.data() + k * image_size;
      if (capacity_ == 0) {
        std::copy(src, src + image_size, dst);
        continue;
      }
      if (static_cast<int>(buffer_.size()) < capacity_) {
        buffer_.emplace_back(src, src + image_size);
        std::copy(src, src + image_size, dst);
        continue;
      }
      if (rng_.bernoulli(0.5)) {
        const size_t slot = rng_.bounded(buffer_.size());
        std::copy(buffer_[slot].begin(), buffer_[slot].end(), dst);
        buffer_[slot].assign(src, src + image_size);
      } else {
        std::copy(src, src + image_size, dst);
      }
    }
    return out;
  }

  int capacity() const { return capacity_; }
  size_t size() const { return buffer_.size(); }
  const std::vector<std::vector<T>>& buffer() const { return buffer_; }
  std::vector<std::vector<T>>& buffer() { return buffer_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

 private:
  int capacity_ = 50;
  std::vector<std::vector<T>> buffer_;
  Rng rng_;
};

}  // namespace fieldshift
