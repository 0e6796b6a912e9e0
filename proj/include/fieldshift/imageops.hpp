#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fieldshift/errors.hpp"

namespace fieldshift {

/// Bilinear resample of a single-channel image. Grid corners are aligned,
/// so corner pixels map exactly and same-size resizes are the identity.
template <typename T>
std::vector<T> resize_bilinear(const std::vector<T>& src, int src_h, int src_w,
                               int dst_h, int dst_w) {
  if (src_h < 1 || src_w < 1 || dst_h < 1 || dst_w < 1)
    throw DimensionError("resize_bilinear: dimensions must be >= 1");
  if (static_cast<size_t>(src_h) * src_w != src.size())
    throw DimensionError("resize_bilinear: pixel count does not match h*w");
  std::vector<T> dst(static_cast<size_t>(dst_h) * dst_w);
  const double sy = dst_h == 1 ? 0.0 : static_cast<double>(src_h - 1) / (dst_h - 1);
  const double sx = dst_w == 1 ? 0.0 : static_cast<double>(src_w - 1) / (dst_w - 1);
  for (int i = 0; i < dst_h; ++i) {
    const double fy = dst_h == 1 ? (src_h - 1) / 2.0 : i * sy;
    const int y0 = std::min(static_cast<int>(fy), src_h - 1);
    const int y1 = std::min(y0 + 1, src_h - 1);
    const double wy = fy - y0;
    for (int j = 0; j < dst_w; ++j) {
      const double fx = dst_w == 1 ? (src_w - 1) / 2.0 : j * sx;
      const int x0 = std::min(static_cast<int>(fx), src_w - 1);
      const int x1 = std::min(x0 + 1, src_w - 1);
      const double wx = fx - x0;
      const double top = (1.0 - wx) * src[static_cast<size_t>(y0) * src_w + x0] +
                         wx * src[static_cast<size_t>(y0) * src_w + x1];
      const double bot = (1.0 - wx) * src[static_cast<size_t>(y1) * src_w + x0] +
                         wx * src[static_cast<size_t>(y1) * src_w + x1];
      dst[static_cast<size_t>(i) * dst_w + j] = static_cast<T>((1.0 - wy) * top + wy * bot);
    }
  }
  return dst;
}

/// Min-max rescale onto [0,1]; a constant image maps to all zeros.
template <typename T>
void minmax_normalize(std::vector<T>& pixels) {
  if (pixels.empty()) return;
  T lo = pixels[0], hi = pixels[0];
  for (T v : pixels) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi <= lo) {
    std::fill(pixels.begin(), pixels.end(), T(0));
    return;
  }
  const T range = hi - lo;
  for (T& v : pixels) v = (v - lo) / range;
}

/// Tile same-size images into a rows x cols grid with a 1px separator.
template <typename T>
std::vector<T> tile_grid(const std::vector<std::vector<T>>& images, int img_h,
                         int img_w, int rows, int cols, int& out_h, int& out_w) {
  const int gap = 1;
  out_h = rows * img_h + (rows - 1) * gap;
  out_w = cols * img_w + (cols - 1) * gap;
  std::vector<T> grid(static_cast<size_t>(out_h) * out_w, T(1));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const size_t idx = static_cast<size_t>(r) * cols + c;
      if (idx >= images.size()) continue;
      const auto& img = images[idx];
      const int oy = r * (img_h + gap);
      const int ox = c * (img_w + gap);
      for (int y = 0; y < img_h; ++y)
        for (int x = 0; x < img_w; ++x)
          grid[static_cast<size_t>(oy + y) * out_w + ox + x] =
              img[static_cast<size_t>(y) * img_w + x];
    }
  }
  return grid;
}

}  // namespace fieldshift
