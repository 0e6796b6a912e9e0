#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fieldshift/data_types.hpp"
#include "fieldshift/datapipe.hpp"
#include "fieldshift/rng.hpp"

namespace fieldshift {

namespace detail {

inline double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

/// Base phantom: a bright head ellipse with a skull ring, interior matter
/// and two dark ventricles, geometry jittered per image. Values in [0,1].
inline std::vector<float> phantom_base(int size, Rng& geom) {
  const double cx = size * (0.5 + geom.uniform(-0.03, 0.03));
  const double cy = size * (0.5 + geom.uniform(-0.03, 0.03));
  const double ax = size * geom.uniform(0.37, 0.45);
  const double ay = size * geom.uniform(0.40, 0.48);
  const double theta = geom.uniform(-0.3, 0.3);
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);

  struct Vent {
    double cx, cy, ax, ay;
  };
  Vent vents[2];
  for (int k = 0; k < 2; ++k) {
    const double side = k == 0 ? -1.0 : 1.0;
    vents[k].cx = cx + side * size * geom.uniform(0.08, 0.14);
    vents[k].cy = cy + size * geom.uniform(-0.06, 0.02);
    vents[k].ax = size * geom.uniform(0.05, 0.09);
    vents[k].ay = size * geom.uniform(0.08, 0.14);
  }
  const double wm_level = geom.uniform(0.80, 0.90);

  std::vector<float> img(static_cast<size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double rx = (dx * cos_t + dy * sin_t) / ax;
      const double ry = (-dx * sin_t + dy * cos_t) / ay;
      const double r = std::sqrt(rx * rx + ry * ry);

      double v = 0.40;  // bright-ish background keeps contrast scaling visible
      const double head = smoothstep((1.02 - r) / 0.06);
      const double matter = wm_level * (1.0 - 0.10 * r);
      v = v * (1.0 - head) + matter * head;
      // skull ring
      const double ring = std::exp(-std::pow((r - 0.94) / 0.045, 2.0));
      v = std::max(v, 0.96 * ring);
      // ventricles
      for (const auto& vent : vents) {
        const double vx = (x - vent.cx) / vent.ax;
        const double vy = (y - vent.cy) / vent.ay;
        const double rv = std::sqrt(vx * vx + vy * vy);
        const double inside = smoothstep((1.0 - rv) / 0.25);
        v = v * (1.0 - inside) + 0.32 * inside;
      }
      img[static_cast<size_t>(y) * size + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return img;
}

inline void blur3(std::vector<float>& img, int size) {
  // separable [1,2,1]/4 pass, edges clamped
  std::vector<float> tmp(img.size());
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, size - 1);
      tmp[static_cast<size_t>(y) * size + x] =
          0.25f * img[static_cast<size_t>(y) * size + xm] +
          0.5f * img[static_cast<size_t>(y) * size + x] +
          0.25f * img[static_cast<size_t>(y) * size + xp];
    }
  }
  for (int x = 0; x < size; ++x) {
    for (int y = 0; y < size; ++y) {
      const int ym = std::max(y - 1, 0), yp = std::min(y + 1, size - 1);
      img[static_cast<size_t>(y) * size + x] =
          0.25f * tmp[static_cast<size_t>(ym) * size + x] +
          0.5f * tmp[static_cast<size_t>(y) * size + x] +
          0.25f * tmp[static_cast<size_t>(yp) * size + x];
    }
  }
}

}  // namespace detail

inline constexpr double kPhantomSourceNoise = 0.02;
inline constexpr double kPhantomTargetNoise = 0.06;
inline constexpr double kPhantomSourceGain = 1.12;
inline constexpr double kPhantomTargetContrast = 0.7;

/// Synthetic stand-in for the clinical volumes. Geometry is derived from
/// (seed, index) only, so datasets generated for different domains from the
/// same seed are pixel-aligned pairs linked by the domain transform:
/// source_3T adds low noise; target_1p5T compresses contrast (x0.7), blurs
/// mildly and adds stronger noise.
inline SliceDataset make_phantom_dataset(int n, int size, DomainTag domain,
                                         uint64_t seed) {
  if (n < 2) throw ParameterError("make_phantom_dataset: n must be >= 2");
  if (size < 16) throw ParameterError("make_phantom_dataset: size must be >= 16");
  std::vector<SliceImage> slices;
  slices.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng geom(mix_seed(seed, static_cast<uint64_t>(i)));
    std::vector<float> img = detail::phantom_base(size, geom);
    Rng noise(mix_seed(mix_seed(seed, static_cast<uint64_t>(i)),
                       0xd0a1u + static_cast<uint64_t>(domain)));
    switch (domain) {
      case DomainTag::source_3T:
        for (auto& v : img)
          v = std::clamp(static_cast<float>(kPhantomSourceGain) * v +
                             static_cast<float>(noise.normal(0.0, kPhantomSourceNoise)),
                         0.0f, 1.0f);
        break;
      case DomainTag::target_1p5T:
        for (auto& v : img) v = static_cast<float>(kPhantomTargetContrast) * v;
        detail::blur3(img, size);
        for (auto& v : img)
          v = std::clamp(v + static_cast<float>(noise.normal(0.0, kPhantomTargetNoise)),
                         0.0f, 1.0f);
        break;
      case DomainTag::synthetic:
        break;
    }
    SliceImage s;
    s.height = s.width = size;
    s.pixels = std::move(img);
    s.source_id = "phantom_" + std::to_string(seed) + "_" + std::to_string(i);
    s.slice_index = i;
    s.domain = domain;
    slices.push_back(std::move(s));
  }
  return split_dataset(slices, 0.7, seed);
}

/// Synthetic 3-D volume with per-slice phantom structure at a raw intensity
/// scale (0..1000); feeds the NIfTI writer in tests and demos.
inline Volume make_phantom_volume(int nslices, int nrows, int ncols, uint64_t seed) {
  Volume vol;
  vol.nslices = nslices;
  vol.nrows = nrows;
  vol.ncols = ncols;
  vol.spacing = {2.0f, 2.0f, 2.0f};
  vol.source_id = "phantom_vol_" + std::to_string(seed);
  vol.voxels.resize(static_cast<size_t>(nslices) * nrows * ncols);
  for (int z = 0; z < nslices; ++z) {
    Rng geom(mix_seed(seed, static_cast<uint64_t>(z)));
    // square base then resize if the slice is not square
    const int base = std::min(nrows, ncols);
    std::vector<float> img = detail::phantom_base(base, geom);
    if (base != nrows || base != ncols)
      img = resize_bilinear(img, base, base, nrows, ncols);
    for (size_t i = 0; i < img.size(); ++i)
      vol.voxels[static_cast<size_t>(z) * vol.slice_size() + i] =
          std::round(img[i] * 1000.0f);
  }
  return vol;
}

}  // namespace fieldshift
