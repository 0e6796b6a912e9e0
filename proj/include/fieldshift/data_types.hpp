#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fieldshift/errors.hpp"

namespace fieldshift {

/// A 3-D scan volume in (slice, row, col) order.
struct Volume {
  int nslices = 0, nrows = 0, ncols = 0;
  std::vector<float> voxels;  // index [z][y][x] = z*nrows*ncols + y*ncols + x
  std::array<float, 3> spacing = {1.0f, 1.0f, 1.0f};  // mm per axis (x, y, z)
  std::string source_id;

  size_t slice_size() const { return static_cast<size_t>(nrows) * ncols; }

  float at(int z, int y, int x) const {
    return voxels[(static_cast<size_t>(z) * nrows + y) * ncols + x];
  }
  float& at(int z, int y, int x) {
    return voxels[(static_cast<size_t>(z) * nrows + y) * ncols + x];
  }
};

enum class DomainTag { source_3T, target_1p5T, synthetic };

inline const char* domain_name(DomainTag tag) {
  switch (tag) {
    case DomainTag::source_3T: return "source_3T";
    case DomainTag::target_1p5T: return "target_1p5T";
    case DomainTag::synthetic: return "synthetic";
  }
  return "?";
}

inline DomainTag parse_domain(const std::string& name) {
  if (name == "source_3T") return DomainTag::source_3T;
  if (name == "target_1p5T") return DomainTag::target_1p5T;
  if (name == "synthetic") return DomainTag::synthetic;
  throw FormatError("unknown domain tag: " + name);
}

/// One 2-D slice with provenance. Pixels are guaranteed to lie in [0,1]
/// once the slice has passed through standardize().
struct SliceImage {
  int height = 0, width = 0;
  std::vector<float> pixels;
  std::string source_id;
  int slice_index = 0;
  DomainTag domain = DomainTag::synthetic;
};

/// A named train/test partition of slices from one domain.
struct SliceDataset {
  std::vector<SliceImage> train;
  std::vector<SliceImage> test;
  DomainTag domain = DomainTag::synthetic;
  uint64_t split_seed = 0;

  size_t total() const { return train.size() + test.size(); }
};

}  // namespace fieldshift
