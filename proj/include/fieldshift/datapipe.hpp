#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fieldshift/data_types.hpp"
#include "fieldshift/imageops.hpp"
#include "fieldshift/rng.hpp"
#include "fieldshift/tensor.hpp"

namespace fieldshift {

namespace detail {

/// Fisher-Yates with our own engine so shuffles are platform-stable.
inline void deterministic_shuffle(std::vector<int>& idx, Rng& rng) {
  for (size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.bounded(i)]);
}

/// floor(frac*n) computed with a nudge so decimal fractions like 0.7 do not
/// fall one short of the exact rational value (0.7*350 rounds below 245).
inline int floor_fraction(double frac, size_t n) {
  return static_cast<int>(std::floor(frac * static_cast<double>(n) + 1e-9));
}

}  // namespace detail

enum class SlicePolicy {
  centered_uniform,  // evenly spaced across the central 60% of the axis
  all,               // every slice in order (count must equal the slice count)
};

/// Pull `count` axial slices out of a volume, raw intensities.
inline std::vector<SliceImage> extract_slices(const Volume& vol, int count = 10,
                                              SlicePolicy policy = SlicePolicy::centered_uniform) {
  if (count < 1) throw ParameterError("extract_slices: count must be >= 1");
  if (vol.nslices < count)
    throw DatasetError("extract_slices: volume " + vol.source_id + " has " +
                       std::to_string(vol.nslices) + " slices, need " +
                       std::to_string(count));
  std::vector<int> indices;
  indices.reserve(count);
  if (policy == SlicePolicy::all) {
    if (count != vol.nslices)
      throw DatasetError("extract_slices: policy `all` needs count == slice count");
    for (int i = 0; i < count; ++i) indices.push_back(i);
  } else {
    const int lo = detail::floor_fraction(0.2, static_cast<size_t>(vol.nslices));
    const int window = detail::floor_fraction(0.6, static_cast<size_t>(vol.nslices));
    if (window >= count) {
      for (int i = 0; i < count; ++i)
        indices.push_back(lo + static_cast<int>(static_cast<long>(i) * window / count));
    } else {
      // central window too narrow to give distinct indices; space over the
      // full axis instead
      for (int i = 0; i < count; ++i)
        indices.push_back(static_cast<int>(static_cast<long>(i) * vol.nslices / count));
    }
  }
  std::vector<SliceImage> out;
  out.reserve(indices.size());
  for (int z : indices) {
    SliceImage s;
    s.height = vol.nrows;
    s.width = vol.ncols;
    s.source_id = vol.source_id;
    s.slice_index = z;
    s.pixels.assign(vol.voxels.begin() + static_cast<long>(z) * vol.slice_size(),
                    vol.voxels.begin() + static_cast<long>(z + 1) * vol.slice_size());
    out.push_back(std::move(s));
  }
  return out;
}

/// Min-max scale to [0,1] (constant slice maps to zeros), then bilinear
/// resize to image_size x image_size.
inline SliceImage standardize(const SliceImage& slice, int image_size = 256) {
  if (image_size < 1) throw ParameterError("standardize: image_size must be >= 1");
  SliceImage out = slice;
  minmax_normalize(out.pixels);
  if (slice.height != image_size || slice.width != image_size) {
    out.pixels = resize_bilinear(out.pixels, slice.height, slice.width,
                                 image_size, image_size);
    out.height = out.width = image_size;
  }
  return out;
}

/// Deterministic shuffled split; |train| = floor(train_fraction * n).
inline SliceDataset split_dataset(const std::vector<SliceImage>& slices,
                                  double train_fraction, uint64_t seed) {
  if (slices.size() < 2)
    throw DatasetError("split_dataset: need at least 2 slices, got " +
                       std::to_string(slices.size()));
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ParameterError("split_dataset: train_fraction must lie in (0,1)");
  std::vector<int> idx(slices.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  Rng rng(seed);
  detail::deterministic_shuffle(idx, rng);
  const int n_train = detail::floor_fraction(train_fraction, slices.size());
  SliceDataset ds;
  ds.split_seed = seed;
  if (!slices.empty()) ds.domain = slices.front().domain;
  for (size_t i = 0; i < idx.size(); ++i) {
    if (static_cast<int>(i) < n_train)
      ds.train.push_back(slices[idx[i]]);
    else
      ds.test.push_back(slices[idx[i]]);
  }
  return ds;
}

/// Leakage-controlled variant: whole volumes (grouped by source_id) go to
/// one side only. Volumes are assigned to the training split in shuffled
/// order until it holds at least floor(train_fraction * n) slices, so the
/// exact slice count depends on the volume sizes.
inline SliceDataset split_dataset_by_volume(const std::vector<SliceImage>& slices,
                                            double train_fraction, uint64_t seed) {
  if (slices.size() < 2)
    throw DatasetError("split_dataset_by_volume: need at least 2 slices");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ParameterError("split_dataset_by_volume: train_fraction must lie in (0,1)");
  std::vector<std::string> order;
  std::map<std::string, std::vector<int>> groups;
  for (size_t i = 0; i < slices.size(); ++i) {
    auto [it, fresh] = groups.try_emplace(slices[i].source_id);
    if (fresh) order.push_back(slices[i].source_id);
    it->second.push_back(static_cast<int>(i));
  }
  std::vector<int> group_idx(order.size());
  for (size_t i = 0; i < group_idx.size(); ++i) group_idx[i] = static_cast<int>(i);
  Rng rng(seed);
  detail::deterministic_shuffle(group_idx, rng);

  const int target = detail::floor_fraction(train_fraction, slices.size());
  SliceDataset ds;
  ds.split_seed = seed;
  ds.domain = slices.front().domain;
  int assigned = 0;
  for (int gi : group_idx) {
    auto& members = groups[order[gi]];
    const bool to_train = assigned < target;
    for (int si : members)
      (to_train ? ds.train : ds.test).push_back(slices[si]);
    if (to_train) assigned += static_cast<int>(members.size());
  }
  if (ds.test.empty())
    throw DatasetError("split_dataset_by_volume: split left the test side empty "
                       "(need at least two volumes)");
  return ds;
}

/// Batches one dataset part as (batch,1,size,size) tensors. The final
/// partial batch is emitted as-is. Shuffle order is keyed on (seed, epoch),
/// so epochs differ but reruns reproduce.
template <typename T = float>
class BatchIterator {
 public:
  BatchIterator(const std::vector<SliceImage>& part, int batch_size, bool shuffle,
                uint64_t seed, int epoch)
      : part_(&part), batch_size_(batch_size) {
    if (batch_size < 1) throw ParameterError("batch_iter: batch_size must be >= 1");
    order_.resize(part.size());
    for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    if (shuffle) {
      Rng rng(mix_seed(seed, static_cast<uint64_t>(epoch) + 0x517cc1b727220a95ULL));
      detail::deterministic_shuffle(order_, rng);
    }
  }

  /// Fills `out` with the next batch; false when exhausted.
  bool next(Tensor4<T>& out) {
    if (cursor_ >= order_.size()) return false;
    const size_t remaining = order_.size() - cursor_;
    const int b = static_cast<int>(std::min<size_t>(batch_size_, remaining));
    const SliceImage& first = (*part_)[order_[cursor_]];
    out = Tensor4<T>(b, 1, first.height, first.width);
    for (int k = 0; k < b; ++k) {
      const SliceImage& img = (*part_)[order_[cursor_ + k]];
      if (img.height != first.height || img.width != first.width)
        throw DimensionError("batch_iter: mixed slice sizes in one dataset part");
      T* dst = out.data() + out.index(k, 0, 0, 0);
      for (size_t i = 0; i < img.pixels.size(); ++i)
        dst[i] = static_cast<T>(img.pixels[i]);
    }
    cursor_ += b;
    return true;
  }

  size_t batches_total() const {
    return (order_.size() + batch_size_ - 1) / batch_size_;
  }

 private:
  const std::vector<SliceImage>* part_;
  int batch_size_;
  std::vector<int> order_;
  size_t cursor_ = 0;
};

// ---------------------------------------------------------------------------
// dataset manifest (manifest.csv: file,domain,split,source_id,slice_index)
// ---------------------------------------------------------------------------

struct ManifestRow {
  std::string file;
  DomainTag domain = DomainTag::synthetic;
  std::string split;  // "train" | "test"
  std::string source_id;
  int slice_index = 0;
};

inline void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("write_manifest: cannot open " + path);
  out << "file,domain,split,source_id,slice_index\n";
  for (const auto& r : rows)
    out << r.file << ',' << domain_name(r.domain) << ',' << r.split << ','
        << r.source_id << ',' << r.slice_index << '\n';
  if (!out) throw IoError("write_manifest: short write to " + path);
}

inline std::vector<ManifestRow> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_manifest: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("file,domain,split", 0) != 0)
    throw FormatError("read_manifest: missing header in " + path);
  std::vector<ManifestRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestRow r;
    std::string domain, index;
    if (!std::getline(ls, r.file, ',') || !std::getline(ls, domain, ',') ||
        !std::getline(ls, r.split, ',') || !std::getline(ls, r.source_id, ',') ||
        !std::getline(ls, index))
      throw FormatError("read_manifest: malformed row in " + path + ": " + line);
    r.domain = parse_domain(domain);
    r.slice_index = std::stoi(index);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace fieldshift
