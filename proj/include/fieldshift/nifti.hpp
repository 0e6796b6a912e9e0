#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "fieldshift/bytes.hpp"
#include "fieldshift/data_types.hpp"
#include "fieldshift/errors.hpp"

namespace fieldshift {

// Single-file uncompressed NIfTI-1 (.nii), magic "n+1". Supported sample
// types: uint8 (code 2), int16 (4), float32 (16). Both byte orders are
// read; the order is detected from dim[0], which must land in [1,7].

namespace detail {

struct NiftiScalarReader {
  const uint8_t* base;
  bool swap;

  int16_t i16(size_t offset) const {
    uint16_t v;
    std::memcpy(&v, base + offset, 2);
    if (swap) v = swap16(v);
    int16_t out;
    std::memcpy(&out, &v, 2);
    return out;
  }
  float f32(size_t offset) const {
    uint32_t v;
    std::memcpy(&v, base + offset, 4);
    if (swap) v = swap32(v);
    float out;
    std::memcpy(&out, &v, 4);
    return out;
  }
};

}  // namespace detail

inline constexpr int kNiftiHeaderSize = 348;
inline constexpr int16_t kNiftiUint8 = 2;
inline constexpr int16_t kNiftiInt16 = 4;
inline constexpr int16_t kNiftiFloat32 = 16;

/// Reads the supported NIfTI-1 subset. Voxels are scaled by
/// raw*scl_slope + scl_inter when scl_slope != 0, and taken raw otherwise.
inline Volume read_nifti(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_nifti: cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (bytes.size() < static_cast<size_t>(kNiftiHeaderSize))
    throw FormatError("read_nifti: file shorter than the 348-byte header: " + path);

  if (std::memcmp(bytes.data() + 344, "n+1\0", 4) != 0)
    throw FormatError("read_nifti: bad magic (expected \"n+1\"): " + path);

  // byte order: dim[0] (number of dimensions) must land in [1,7]
  detail::NiftiScalarReader native{bytes.data(), false};
  int16_t ndim = native.i16(40);
  bool swap = false;
  if (ndim < 1 || ndim > 7) {
    swap = true;
    detail::NiftiScalarReader swapped{bytes.data(), true};
    ndim = swapped.i16(40);
    if (ndim < 1 || ndim > 7)
      throw FormatError("read_nifti: dim[0] invalid in either byte order: " + path);
  }
  detail::NiftiScalarReader hdr{bytes.data(), swap};

  const int16_t dim4 = hdr.i16(40 + 4 * 2);
  if (!(ndim == 3 || (ndim == 4 && dim4 == 1)))
    throw FormatError("read_nifti: unsupported shape dim[0]=" + std::to_string(ndim) +
                      " in " + path);

  const int nx = hdr.i16(40 + 1 * 2);
  const int ny = hdr.i16(40 + 2 * 2);
  const int nz = hdr.i16(40 + 3 * 2);
  if (nx < 1 || ny < 1 || nz < 1)
    throw FormatError("read_nifti: non-positive dimensions in " + path);

  const int16_t datatype = hdr.i16(70);
  int bytes_per_voxel = 0;
  switch (datatype) {
    case kNiftiUint8: bytes_per_voxel = 1; break;
    case kNiftiInt16: bytes_per_voxel = 2; break;
    case kNiftiFloat32: bytes_per_voxel = 4; break;
    default:
      throw UnsupportedDtypeError("read_nifti: unsupported datatype code " +
                                  std::to_string(datatype) + " in " + path);
  }

  const float vox_offset = hdr.f32(108);
  const float scl_slope = hdr.f32(112);
  const float scl_inter = hdr.f32(116);
  const size_t offset = static_cast<size_t>(vox_offset);
  const size_t count = static_cast<size_t>(nx) * ny * nz;
  if (offset < static_cast<size_t>(kNiftiHeaderSize) ||
      bytes.size() < offset + count * bytes_per_voxel)
    throw IoError("read_nifti: truncated data section in " + path);

  Volume vol;
  vol.ncols = nx;
  vol.nrows = ny;
  vol.nslices = nz;
  vol.spacing = {hdr.f32(76 + 4), hdr.f32(76 + 8), hdr.f32(76 + 12)};
  vol.source_id = path;
  vol.voxels.resize(count);

  const uint8_t* data = bytes.data() + offset;
  const bool scaled = scl_slope != 0.0f;
  for (size_t i = 0; i < count; ++i) {
    float raw;
    switch (datatype) {
      case kNiftiUint8:
        raw = static_cast<float>(data[i]);
        break;
      case kNiftiInt16: {
        uint16_t v;
        std::memcpy(&v, data + 2 * i, 2);
        if (swap) v = detail::swap16(v);
        int16_t s;
        std::memcpy(&s, &v, 2);
        raw = static_cast<float>(s);
        break;
      }
      default: {  // float32
        uint32_t v;
        std::memcpy(&v, data + 4 * i, 4);
        if (swap) v = detail::swap32(v);
        std::memcpy(&raw, &v, 4);
        break;
      }
    }
    vol.voxels[i] = scaled ? raw * scl_slope + scl_inter : raw;
  }
  for (float v : vol.voxels)
    if (!std::isfinite(v)) throw FormatError("read_nifti: non-finite voxel in " + path);
  return vol;
}

/// Companion writer for the same subset. The volume's voxels are stored as
/// the raw samples (cast to `datatype`); scl_slope/scl_inter land in the
/// header for the reader to apply.
inline void write_nifti(const Volume& vol, const std::string& path,
                        int16_t datatype = kNiftiInt16, float scl_slope = 0.0f,
                        float scl_inter = 0.0f, bool big_endian = false) {
  int bytes_per_voxel;
  int16_t bitpix;
  switch (datatype) {
    case kNiftiUint8: bytes_per_voxel = 1; bitpix = 8; break;
    case kNiftiInt16: bytes_per_voxel = 2; bitpix = 16; break;
    case kNiftiFloat32: bytes_per_voxel = 4; bitpix = 32; break;
    default:
      throw UnsupportedDtypeError("write_nifti: unsupported datatype code " +
                                  std::to_string(datatype));
  }
  std::vector<uint8_t> header(352, 0);  // 348-byte header + 4 pad to vox_offset
  auto put16 = [&](size_t off, int16_t v) {
    uint16_t u;
    std::memcpy(&u, &v, 2);
    if (big_endian) u = detail::swap16(u);
    std::memcpy(header.data() + off, &u, 2);
  };
  auto put32f = [&](size_t off, float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    if (big_endian) u = detail::swap32(u);
    std::memcpy(header.data() + off, &u, 4);
  };
  auto put32i = [&](size_t off, int32_t v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    if (big_endian) u = detail::swap32(u);
    std::memcpy(header.data() + off, &u, 4);
  };

  put32i(0, kNiftiHeaderSize);
  put16(40, 3);  // dim[0]
  put16(42, static_cast<int16_t>(vol.ncols));
  put16(44, static_cast<int16_t>(vol.nrows));
  put16(46, static_cast<int16_t>(vol.nslices));
  for (size_t d = 4; d <= 7; ++d) put16(40 + 2 * d, 1);
  put16(70, datatype);
  put16(72, bitpix);
  put32f(76, 1.0f);
  put32f(80, vol.spacing[0]);
  put32f(84, vol.spacing[1]);
  put32f(88, vol.spacing[2]);
  put32f(108, 352.0f);  // vox_offset
  put32f(112, scl_slope);
  put32f(116, scl_inter);
  std::memcpy(header.data() + 344, "n+1\0", 4);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_nifti: cannot open " + path);
  out.write(reinterpret_cast<const char*>(header.data()),
            static_cast<std::streamsize>(header.size()));

  std::vector<uint8_t> data(vol.voxels.size() * bytes_per_voxel);
  for (size_t i = 0; i < vol.voxels.size(); ++i) {
    switch (datatype) {
      case kNiftiUint8:
        data[i] = static_cast<uint8_t>(std::lround(vol.voxels[i]));
        break;
      case kNiftiInt16: {
        int16_t s = static_cast<int16_t>(std::lround(vol.voxels[i]));
        uint16_t u;
        std::memcpy(&u, &s, 2);
        if (big_endian) u = detail::swap16(u);
        std::memcpy(data.data() + 2 * i, &u, 2);
        break;
      }
      default: {
        float f = vol.voxels[i];
        uint32_t u;
        std::memcpy(&u, &f, 4);
        if (big_endian) u = detail::swap32(u);
        std::memcpy(data.data() + 4 * i, &u, 4);
        break;
      }
    }
  }
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write_nifti: short write to " + path);
}

}  // namespace fieldshift
