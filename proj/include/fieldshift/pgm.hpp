#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "fieldshift/errors.hpp"

namespace fieldshift {

/// 16-bit binary PGM (P5, maxval 65535). Sample bytes are big-endian per
/// the netpbm format. Pixel values map linearly between [0,1] and
/// [0,65535].
inline void write_pgm16(const std::string& path, const std::vector<float>& pixels,
                        int height, int width) {
  if (static_cast<size_t>(height) * width != pixels.size())
    throw DimensionError("write_pgm16: pixel count does not match h*w");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_pgm16: cannot open " + path);
  out << "P5\n" << width << " " << height << "\n65535\n";
  std::vector<uint8_t> bytes(pixels.size() * 2);
  for (size_t i = 0; i < pixels.size(); ++i) {
    const double clamped = std::clamp(static_cast<double>(pixels[i]), 0.0, 1.0);
    const uint16_t v = static_cast<uint16_t>(std::lround(clamped * 65535.0));
    bytes[2 * i] = static_cast<uint8_t>(v >> 8);
    bytes[2 * i + 1] = static_cast<uint8_t>(v & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write_pgm16: short write to " + path);
}

inline std::vector<float> read_pgm16(const std::string& path, int& height, int& width) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_pgm16: cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw FormatError("read_pgm16: bad magic in " + path);
  auto next_token = [&in, &path]() -> long {
    // skip whitespace and # comments
    for (;;) {
      int ch = in.peek();
      if (ch == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(ch)) {
        in.get();
      } else {
        break;
      }
    }
    long v;
    if (!(in >> v)) throw FormatError("read_pgm16: truncated header in " + path);
    return v;
  };
  width = static_cast<int>(next_token());
  height = static_cast<int>(next_token());
  const long maxval = next_token();
  if (width < 1 || height < 1) throw FormatError("read_pgm16: bad dimensions in " + path);
  if (maxval != 65535)
    throw FormatError("read_pgm16: expected maxval 65535 in " + path + ", got " +
                      std::to_string(maxval));
  in.get();  // single whitespace after maxval
  const size_t count = static_cast<size_t>(height) * width;
  std::vector<uint8_t> bytes(count * 2);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<size_t>(in.gcount()) != bytes.size())
    throw IoError("read_pgm16: truncated pixel data in " + path);
  std::vector<float> pixels(count);
  for (size_t i = 0; i < count; ++i) {
    const uint16_t v = static_cast<uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]);
    pixels[i] = static_cast<float>(v) / 65535.0f;
  }
  return pixels;
}

}  // namespace fieldshift
