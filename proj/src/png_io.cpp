// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgad/png_io.hpp"

#include <zlib.h>

#include <cstdlib>
#include <cstring>
#include <fstream>

#include "sgad/errors.hpp"

namespace sgad {

namespace {

const uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void write_chunk(std::vector<uint8_t>& out, const char type[4],
                 const std::vector<uint8_t>& payload) {
  put_u32(out, static_cast<uint32_t>(payload.size()));
  size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  uint32_t crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
  put_u32(out, crc);
}

uint8_t paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<uint8_t>(a);
  if (pb <= pc) return static_cast<uint8_t>(b);
  return static_cast<uint8_t>(c);
}

}  // namespace

void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<uint8_t>& rgb) {
  require(width >= 1 && height >= 1, ErrorCode::InvalidSize, "empty image");
  require(rgb.size() == static_cast<size_t>(width) * height * 3,
          ErrorCode::ShapeMismatch, "rgb buffer size mismatch");

  // filter byte 0 per scanline
  const size_t stride = static_cast<size_t>(width) * 3;
  std::vector<uint8_t> raw((stride + 1) * height);
  for (int y = 0; y < height; ++y) {
    raw[y * (stride + 1)] = 0;
    std::memcpy(raw.data() + y * (stride + 1) + 1, rgb.data() + y * stride, stride);
  }

  uLongf comp_bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> compressed(comp_bound);
  int rc = compress2(compressed.data(), &comp_bound, raw.data(),
                     static_cast<uLong>(raw.size()), Z_DEFAULT_COMPRESSION);
  require(rc == Z_OK, ErrorCode::IoError, "zlib compression failed");
  compressed.resize(comp_bound);

  std::vector<uint8_t> ihdr;
  put_u32(ihdr, static_cast<uint32_t>(width));
  put_u32(ihdr, static_cast<uint32_t>(height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // color type RGB
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter
  ihdr.push_back(0);  // no interlace

  std::vector<uint8_t> file(kSignature, kSignature + 8);
  write_chunk(file, "IHDR", ihdr);
  write_chunk(file, "IDAT", compressed);
  write_chunk(file, "IEND", {});

  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::IoError, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(file.data()),
            static_cast<std::streamsize>(file.size()));
  require(out.good(), ErrorCode::IoError, "failed writing " + path);
}

PngImage read_png_rgb(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot open " + path);
  std::vector<uint8_t> file((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
  require(file.size() > 8 && std::memcmp(file.data(), kSignature, 8) == 0,
          ErrorCode::IoError, path + " is not a PNG");

  PngImage img;
  std::vector<uint8_t> idat;
  size_t pos = 8;
  bool saw_ihdr = false;
  while (pos + 8 <= file.size()) {
    uint32_t len = get_u32(file.data() + pos);
    require(pos + 12 + len <= file.size(), ErrorCode::IoError, "truncated PNG");
    const char* type = reinterpret_cast<const char*>(file.data() + pos + 4);
    const uint8_t* payload = file.data() + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      require(len == 13, ErrorCode::IoError, "bad IHDR");
      img.width = static_cast<int>(get_u32(payload));
      img.height = static_cast<int>(get_u32(payload + 4));
      require(payload[8] == 8 && payload[9] == 2 && payload[12] == 0,
              ErrorCode::IoError, "only 8-bit RGB non-interlaced PNGs supported");
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  require(saw_ihdr && !idat.empty(), ErrorCode::IoError, "missing PNG chunks");

  const size_t stride = static_cast<size_t>(img.width) * 3;
  std::vector<uint8_t> raw((stride + 1) * img.height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  int rc = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
  require(rc == Z_OK && raw_len == raw.size(), ErrorCode::IoError,
          "zlib inflate failed for " + path);

  img.rgb.assign(stride * img.height, 0);
  for (int y = 0; y < img.height; ++y) {
    const uint8_t filter = raw[y * (stride + 1)];
    const uint8_t* src = raw.data() + y * (stride + 1) + 1;
    uint8_t* dst = img.rgb.data() + y * stride;
    const uint8_t* prev = y > 0 ? img.rgb.data() + (y - 1) * stride : nullptr;
    for (size_t x = 0; x < stride; ++x) {
      const int a = x >= 3 ? dst[x - 3] : 0;
      const int b = prev ? prev[x] : 0;
      const int c = (prev && x >= 3) ? prev[x - 3] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: fail(ErrorCode::IoError, "unsupported PNG filter");
      }
      dst[x] = static_cast<uint8_t>(v & 0xff);
    }
  }
  return img;
}

}  // namespace sgad
