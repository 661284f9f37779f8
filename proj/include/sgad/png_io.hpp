// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sgad {

// Minimal 8-bit RGB PNG writer/reader (non-interlaced, color type 2), enough
// for the dataset images this project produces.
void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<uint8_t>& rgb);

struct PngImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // row-major, 3 bytes per pixel
};

PngImage read_png_rgb(const std::string& path);

}  // namespace sgad
