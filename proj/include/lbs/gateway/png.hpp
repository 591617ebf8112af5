#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lbs::gateway {

/// 8-bit RGB raster.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w * h * 3), 0) {}
  void set(int x, int y, std::uint32_t color);
  void fill(std::uint32_t color);
  void rect(int x0, int y0, int x1, int y1, std::uint32_t color);
  /// Draws upper-case ASCII with a 5x7 font scaled by `scale`. Characters
  /// without a glyph render as blanks.
  void text(int x, int y, const std::string& s, int scale, std::uint32_t color);
};

/// Encodes as a truecolor, non-interlaced PNG.
std::string encode_png(const Image& img);

}  // namespace lbs::gateway
