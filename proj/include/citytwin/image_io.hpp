#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace citytwin {

enum class PixelFormat { rgb8, rgba8 };

/// Encodes an 8-bit PNG. Output is deterministic: no timestamps, fixed
/// compression settings.
std::vector<std::uint8_t> encode_png(std::span<const std::uint8_t> pixels, int width, int height,
                                     PixelFormat format);

struct DecodedPng {
  int width = 0;
  int height = 0;
  PixelFormat format = PixelFormat::rgb8;
  std::vector<std::uint8_t> pixels;
};

/// Throws Errc::validation on malformed input.
DecodedPng decode_png(std::span<const std::uint8_t> bytes);

struct GifFrame {
  std::vector<std::uint8_t> rgba;  // width*height*4
  int delay_cs = 10;               // centiseconds
};

/// GIF89a, looping forever. Colours snap to a fixed 6x7x6 palette; pixels
/// with alpha below one half become the transparent index.
std::vector<std::uint8_t> encode_gif(std::span<const GifFrame> frames, int width, int height);

struct GifInfo {
  int width = 0;
  int height = 0;
  std::vector<int> delays_cs;
};

/// Walks the block structure of a GIF; enough to check frame count and delays.
GifInfo inspect_gif(std::span<const std::uint8_t> bytes);

}  // namespace citytwin
