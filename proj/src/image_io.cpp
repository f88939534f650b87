#include "citytwin/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <string>

#include "citytwin/error.hpp"

namespace citytwin {

// ---------------------------------------------------------------------------
// PNG

namespace {

void png_append(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void png_consume(png_structp png, png_bytep data, png_size_t length) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + length > cur->bytes.size()) png_error(png, "truncated PNG");
  std::memcpy(data, cur->bytes.data() + cur->offset, length);
  cur->offset += length;
}

}  // namespace

std::vector<std::uint8_t> encode_png(std::span<const std::uint8_t> pixels, int width, int height,
                                     PixelFormat format) {
  const int channels = format == PixelFormat::rgb8 ? 3 : 4;
  if (width <= 0 || height <= 0 || pixels.size() != static_cast<std::size_t>(width) * height * channels)
    throw Error(Errc::shape, "PNG pixel buffer does not match dimensions");

  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(Errc::io, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(Errc::io, "PNG encoding failed");
  }
  png_set_write_fn(png, &out, png_append, png_flush_noop);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               format == PixelFormat::rgb8 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_RGBA, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + y * stride));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

DecodedPng decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw Error(Errc::validation, "not a PNG");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(Errc::io, "libpng initialisation failed");
  }
  DecodedPng result;
  ReadCursor cursor{bytes, 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(Errc::validation, "malformed PNG");
  }
  png_set_read_fn(png, &cursor, png_consume);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_packing(png);
  const auto type = png_get_color_type(png, info);
  if (type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (type == PNG_COLOR_TYPE_GRAY || type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);

  result.width = static_cast<int>(png_get_image_width(png, info));
  result.height = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  result.format = channels == 4 ? PixelFormat::rgba8 : PixelFormat::rgb8;
  const std::size_t stride = png_get_rowbytes(png, info);
  result.pixels.resize(stride * result.height);
  std::vector<png_bytep> rows(result.height);
  for (int y = 0; y < result.height; ++y) rows[y] = result.pixels.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return result;
}

// ---------------------------------------------------------------------------
// GIF

namespace {

constexpr int kTransparentIndex = 255;

std::uint8_t palette_index(const std::uint8_t* px) {
  if (px[3] < 128) return kTransparentIndex;
  const int r = static_cast<int>(std::lround(px[0] / 255.0 * 5));
  const int g = static_cast<int>(std::lround(px[1] / 255.0 * 6));
  const int b = static_cast<int>(std::lround(px[2] / 255.0 * 5));
  return static_cast<std::uint8_t>(r * 42 + g * 6 + b);
}

void put16(std::vector<std::uint8_t>& out, int v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

class BitPacker {
 public:
  void write(int code, int bits) {
    buffer_ |= static_cast<std::uint32_t>(code) << count_;
    count_ += bits;
    while (count_ >= 8) {
      bytes_.push_back(static_cast<std::uint8_t>(buffer_ & 0xff));
      buffer_ >>= 8;
      count_ -= 8;
    }
  }
  std::vector<std::uint8_t> finish() {
    if (count_ > 0) bytes_.push_back(static_cast<std::uint8_t>(buffer_ & 0xff));
    buffer_ = 0;
    count_ = 0;
    return std::move(bytes_);
  }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint32_t buffer_ = 0;
  int count_ = 0;
};

// Variable-width LZW with 8-bit roots; the table resets when it fills.
std::vector<std::uint8_t> lzw_encode(const std::vector<std::uint8_t>& indices) {
  constexpr int kClear = 256;
  constexpr int kEnd = 257;
  BitPacker bits;
  std::vector<int> table(4096 * 256, -1);  // (prefix code, next byte) -> code
  int next = kEnd + 1;
  int width = 9;
  bits.write(kClear, width);
  int prefix = indices.empty() ? -1 : indices[0];
  for (std::size_t i = 1; i < indices.size(); ++i) {
    const int k = indices[i];
    const std::size_t slot = static_cast<std::size_t>(prefix) * 256 + k;
    if (table[slot] >= 0) {
      prefix = table[slot];
      continue;
    }
    bits.write(prefix, width);
    if (next < 4096) {
      table[slot] = next++;
      if (next > (1 << width) && width < 12) ++width;
    } else {
      bits.write(kClear, width);
      std::fill(table.begin(), table.end(), -1);
      next = kEnd + 1;
      width = 9;
    }
    prefix = k;
  }
  if (prefix >= 0) bits.write(prefix, width);
  bits.write(kEnd, width);
  return bits.finish();
}

}  // namespace

std::vector<std::uint8_t> encode_gif(std::span<const GifFrame> frames, int width, int height) {
  if (frames.empty()) throw Error(Errc::validation, "GIF needs at least one frame");
  if (width <= 0 || height <= 0 || width > 65535 || height > 65535) throw Error(Errc::shape, "bad GIF size");
  std::vector<std::uint8_t> out{'G', 'I', 'F', '8', '9', 'a'};
  put16(out, width);
  put16(out, height);
  out.push_back(0xF7);  // global table, 8-bit colour resolution, 256 entries
  out.push_back(kTransparentIndex);
  out.push_back(0);
  for (int i = 0; i < 256; ++i) {
    if (i < 252) {
      out.push_back(static_cast<std::uint8_t>(std::lround((i / 42) * 255.0 / 5)));
      out.push_back(static_cast<std::uint8_t>(std::lround(((i / 6) % 7) * 255.0 / 6)));
      out.push_back(static_cast<std::uint8_t>(std::lround((i % 6) * 255.0 / 5)));
    } else {
      out.insert(out.end(), {0, 0, 0});
    }
  }
  // NETSCAPE2.0 application extension: loop forever.
  const std::uint8_t loop[] = {0x21, 0xFF, 0x0B, 'N', 'E', 'T', 'S', 'C', 'A', 'P', 'E', '2', '.', '0',
                               0x03, 0x01, 0x00, 0x00, 0x00};
  out.insert(out.end(), std::begin(loop), std::end(loop));

  const std::size_t count = static_cast<std::size_t>(width) * height;
  for (const auto& frame : frames) {
    if (frame.rgba.size() != count * 4) throw Error(Errc::shape, "GIF frame size mismatch");
    if (frame.delay_cs < 0 || frame.delay_cs > 65535) throw Error(Errc::range, "GIF delay out of range");
    out.insert(out.end(), {0x21, 0xF9, 0x04, static_cast<std::uint8_t>((2 << 2) | 1)});
    put16(out, frame.delay_cs);
    out.push_back(kTransparentIndex);
    out.push_back(0x00);

    out.push_back(0x2C);
    put16(out, 0);
    put16(out, 0);
    put16(out, width);
    put16(out, height);
    out.push_back(0x00);

    std::vector<std::uint8_t> indices(count);
    for (std::size_t i = 0; i < count; ++i) indices[i] = palette_index(&frame.rgba[4 * i]);
    const auto data = lzw_encode(indices);
    out.push_back(8);
    for (std::size_t at = 0; at < data.size(); at += 255) {
      const std::size_t n = std::min<std::size_t>(255, data.size() - at);
      out.push_back(static_cast<std::uint8_t>(n));
      out.insert(out.end(), data.begin() + at, data.begin() + at + n);
    }
    out.push_back(0x00);
  }
  out.push_back(0x3B);
  return out;
}

GifInfo inspect_gif(std::span<const std::uint8_t> bytes) {
  auto fail = [] { return Error(Errc::validation, "malformed GIF"); };
  if (bytes.size() < 13 || std::memcmp(bytes.data(), "GIF8", 4) != 0) throw fail();
  GifInfo info;
  info.width = bytes[6] | (bytes[7] << 8);
  info.height = bytes[8] | (bytes[9] << 8);
  std::size_t at = 13;
  if (bytes[10] & 0x80) at += 3u << ((bytes[10] & 7) + 1);
  auto skip_blocks = [&] {
    while (true) {
      if (at >= bytes.size()) throw fail();
      const std::size_t n = bytes[at++];
      if (n == 0) return;
      at += n;
    }
  };
  while (at < bytes.size()) {
    const std::uint8_t tag = bytes[at++];
    if (tag == 0x3B) return info;
    if (tag == 0x21) {
      if (at >= bytes.size()) throw fail();
      const std::uint8_t label = bytes[at++];
      if (label == 0xF9) {
        if (at + 5 > bytes.size()) throw fail();
        info.delays_cs.push_back(bytes[at + 2] | (bytes[at + 3] << 8));
      }
      skip_blocks();
    } else if (tag == 0x2C) {
      if (at + 9 > bytes.size()) throw fail();
      const std::uint8_t flags = bytes[at + 8];
      at += 9;
      if (flags & 0x80) at += 3u << ((flags & 7) + 1);
      ++at;  // LZW minimum code size
      skip_blocks();
    } else {
      throw fail();
    }
  }
  throw fail();
}

}  // namespace citytwin
