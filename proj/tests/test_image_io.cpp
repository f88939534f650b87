#include <random>

#include "citytwin/image_io.hpp"
#include "test_util.hpp"

using namespace citytwin;

TEST_SUITE("image_io") {

TEST_CASE("PNG round trip") {
  std::mt19937_64 rng(301);
  for (auto fmt : {PixelFormat::rgb8, PixelFormat::rgba8}) {
    const int ch = fmt == PixelFormat::rgb8 ? 3 : 4;
    std::vector<std::uint8_t> px(37 * 23 * ch);
    for (auto& b : px) b = static_cast<std::uint8_t>(rng());
    const auto png = encode_png(px, 37, 23, fmt);
    REQUIRE(png.size() > 8);
    CHECK(png[1] == 'P');
    const auto back = decode_png(png);
    CHECK(back.width == 37);
    CHECK(back.height == 23);
    CHECK(back.format == fmt);
    CHECK(back.pixels == px);
    CHECK(encode_png(px, 37, 23, fmt) == png);
  }
}

TEST_CASE("PNG rejects garbage") {
  const std::vector<std::uint8_t> junk = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  CHECK_ERRC(decode_png(junk), Errc::validation);
}

TEST_CASE("GIF keeps frame count and delays") {
  std::vector<GifFrame> frames;
  for (int k = 0; k < 4; ++k) {
    GifFrame f;
    f.rgba.assign(16 * 8 * 4, 0);
    for (std::size_t i = 0; i < f.rgba.size(); i += 4) {
      f.rgba[i] = static_cast<std::uint8_t>(60 * k);
      f.rgba[i + 3] = (i / 4) % 2 ? 255 : 0;
    }
    f.delay_cs = 25 + 5 * k;
    frames.push_back(std::move(f));
  }
  const auto gif = encode_gif(frames, 16, 8);
  CHECK(std::string(gif.begin(), gif.begin() + 6) == "GIF89a");
  CHECK(gif.back() == 0x3B);
  const GifInfo info = inspect_gif(gif);
  CHECK(info.width == 16);
  CHECK(info.height == 8);
  CHECK(info.delays_cs == std::vector<int>{25, 30, 35, 40});
  CHECK(encode_gif(frames, 16, 8) == gif);
}

}  // TEST_SUITE
