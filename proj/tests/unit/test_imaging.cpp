#include <doctest.h>

#include <png.h>

#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include "oracles.hpp"
#include "sdsr/error.hpp"
#include "sdsr/imaging.hpp"

using sdsr::GrayImage;

namespace {

GrayImage random_image(std::mt19937_64& rng, std::size_t w, std::size_t h, double lo = 0.0,
                       double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> px(w * h);
  for (double& v : px) v = u(rng);
  return GrayImage(w, h, std::move(px));
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

std::string error_of(const std::filesystem::path& p) {
  try {
    sdsr::load_image(p);
  } catch (const sdsr::FormatError& e) {
    return e.what();
  }
  return {};
}

void write_png(const std::filesystem::path& p, std::uint32_t w, std::uint32_t h,
               std::uint32_t format, const std::vector<unsigned char>& data) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = w;
  img.height = h;
  img.format = format;
  REQUIRE(png_image_write_to_file(&img, p.string().c_str(), 0, data.data(), 0, nullptr) != 0);
}

}  // namespace

TEST_CASE("PGM decoding scales by 1/255") {
  oracle::TempDir dir("img");
  write_bytes(dir / "a.pgm", std::string("P5\n2 2\n255\n") + std::string("\x00\x80\xff\x40", 4));
  const GrayImage img = sdsr::load_image(dir / "a.pgm");
  REQUIRE(img.width() == 2);
  CHECK(img.at(0, 0) == 0.0);
  CHECK(img.at(1, 0) == 128.0 / 255.0);
  CHECK(img.at(0, 1) == 1.0);
  CHECK(img.at(1, 1) == 64.0 / 255.0);

  write_bytes(dir / "black.pgm", "P5 3 2 255\n" + std::string(6, '\0'));
  const GrayImage black = sdsr::load_image(dir / "black.pgm");
  for (double v : black.pixels()) CHECK(v == 0.0);

  write_bytes(dir / "comment.pgm", "P5\n# made by hand\n1 1\n255\n\x7f");
  CHECK(sdsr::load_image(dir / "comment.pgm").at(0, 0) == 127.0 / 255.0);
}

TEST_CASE("PGM save/load round trip") {
  oracle::TempDir dir("img");
  std::mt19937_64 rng(1);
  const GrayImage img = random_image(rng, 7, 5);
  sdsr::save_image(img, dir / "r.pgm");
  const GrayImage back = sdsr::load_image(dir / "r.pgm");
  for (std::size_t i = 0; i < img.pixels().size(); ++i)
    CHECK(std::abs(back.pixels()[i] - img.pixels()[i]) <= 0.5 / 255 + 1e-15);
  sdsr::save_image(back, dir / "r2.pgm");
  CHECK(sdsr::load_image(dir / "r2.pgm") == back);
  CHECK(sdsr::probe_image_shape(dir / "r.pgm") == sdsr::ImageShape{7, 5});
}

TEST_CASE("malformed images name the offending field") {
  oracle::TempDir dir("img");
  write_bytes(dir / "magic.pgm", "P2\n2 2\n255\n0 0 0 0");
  CHECK(error_of(dir / "magic.pgm").find("magic") != std::string::npos);
  write_bytes(dir / "w.pgm", "P5\nx 2\n255\n");
  CHECK(error_of(dir / "w.pgm").find("width") != std::string::npos);
  write_bytes(dir / "depth.pgm", "P5\n1 1\n65535\n\0\0");
  CHECK(error_of(dir / "depth.pgm").find("bit depth") != std::string::npos);
  write_bytes(dir / "short.pgm", "P5\n4 4\n255\n\1\2");
  CHECK(!error_of(dir / "short.pgm").empty());
  CHECK_THROWS_AS(sdsr::load_image(dir / "missing.pgm"), sdsr::IoError);
}

TEST_CASE("PNG ingestion: gray, colour luminance, 16-bit rejection") {
  oracle::TempDir dir("img");
  write_png(dir / "g.png", 2, 1, PNG_FORMAT_GRAY, {10, 200});
  const GrayImage g = sdsr::load_image(dir / "g.png");
  CHECK(g.at(0, 0) == 10.0 / 255);
  CHECK(g.at(1, 0) == 200.0 / 255);

  write_png(dir / "c.png", 1, 1, PNG_FORMAT_RGB, {200, 100, 50});
  const double lum = (0.299 * 200 + 0.587 * 100 + 0.114 * 50) / 255;
  CHECK(std::abs(sdsr::load_image(dir / "c.png").at(0, 0) - lum) <= 0.5 / 255 + 1e-12);
  CHECK(sdsr::probe_image_shape(dir / "c.png") == sdsr::ImageShape{1, 1});

  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = 1;
  img.height = 1;
  img.format = PNG_FORMAT_LINEAR_Y;
  const std::uint16_t px = 1000;
  REQUIRE(png_image_write_to_file(&img, (dir / "d.png").string().c_str(), 0, &px, 0, nullptr) != 0);
  CHECK(error_of(dir / "d.png").find("bit depth") != std::string::npos);
}

TEST_CASE("GrayImage enforces its invariants") {
  CHECK_THROWS_AS(GrayImage(2, 2, std::vector<double>{0, 0, 0}), sdsr::InvalidInput);
  CHECK_THROWS_AS(GrayImage(1, 1, std::vector<double>{1.5}), sdsr::InvalidInput);
  GrayImage img(2, 1);
  img.set(0, 0, 1.3);
  img.set(1, 0, -2);
  CHECK(img.at(0, 0) == 1.0);
  CHECK(img.at(1, 0) == 0.0);
}

TEST_CASE("bicubic: constants, identity, oracle agreement") {
  const GrayImage c(5, 7, 0.37);
  for (auto [w, h] : {std::pair{3, 2}, {10, 14}, {1, 1}, {5, 7}}) {
    const GrayImage r = sdsr::bicubic_resize(c, w, h);
    for (double v : r.pixels()) CHECK(v == doctest::Approx(0.37).epsilon(1e-15));
  }

  std::mt19937_64 rng(2);
  const GrayImage r = random_image(rng, 6, 4);
  CHECK(oracle::max_abs_diff(sdsr::vectorize(sdsr::bicubic_resize(r, 6, 4)), sdsr::vectorize(r)) < 1e-12);

  std::vector<double> ramp(16);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) ramp[y * 4 + x] = (x + 4 * y) / 15.0;
  const auto up = sdsr::bicubic_resample(ramp, {4, 4}, {8, 8});
  const auto expect = oracle::direct_bicubic(ramp, 4, 4, 8, 8);
  for (std::size_t i = 0; i < up.size(); ++i) CHECK(std::abs(up[i] - expect[i]) < 1e-10);
}

TEST_CASE("bicubic agrees with direct convolution on random images") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> dim(1, 12);
  for (int t = 0; t < 50; ++t) {
    const std::size_t w = dim(rng), h = dim(rng), ow = dim(rng), oh = dim(rng);
    const GrayImage img = random_image(rng, w, h);
    const auto got = sdsr::bicubic_resample(img.pixels(), {w, h}, {ow, oh});
    const auto want = oracle::direct_bicubic(img.pixels(), w, h, ow, oh);
    double worst = 0;
    for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
    CHECK(worst < 1e-10);
    const GrayImage clamped = sdsr::bicubic_resize(img, ow, oh);
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(clamped.pixels()[i] == std::clamp(got[i], 0.0, 1.0));
  }
}

TEST_CASE("bicubic is linear before clamping") {
  std::mt19937_64 rng(4);
  const GrayImage a = random_image(rng, 9, 6, 0.3, 0.7), b = random_image(rng, 9, 6, 0.3, 0.7);
  std::vector<double> mix(a.pixels().size());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 0.3 * a.pixels()[i] + 0.6 * b.pixels()[i];
  const auto rm = sdsr::bicubic_resample(mix, {9, 6}, {4, 13});
  const auto ra = sdsr::bicubic_resample(a.pixels(), {9, 6}, {4, 13});
  const auto rb = sdsr::bicubic_resample(b.pixels(), {9, 6}, {4, 13});
  for (std::size_t i = 0; i < rm.size(); ++i) CHECK(std::abs(rm[i] - (0.3 * ra[i] + 0.6 * rb[i])) < 1e-10);
}

TEST_CASE("down then up of a constant stays constant, with or without prefilter") {
  const GrayImage c(24, 24, 0.6);
  for (auto pf : {sdsr::Prefilter::None, sdsr::Prefilter::Box}) {
    const GrayImage back = sdsr::bicubic_resize(sdsr::bicubic_resize(c, 6, 6, pf), 24, 24);
    for (double v : back.pixels()) CHECK(v == doctest::Approx(0.6).epsilon(1e-14));
  }
}

TEST_CASE("vectorize / devectorize") {
  const GrayImage img(2, 2, std::vector<double>{0.1, 0.2, 0.3, 0.4});
  const auto v = sdsr::vectorize(img);
  CHECK(v == sdsr::Matrix{{0.1}, {0.2}, {0.3}, {0.4}});
  CHECK(sdsr::devectorize(v, 2, 2) == img);
  const auto clamped = sdsr::devectorize(sdsr::Matrix{{1.3}, {-0.2}}, 2, 1);
  CHECK(clamped.at(0, 0) == 1.0);
  CHECK(clamped.at(1, 0) == 0.0);
  CHECK_THROWS_AS(sdsr::devectorize(v, 3, 1), sdsr::InvalidInput);
}

TEST_CASE("nearest resize replicates pixels") {
  const GrayImage img(2, 1, std::vector<double>{0.25, 0.75});
  const GrayImage up = sdsr::nearest_resize(img, 4, 2);
  CHECK(up.pixels() == std::vector<double>{0.25, 0.25, 0.75, 0.75, 0.25, 0.25, 0.75, 0.75});
}
