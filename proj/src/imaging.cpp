#include "sdsr/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "sdsr/error.hpp"

namespace sdsr {

namespace {

constexpr double kKeysA = -0.5;
constexpr std::array<unsigned char, 8> kPngSignature = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

bool is_png(const std::vector<unsigned char>& bytes) {
  return bytes.size() >= kPngSignature.size() &&
         std::equal(kPngSignature.begin(), kPngSignature.end(), bytes.begin());
}

struct PgmHeader {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t data_offset = 0;
};

PgmHeader parse_pgm_header(const std::vector<unsigned char>& bytes, const std::string& where) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw FormatError(where + ": unrecognised magic (expected P5 PGM or PNG)");
  std::size_t pos = 2;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* field) -> std::size_t {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
      throw FormatError(where + ": malformed PGM header field '" + field + "'");
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > (1u << 30)) throw FormatError(where + ": PGM header field '" + field + "' too large");
      ++pos;
    }
    return v;
  };
  PgmHeader h;
  h.width = read_uint("width");
  h.height = read_uint("height");
  const std::size_t maxval = read_uint("maxval");
  if (h.width == 0 || h.height == 0) throw FormatError(where + ": PGM width/height must be > 0");
  if (maxval != 255)
    throw FormatError(where + ": unsupported bit depth (maxval = " + std::to_string(maxval) +
                      ", expected 255)");
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw FormatError(where + ": missing whitespace after PGM maxval");
  h.data_offset = pos + 1;
  return h;
}

GrayImage decode_png(const std::vector<unsigned char>& bytes, const std::string& where) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw FormatError(where + ": invalid PNG (" + image.message + ")");

  // 16-bit files report a linear (two bytes per channel) natural format.
  if ((image.format & PNG_FORMAT_FLAG_LINEAR) != 0) {
    png_image_free(&image);
    throw FormatError(where + ": unsupported bit depth (16-bit PNG, expected 8)");
  }

  const bool colour = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = colour ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t channels = colour ? 3 : 1;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw FormatError(where + ": PNG decode failed (" + msg + ")");
  }
  const std::size_t w = image.width;
  const std::size_t h = image.height;
  std::vector<double> px(w * h);
  for (std::size_t i = 0; i < w * h; ++i) {
    if (colour) {
      const double y = 0.299 * buf[3 * i] + 0.587 * buf[3 * i + 1] + 0.114 * buf[3 * i + 2];
      px[i] = std::clamp(y / 255.0, 0.0, 1.0);
    } else {
      px[i] = buf[i * channels] / 255.0;
    }
  }
  return GrayImage(w, h, std::move(px));
}

// Resampling taps for one axis.
struct AxisTaps {
  std::vector<std::array<std::size_t, 4>> index;
  std::vector<std::array<double, 4>> weight;
};

AxisTaps bicubic_taps(std::size_t in, std::size_t out) {
  AxisTaps taps;
  taps.index.resize(out);
  taps.weight.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  const auto last = static_cast<std::ptrdiff_t>(in) - 1;
  for (std::size_t i = 0; i < out; ++i) {
    const double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    const double base = std::floor(src);
    const double t = src - base;
    for (int k = 0; k < 4; ++k) {
      const auto idx = static_cast<std::ptrdiff_t>(base) + k - 1;
      taps.index[i][k] = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, last));
      taps.weight[i][k] = keys_cubic(t - (k - 1));
    }
  }
  return taps;
}

// Box blur of total width `w` along one axis of a row-major raster; even
// widths get half-weight end taps so the filter stays centred.
std::vector<double> box_blur(const std::vector<double>& src, ImageShape shape, bool horizontal,
                             std::size_t w) {
  if (w <= 1) return src;
  std::vector<std::pair<std::ptrdiff_t, double>> kernel;
  const auto half = static_cast<std::ptrdiff_t>(w / 2);
  if (w % 2 == 1) {
    for (std::ptrdiff_t k = -half; k <= half; ++k) kernel.emplace_back(k, 1.0);
  } else {
    for (std::ptrdiff_t k = -half; k <= half; ++k)
      kernel.emplace_back(k, (k == -half || k == half) ? 0.5 : 1.0);
  }
  const double norm = static_cast<double>(w);
  std::vector<double> dst(src.size());
  const auto width = static_cast<std::ptrdiff_t>(shape.width);
  const auto height = static_cast<std::ptrdiff_t>(shape.height);
  for (std::ptrdiff_t y = 0; y < height; ++y)
    for (std::ptrdiff_t x = 0; x < width; ++x) {
      double s = 0.0;
      for (const auto& [off, kw] : kernel) {
        const std::ptrdiff_t xx = horizontal ? std::clamp(x + off, std::ptrdiff_t{0}, width - 1) : x;
        const std::ptrdiff_t yy = horizontal ? y : std::clamp(y + off, std::ptrdiff_t{0}, height - 1);
        s += kw * src[static_cast<std::size_t>(yy * width + xx)];
      }
      dst[static_cast<std::size_t>(y * width + x)] = s / norm;
    }
  return dst;
}

}  // namespace

GrayImage::GrayImage(std::size_t width, std::size_t height, double fill)
    : width_(width), height_(height), pixels_(width * height, std::clamp(fill, 0.0, 1.0)) {}

GrayImage::GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (pixels_.size() != width_ * height_)
    throw InvalidInput("GrayImage: pixel count does not equal width x height");
  for (double v : pixels_)
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("GrayImage: pixel value outside [0, 1]");
}

void GrayImage::set(std::size_t x, std::size_t y, double v) noexcept {
  pixels_[y * width_ + x] = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
}

GrayImage load_image(const std::filesystem::path& path) {
  const std::string where = path.string();
  const std::vector<unsigned char> bytes = read_file(path);
  if (is_png(bytes)) return decode_png(bytes, where);
  const PgmHeader h = parse_pgm_header(bytes, where);
  const std::size_t n = h.width * h.height;
  if (bytes.size() < h.data_offset + n) {
    std::ostringstream msg;
    msg << where << ": truncated PGM pixel data (" << (bytes.size() - h.data_offset) << " of " << n
        << " bytes)";
    throw FormatError(msg.str());
  }
  std::vector<double> px(n);
  for (std::size_t i = 0; i < n; ++i) px[i] = bytes[h.data_offset + i] / 255.0;
  return GrayImage(h.width, h.height, std::move(px));
}

ImageShape probe_image_shape(const std::filesystem::path& path) {
  const std::string where = path.string();
  const std::vector<unsigned char> bytes = read_file(path);
  if (is_png(bytes)) {
    if (bytes.size() < 24) throw FormatError(where + ": truncated PNG header");
    auto be32 = [&](std::size_t off) {
      return (std::size_t{bytes[off]} << 24) | (std::size_t{bytes[off + 1]} << 16) |
             (std::size_t{bytes[off + 2]} << 8) | std::size_t{bytes[off + 3]};
    };
    return {be32(16), be32(20)};
  }
  const PgmHeader h = parse_pgm_header(bytes, where);
  return {h.width, h.height};
}

void save_image(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<char> bytes(img.pixels().size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double q = std::floor(std::clamp(img.pixels()[i], 0.0, 1.0) * 255.0 + 0.5);
    bytes[i] = static_cast<char>(static_cast<unsigned char>(q));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

double keys_cubic(double t) noexcept {
  const double x = std::abs(t);
  if (x <= 1.0) return ((kKeysA + 2.0) * x - (kKeysA + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((kKeysA * x - 5.0 * kKeysA) * x + 8.0 * kKeysA) * x - 4.0 * kKeysA;
  return 0.0;
}

std::vector<double> bicubic_resample(std::span<const double> pixels, ImageShape in,
                                     ImageShape out, Prefilter prefilter) {
  if (pixels.size() != in.pixels() || in.pixels() == 0)
    throw InvalidInput("bicubic_resample: pixel count does not match the input shape");
  if (out.width == 0 || out.height == 0)
    throw InvalidInput("bicubic_resample: output dimensions must be >= 1");

  std::vector<double> src(pixels.begin(), pixels.end());
  if (prefilter == Prefilter::Box) {
    const double sx = static_cast<double>(in.width) / static_cast<double>(out.width);
    const double sy = static_cast<double>(in.height) / static_cast<double>(out.height);
    if (sx > 1.0) src = box_blur(src, in, true, static_cast<std::size_t>(std::lround(sx)));
    if (sy > 1.0) src = box_blur(src, in, false, static_cast<std::size_t>(std::lround(sy)));
  }

  const AxisTaps tx = bicubic_taps(in.width, out.width);
  const AxisTaps ty = bicubic_taps(in.height, out.height);

  // Horizontal pass: in.height x out.width.
  std::vector<double> tmp(in.height * out.width);
  for (std::size_t y = 0; y < in.height; ++y)
    for (std::size_t x = 0; x < out.width; ++x) {
      // Offsets from the centre tap, so flat regions come out exact.
      const double c = src[y * in.width + tx.index[x][1]];
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += tx.weight[x][k] * (src[y * in.width + tx.index[x][k]] - c);
      tmp[y * out.width + x] = c + s;
    }
  std::vector<double> dst(out.pixels());
  for (std::size_t y = 0; y < out.height; ++y)
    for (std::size_t x = 0; x < out.width; ++x) {
      const double c = tmp[ty.index[y][1] * out.width + x];
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += ty.weight[y][k] * (tmp[ty.index[y][k] * out.width + x] - c);
      dst[y * out.width + x] = c + s;
    }
  return dst;
}

GrayImage bicubic_resize(const GrayImage& img, std::size_t out_w, std::size_t out_h,
                         Prefilter prefilter) {
  std::vector<double> px = bicubic_resample(img.pixels(), img.shape(), {out_w, out_h}, prefilter);
  for (double& v : px) v = std::clamp(v, 0.0, 1.0);
  return GrayImage(out_w, out_h, std::move(px));
}

GrayImage nearest_resize(const GrayImage& img, std::size_t out_w, std::size_t out_h) {
  if (out_w == 0 || out_h == 0) throw InvalidInput("nearest_resize: output dimensions must be >= 1");
  GrayImage out(out_w, out_h);
  const double sx = static_cast<double>(img.width()) / static_cast<double>(out_w);
  const double sy = static_cast<double>(img.height()) / static_cast<double>(out_h);
  for (std::size_t y = 0; y < out_h; ++y) {
    const auto yy = std::min(img.height() - 1, static_cast<std::size_t>((y + 0.5) * sy));
    for (std::size_t x = 0; x < out_w; ++x) {
      const auto xx = std::min(img.width() - 1, static_cast<std::size_t>((x + 0.5) * sx));
      out.set(x, y, img.at(xx, yy));
    }
  }
  return out;
}

Matrix vectorize(const GrayImage& img) { return Matrix::column(img.pixels()); }

GrayImage devectorize(const Matrix& v, std::size_t width, std::size_t height) {
  if (v.cols() != 1 || v.rows() != width * height) {
    std::ostringstream msg;
    msg << "devectorize: vector of length " << v.rows() << "x" << v.cols() << " cannot form a "
        << width << "x" << height << " image";
    throw InvalidInput(msg.str());
  }
  require_finite(v, "devectorize");
  std::vector<double> px(v.data().begin(), v.data().end());
  for (double& p : px) p = std::clamp(p, 0.0, 1.0);
  return GrayImage(width, height, std::move(px));
}

}  // namespace sdsr
