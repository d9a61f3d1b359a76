#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "sdsr/matrix.hpp"

namespace sdsr {

struct ImageShape {
  std::size_t width = 0;
  std::size_t height = 0;

  std::size_t pixels() const noexcept { return width * height; }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

/// Grayscale raster with intensities in [0, 1], row-major.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(std::size_t width, std::size_t height, double fill = 0.0);
  /// Rejects a pixel count that does not match, and values outside [0, 1].
  GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  ImageShape shape() const noexcept { return {width_, height_}; }
  const std::vector<double>& pixels() const noexcept { return pixels_; }

  double at(std::size_t x, std::size_t y) const noexcept { return pixels_[y * width_ + x]; }
  /// Stores `v` clamped to [0, 1].
  void set(std::size_t x, std::size_t y, double v) noexcept;

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> pixels_;
};

enum class Prefilter { None, Box };

/// Reads an 8-bit binary PGM (P5, maxval 255) or an 8-bit PNG. PNG colour
/// is reduced to luminance with Rec.601 weights. Values are scaled by 1/255.
GrayImage load_image(const std::filesystem::path& path);

/// Dimensions from the file header only.
ImageShape probe_image_shape(const std::filesystem::path& path);

/// Writes binary PGM, quantising with round-half-up.
void save_image(const GrayImage& img, const std::filesystem::path& path);

/// Keys cubic kernel (a = −0.5) with half-pixel centre alignment and edge
/// clamping; the result is clamped to [0, 1]. With Prefilter::Box a box blur
/// of width round(scale) is applied along each downscaled axis first.
GrayImage bicubic_resize(const GrayImage& img, std::size_t out_w, std::size_t out_h,
                         Prefilter prefilter = Prefilter::None);

/// Same resampling without the final clamp. Linear in the pixel values.
std::vector<double> bicubic_resample(std::span<const double> pixels, ImageShape in,
                                     ImageShape out, Prefilter prefilter = Prefilter::None);

/// Nearest-neighbour (pixel replication) resampling, half-pixel aligned.
GrayImage nearest_resize(const GrayImage& img, std::size_t out_w, std::size_t out_h);

/// Keys cubic convolution weight for offset `t` with a = −0.5.
double keys_cubic(double t) noexcept;

/// Row-major flattening into a column vector.
Matrix vectorize(const GrayImage& img);
/// Inverse of vectorize; values are clamped into [0, 1].
GrayImage devectorize(const Matrix& v, std::size_t width, std::size_t height);

}  // namespace sdsr
