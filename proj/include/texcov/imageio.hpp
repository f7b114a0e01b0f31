#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace texcov::imageio {

/// Row-major grayscale image. Loaders and resize() produce intensities in
/// [0,1]; the type itself only enforces finite values and a minimum size of
/// 2x2 so that signed test patterns can be expressed with it.
class GrayImage {
 public:
  GrayImage(std::size_t width, std::size_t height, double fill = 0.0);
  GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }

  double& at(std::size_t row, std::size_t col) { return pixels_[row * width_ + col]; }
  double at(std::size_t row, std::size_t col) const { return pixels_[row * width_ + col]; }

  /// Edge-replicated access; out-of-range coordinates clamp to the border.
  double clamped(long row, long col) const;

  std::span<const double> pixels() const noexcept { return pixels_; }
  std::span<double> pixels() noexcept { return pixels_; }

  /// True when every pixel lies in [0,1].
  bool normalized() const;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<double> pixels_;
};

/// Reads a binary PGM (P5), 8- or 16-bit. Intensities are divided by the
/// format maximum (255 or 65535), not by the per-file maxval.
GrayImage load_image(const std::filesystem::path& path);

/// Writes an 8-bit binary PGM; values are clamped to [0,1] and rounded.
void save_pgm(const GrayImage& img, const std::filesystem::path& path);

/// Bicubic resampling (a = -0.5) with edge replication. When shrinking, the
/// kernel is widened by the inverse scale factor to act as an antialiasing
/// prefilter. Output is clamped to [0,1].
GrayImage resize(const GrayImage& img, std::size_t out_w, std::size_t out_h);

/// Scales both sides by `factor`, rounding to the nearest pixel.
GrayImage rescale(const GrayImage& img, double factor);

}  // namespace texcov::imageio
