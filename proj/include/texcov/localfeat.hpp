#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "texcov/imageio.hpp"

namespace texcov::localfeat {

/// Per-pixel feature vectors, row-major over pixels, channel-fastest.
class FeatureField {
 public:
  FeatureField(std::size_t width, std::size_t height, std::size_t dim);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t pixel_count() const noexcept { return width_ * height_; }

  std::span<double> at(std::size_t row, std::size_t col) {
    return {values_.data() + (row * width_ + col) * dim_, dim_};
  }
  std::span<const double> at(std::size_t row, std::size_t col) const {
    return {values_.data() + (row * width_ + col) * dim_, dim_};
  }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

 private:
  std::size_t width_;
  std::size_t height_;
  std::size_t dim_;
  std::vector<double> values_;
};

inline constexpr std::size_t kGradientDim = 7;

/// [I, |Ix|, |Iy|, |Ixx|, |Iyy|, sqrt(Ix^2 + Iy^2), atan(|Ix| / |Iy|)] per
/// pixel. x runs along columns, y along rows. Central differences
/// [-1/2, 0, 1/2] and [1, -2, 1] with edge replication. The orientation is
/// pi/2 when only |Iy| vanishes and 0 when both do.
FeatureField gradient_features(const imageio::GrayImage& img);

struct GaborParams {
  double gamma = 1.0;
  double theta = 0.0;
  double sigma = 5.0;
  double lambda = 5.0;
  int kernel_radius = 15;

  void validate() const;
};

/// Orientations {-pi/4, 0, pi/4, pi/2} x scales {5, 10, 20}, gamma = 1,
/// wavelength equal to sigma and radius ceil(3 sigma). Orientation varies
/// fastest.
std::vector<GaborParams> default_gabor_bank();

/// Real part of the Gabor kernel on the (2r+1)^2 grid, mean-subtracted.
/// Indexed [(y + r) * (2r + 1) + (x + r)].
std::vector<double> gabor_real_kernel(const GaborParams& p);

/// |Re(I * g_k)| per pixel and filter; same-size output with edge
/// replication. gamma == 1 filters use an exact separable decomposition,
/// others fall back to direct 2D convolution.
FeatureField gabor_features(const imageio::GrayImage& img, std::span<const GaborParams> bank);

/// Same-size 2D convolution of `img` with a square (2r+1)^2 kernel, edge
/// replication. Used as the fallback route and as a test oracle.
std::vector<double> convolve_direct(const imageio::GrayImage& img, std::span<const double> kernel, int radius);

/// Binary dump: width, height, dim as u32 LE then row-major channel-fastest
/// f64 LE values.
void write_feature_field(const FeatureField& field, const std::filesystem::path& path);
FeatureField read_feature_field(const std::filesystem::path& path);

}  // namespace texcov::localfeat
