#include "texcov/localfeat.hpp"

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>

#include "texcov/error.hpp"

namespace texcov::localfeat {

using imageio::GrayImage;

FeatureField::FeatureField(std::size_t width, std::size_t height, std::size_t dim)
    : width_(width), height_(height), dim_(dim), values_(width * height * dim, 0.0) {
  if (dim == 0) throw ArgumentError("FeatureField: dim must be >= 1");
}

FeatureField gradient_features(const GrayImage& img) {
  if (img.width() < 3 || img.height() < 3)
    throw ArgumentError("gradient_features: image must be at least 3x3");
  FeatureField field(img.width(), img.height(), kGradientDim);
  for (std::size_t r = 0; r < img.height(); ++r) {
    const long y = static_cast<long>(r);
    for (std::size_t c = 0; c < img.width(); ++c) {
      const long x = static_cast<long>(c);
      const double center = img.at(r, c);
      const double left = img.clamped(y, x - 1);
      const double right = img.clamped(y, x + 1);
      const double up = img.clamped(y - 1, x);
      const double down = img.clamped(y + 1, x);
      const double ix = std::abs(0.5 * (right - left));
      const double iy = std::abs(0.5 * (down - up));
      const double ixx = std::abs(left - 2.0 * center + right);
      const double iyy = std::abs(up - 2.0 * center + down);
      auto f = field.at(r, c);
      f[0] = center;
      f[1] = ix;
      f[2] = iy;
      f[3] = ixx;
      f[4] = iyy;
      f[5] = std::hypot(ix, iy);
      // atan2 of non-negative arguments gives atan(ix/iy) with pi/2 at iy == 0
      // and 0 at the origin.
      f[6] = std::atan2(ix, iy);
    }
  }
  return field;
}

void GaborParams::validate() const {
  if (!(sigma > 0.0) || !(lambda > 0.0) || !(gamma > 0.0) || kernel_radius < 1)
    throw ArgumentError("GaborParams: sigma, lambda, gamma must be > 0 and kernel_radius >= 1");
}

std::vector<GaborParams> default_gabor_bank() {
  constexpr double pi = std::numbers::pi;
  const double thetas[] = {-pi / 4.0, 0.0, pi / 4.0, pi / 2.0};
  const double sigmas[] = {5.0, 10.0, 20.0};
  std::vector<GaborParams> bank;
  for (double sigma : sigmas)
    for (double theta : thetas)
      bank.push_back({.gamma = 1.0,
                      .theta = theta,
                      .sigma = sigma,
                      .lambda = sigma,
                      .kernel_radius = static_cast<int>(std::ceil(3.0 * sigma))});
  return bank;
}

namespace {

std::complex<double> gabor_complex(const GaborParams& p, double x, double y) {
  const double ct = std::cos(p.theta);
  const double st = std::sin(p.theta);
  const double xr = x * ct + y * st;
  const double yr = -x * st + y * ct;
  const double env = std::exp(-(xr * xr + p.gamma * p.gamma * yr * yr) / (2.0 * p.sigma * p.sigma));
  const double phase = 2.0 * std::numbers::pi * xr / p.lambda;
  return {env * std::cos(phase), env * std::sin(phase)};
}

// Same-size 1D convolution along rows (horizontal) or columns, edge replication.
std::vector<double> convolve_rows(std::span<const double> src, std::size_t w, std::size_t h,
                                  std::span<const double> taps, int r) {
  std::vector<double> out(w * h);
  const long wl = static_cast<long>(w);
  for (std::size_t row = 0; row < h; ++row) {
    const double* line = src.data() + row * w;
    for (long x = 0; x < wl; ++x) {
      double acc = 0.0;
      for (int u = -r; u <= r; ++u) {
        const long xs = std::clamp(x - u, 0L, wl - 1);
        acc += taps[static_cast<std::size_t>(u + r)] * line[xs];
      }
      out[row * w + static_cast<std::size_t>(x)] = acc;
    }
  }
  return out;
}

std::vector<double> convolve_cols(std::span<const double> src, std::size_t w, std::size_t h,
                                  std::span<const double> taps, int r) {
  std::vector<double> out(w * h, 0.0);
  const long hl = static_cast<long>(h);
  for (long y = 0; y < hl; ++y) {
    double* dst = out.data() + static_cast<std::size_t>(y) * w;
    for (int v = -r; v <= r; ++v) {
      const long ys = std::clamp(y - v, 0L, hl - 1);
      const double t = taps[static_cast<std::size_t>(v + r)];
      const double* line = src.data() + static_cast<std::size_t>(ys) * w;
      for (std::size_t x = 0; x < w; ++x) dst[x] += t * line[x];
    }
  }
  return out;
}

// For gamma == 1 the complex kernel factors as a(x) b(y) with
// a(x) = exp(-x^2/2s^2) exp(i k cos(t) x), b(y) = exp(-y^2/2s^2) exp(i k sin(t) y),
// so Re(a b) = ar br - ai bi, and the mean term is m * ones(x) ones(y).
std::vector<double> gabor_separable(const GrayImage& img, const GaborParams& p) {
  const int r = p.kernel_radius;
  const std::size_t n = static_cast<std::size_t>(2 * r + 1);
  std::vector<double> ar(n), ai(n), br(n), bi(n), ones(n, 1.0);
  const double k = 2.0 * std::numbers::pi / p.lambda;
  for (int t = -r; t <= r; ++t) {
    const double g = std::exp(-static_cast<double>(t * t) / (2.0 * p.sigma * p.sigma));
    const auto idx = static_cast<std::size_t>(t + r);
    ar[idx] = g * std::cos(k * std::cos(p.theta) * t);
    ai[idx] = g * std::sin(k * std::cos(p.theta) * t);
    br[idx] = g * std::cos(k * std::sin(p.theta) * t);
    bi[idx] = g * std::sin(k * std::sin(p.theta) * t);
  }
  // Kernel mean, computed the same way gabor_real_kernel does.
  double mean = 0.0;
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) mean += ar[x] * br[y] - ai[x] * bi[y];
  mean /= static_cast<double>(n * n);

  const std::size_t w = img.width(), h = img.height();
  const auto px = img.pixels();
  auto rr = convolve_cols(convolve_rows(px, w, h, ar, r), w, h, br, r);
  const auto ii = convolve_cols(convolve_rows(px, w, h, ai, r), w, h, bi, r);
  const auto box = convolve_cols(convolve_rows(px, w, h, ones, r), w, h, ones, r);
  for (std::size_t k2 = 0; k2 < rr.size(); ++k2) rr[k2] = rr[k2] - ii[k2] - mean * box[k2];
  return rr;
}

}  // namespace

std::vector<double> gabor_real_kernel(const GaborParams& p) {
  p.validate();
  const int r = p.kernel_radius;
  const std::size_t n = static_cast<std::size_t>(2 * r + 1);
  std::vector<double> k(n * n);
  double mean = 0.0;
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x) {
      const double v = gabor_complex(p, x, y).real();
      k[static_cast<std::size_t>(y + r) * n + static_cast<std::size_t>(x + r)] = v;
      mean += v;
    }
  mean /= static_cast<double>(n * n);
  for (double& v : k) v -= mean;
  return k;
}

std::vector<double> convolve_direct(const GrayImage& img, std::span<const double> kernel, int radius) {
  const std::size_t n = static_cast<std::size_t>(2 * radius + 1);
  if (kernel.size() != n * n) throw ArgumentError("convolve_direct: kernel size mismatch");
  const long w = static_cast<long>(img.width()), h = static_cast<long>(img.height());
  std::vector<double> out(img.size());
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int v = -radius; v <= radius; ++v)
        for (int u = -radius; u <= radius; ++u)
          acc += kernel[static_cast<std::size_t>(v + radius) * n + static_cast<std::size_t>(u + radius)] *
                 img.clamped(y - v, x - u);
      out[static_cast<std::size_t>(y * w + x)] = acc;
    }
  return out;
}

FeatureField gabor_features(const GrayImage& img, std::span<const GaborParams> bank) {
  if (bank.empty()) throw ArgumentError("gabor_features: empty filter bank");
  for (const auto& p : bank) p.validate();
  FeatureField field(img.width(), img.height(), bank.size());
  auto values = field.values();
  for (std::size_t k = 0; k < bank.size(); ++k) {
    const auto& p = bank[k];
    const auto response = p.gamma == 1.0 ? gabor_separable(img, p)
                                         : convolve_direct(img, gabor_real_kernel(p), p.kernel_radius);
    for (std::size_t i = 0; i < response.size(); ++i) values[i * bank.size() + k] = std::abs(response[i]);
  }
  return field;
}

namespace {

static_assert(std::endian::native == std::endian::little, "feature dumps assume a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

}  // namespace

void write_feature_field(const FeatureField& field, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  put_u32(out, static_cast<std::uint32_t>(field.width()));
  put_u32(out, static_cast<std::uint32_t>(field.height()));
  put_u32(out, static_cast<std::uint32_t>(field.dim()));
  const auto v = field.values();
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!out) throw IoError("failed writing " + path.string());
}

FeatureField read_feature_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const auto w = get_u32(in), h = get_u32(in), d = get_u32(in);
  if (!in) throw FormatError("truncated feature header in " + path.string());
  FeatureField field(w, h, d);
  auto v = field.values();
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != v.size() * sizeof(double))
    throw FormatError("truncated feature data in " + path.string());
  return field;
}

}  // namespace texcov::localfeat
