#include "texcov/imageio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "texcov/error.hpp"

namespace texcov::imageio {

GrayImage::GrayImage(std::size_t width, std::size_t height, double fill)
    : GrayImage(width, height, std::vector<double>(width * height, fill)) {}

GrayImage::GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 2 || height < 2) throw ArgumentError("GrayImage: width and height must be >= 2");
  if (pixels_.size() != width * height) throw ArgumentError("GrayImage: pixel count mismatch");
  for (double v : pixels_)
    if (!std::isfinite(v)) throw NumericError("GrayImage: non-finite pixel");
}

double GrayImage::clamped(long row, long col) const {
  row = std::clamp(row, 0L, static_cast<long>(height_) - 1);
  col = std::clamp(col, 0L, static_cast<long>(width_) - 1);
  return pixels_[static_cast<std::size_t>(row) * width_ + static_cast<std::size_t>(col)];
}

bool GrayImage::normalized() const {
  return std::all_of(pixels_.begin(), pixels_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

std::size_t parse_header_int(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = next_token(in);
  try {
    std::size_t pos = 0;
    const long v = std::stol(tok, &pos);
    if (pos != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw FormatError("malformed PGM header in " + path.string());
  }
}

}  // namespace

GrayImage load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  const std::string magic = next_token(in);
  if (magic != "P5") throw FormatError("unsupported image format in " + path.string() + " (expected binary PGM P5)");
  const std::size_t w = parse_header_int(in, path);
  const std::size_t h = parse_header_int(in, path);
  const std::size_t maxval = parse_header_int(in, path);
  if (maxval > 65535) throw FormatError("unsupported PGM maxval in " + path.string());
  // next_token consumed the single whitespace byte after maxval.
  const bool wide = maxval > 255;
  const double scale = wide ? 65535.0 : 255.0;
  const std::size_t bytes = w * h * (wide ? 2 : 1);
  std::vector<unsigned char> raw(bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes) throw IoError("truncated PGM data in " + path.string());
  std::vector<double> px(w * h);
  for (std::size_t k = 0; k < w * h; ++k) {
    const unsigned v = wide ? (static_cast<unsigned>(raw[2 * k]) << 8) | raw[2 * k + 1] : raw[k];
    px[k] = static_cast<double>(v) / scale;
  }
  return GrayImage(w, h, std::move(px));
}

void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> raw(img.size());
  const auto px = img.pixels();
  for (std::size_t k = 0; k < raw.size(); ++k)
    raw[k] = static_cast<unsigned char>(std::lround(std::clamp(px[k], 0.0, 1.0) * 255.0));
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

namespace {

double cubic(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

struct Taps {
  std::vector<long> index;
  std::vector<double> weight;
};

// Per output sample, source indices and normalized weights along one axis.
std::vector<Taps> axis_taps(std::size_t in_len, std::size_t out_len) {
  const double scale = static_cast<double>(out_len) / static_cast<double>(in_len);
  const double kscale = std::min(1.0, scale);
  const double support = 2.0 / kscale;
  std::vector<Taps> taps(out_len);
  for (std::size_t u = 0; u < out_len; ++u) {
    const double x = (static_cast<double>(u) + 0.5) / scale - 0.5;
    const long first = static_cast<long>(std::floor(x - support));
    const long last = static_cast<long>(std::ceil(x + support));
    Taps& t = taps[u];
    double sum = 0.0;
    for (long k = first; k <= last; ++k) {
      const double w = kscale * cubic(kscale * (x - static_cast<double>(k)));
      if (w == 0.0) continue;
      t.index.push_back(std::clamp(k, 0L, static_cast<long>(in_len) - 1));
      t.weight.push_back(w);
      sum += w;
    }
    for (double& w : t.weight) w /= sum;
  }
  return taps;
}

}  // namespace

GrayImage resize(const GrayImage& img, std::size_t out_w, std::size_t out_h) {
  if (out_w < 2 || out_h < 2) throw ArgumentError("resize: target size must be at least 2x2");
  if (out_w == img.width() && out_h == img.height()) {
    GrayImage copy = img;
    for (double& v : copy.pixels()) v = std::clamp(v, 0.0, 1.0);
    return copy;
  }
  const auto col_taps = axis_taps(img.width(), out_w);
  const auto row_taps = axis_taps(img.height(), out_h);

  // Horizontal pass: height x out_w.
  std::vector<double> tmp(img.height() * out_w);
  for (std::size_t r = 0; r < img.height(); ++r)
    for (std::size_t u = 0; u < out_w; ++u) {
      const Taps& t = col_taps[u];
      double acc = 0.0;
      for (std::size_t k = 0; k < t.index.size(); ++k)
        acc += t.weight[k] * img.at(r, static_cast<std::size_t>(t.index[k]));
      tmp[r * out_w + u] = acc;
    }

  std::vector<double> out(out_w * out_h);
  for (std::size_t v = 0; v < out_h; ++v) {
    const Taps& t = row_taps[v];
    for (std::size_t u = 0; u < out_w; ++u) {
      double acc = 0.0;
      for (std::size_t k = 0; k < t.index.size(); ++k)
        acc += t.weight[k] * tmp[static_cast<std::size_t>(t.index[k]) * out_w + u];
      out[v * out_w + u] = std::clamp(acc, 0.0, 1.0);
    }
  }
  return GrayImage(out_w, out_h, std::move(out));
}

GrayImage rescale(const GrayImage& img, double factor) {
  if (!(factor > 0.0)) throw ArgumentError("rescale: factor must be positive");
  const auto w = static_cast<std::size_t>(std::lround(static_cast<double>(img.width()) * factor));
  const auto h = static_cast<std::size_t>(std::lround(static_cast<double>(img.height()) * factor));
  return resize(img, w, h);
}

}  // namespace texcov::imageio
