#include "texcov/wavelets.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "texcov/error.hpp"

namespace texcov::wavelets {

namespace {

constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

int log2_exact(std::size_t n) {
  int j = 0;
  while ((std::size_t{1} << j) < n) ++j;
  return j;
}

}  // namespace

bool is_dyadic(std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; }

std::size_t WaveletPyramid::coefficient_count() const {
  std::size_t total = approx.size();
  for (const auto& bands : detail)
    for (const auto& b : bands) total += b.size();
  return total;
}

WaveletPyramid haar_dwt_1d(std::span<const double> x) {
  if (!is_dyadic(x.size())) throw ArgumentError("haar_dwt_1d: length must be a power of two >= 2");
  WaveletPyramid p;
  p.dims = 1;
  p.levels = log2_exact(x.size());
  std::vector<double> a(x.begin(), x.end());
  for (int s = 1; s <= p.levels; ++s) {
    const std::size_t half = a.size() / 2;
    std::vector<double> next(half), det(half);
    for (std::size_t t = 0; t < half; ++t) {
      next[t] = (a[2 * t] + a[2 * t + 1]) * kInvSqrt2;
      det[t] = (a[2 * t] - a[2 * t + 1]) * kInvSqrt2;
    }
    p.detail.push_back({std::move(det)});
    a = std::move(next);
  }
  p.approx = std::move(a);
  return p;
}

std::vector<double> haar_idwt_1d(const WaveletPyramid& p) {
  if (p.dims != 1) throw ArgumentError("haar_idwt_1d: not a 1D pyramid");
  std::vector<double> a = p.approx;
  for (int s = p.levels; s >= 1; --s) {
    const auto& det = p.detail[static_cast<std::size_t>(s - 1)][0];
    std::vector<double> up(2 * a.size());
    for (std::size_t t = 0; t < a.size(); ++t) {
      up[2 * t] = (a[t] + det[t]) * kInvSqrt2;
      up[2 * t + 1] = (a[t] - det[t]) * kInvSqrt2;
    }
    a = std::move(up);
  }
  return a;
}

WaveletPyramid haar_dwt_2d(const imageio::GrayImage& img) {
  if (img.width() != img.height() || !is_dyadic(img.width()))
    throw ArgumentError("haar_dwt_2d: image must be square with a power-of-two side");
  WaveletPyramid p;
  p.dims = 2;
  p.levels = log2_exact(img.width());
  std::size_t n = img.width();
  const auto px = img.pixels();
  std::vector<double> a(px.begin(), px.end());
  for (int s = 1; s <= p.levels; ++s) {
    const std::size_t m = n / 2;
    // Row pass: low half in columns [0, m), high half in [m, n).
    std::vector<double> rows(n * n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t t = 0; t < m; ++t) {
        const double x0 = a[r * n + 2 * t], x1 = a[r * n + 2 * t + 1];
        rows[r * n + t] = (x0 + x1) * kInvSqrt2;
        rows[r * n + m + t] = (x0 - x1) * kInvSqrt2;
      }
    std::vector<double> ll(m * m), lh(m * m), hl(m * m), hh(m * m);
    for (std::size_t t = 0; t < m; ++t)
      for (std::size_t c = 0; c < m; ++c) {
        const double l0 = rows[(2 * t) * n + c], l1 = rows[(2 * t + 1) * n + c];
        const double h0 = rows[(2 * t) * n + m + c], h1 = rows[(2 * t + 1) * n + m + c];
        ll[t * m + c] = (l0 + l1) * kInvSqrt2;
        lh[t * m + c] = (l0 - l1) * kInvSqrt2;  // horizontal edges
        hl[t * m + c] = (h0 + h1) * kInvSqrt2;  // vertical edges
        hh[t * m + c] = (h0 - h1) * kInvSqrt2;  // diagonal
      }
    p.detail.push_back({std::move(lh), std::move(hl), std::move(hh)});
    a = std::move(ll);
    n = m;
  }
  p.approx = std::move(a);
  return p;
}

imageio::GrayImage haar_idwt_2d(const WaveletPyramid& p) {
  if (p.dims != 2) throw ArgumentError("haar_idwt_2d: not a 2D pyramid");
  std::vector<double> a = p.approx;
  std::size_t m = 1;
  for (int s = p.levels; s >= 1; --s) {
    const auto& bands = p.detail[static_cast<std::size_t>(s - 1)];
    const auto &lh = bands[0], &hl = bands[1], &hh = bands[2];
    const std::size_t n = 2 * m;
    std::vector<double> rows(n * n);
    for (std::size_t t = 0; t < m; ++t)
      for (std::size_t c = 0; c < m; ++c) {
        const std::size_t k = t * m + c;
        rows[(2 * t) * n + c] = (a[k] + lh[k]) * kInvSqrt2;
        rows[(2 * t + 1) * n + c] = (a[k] - lh[k]) * kInvSqrt2;
        rows[(2 * t) * n + m + c] = (hl[k] + hh[k]) * kInvSqrt2;
        rows[(2 * t + 1) * n + m + c] = (hl[k] - hh[k]) * kInvSqrt2;
      }
    std::vector<double> out(n * n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t t = 0; t < m; ++t) {
        const double lo = rows[r * n + t], hi = rows[r * n + m + t];
        out[r * n + 2 * t] = (lo + hi) * kInvSqrt2;
        out[r * n + 2 * t + 1] = (lo - hi) * kInvSqrt2;
      }
    a = std::move(out);
    m = n;
  }
  return imageio::GrayImage(m, m, std::move(a));
}

MarginalVector::MarginalVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw ArgumentError("MarginalVector: empty");
  for (double v : values_)
    if (!std::isfinite(v)) throw NumericError("MarginalVector: non-finite entry");
}

MarginalVector marginals(const WaveletPyramid& p) {
  const std::size_t bands = static_cast<std::size_t>(p.levels) + 1;
  std::vector<double> mass(bands, 0.0);
  for (std::size_t s = 0; s < p.detail.size(); ++s)
    for (const auto& grid : p.detail[s])
      for (double c : grid) mass[s] += std::abs(c);
  for (double c : p.approx) mass.back() += std::abs(c);
  double total = 0.0;
  for (double m : mass) total += m;
  if (total == 0.0) return MarginalVector(std::vector<double>(bands, 1.0 / static_cast<double>(bands)));
  for (double& m : mass) m /= total;
  return MarginalVector(std::move(mass));
}

MarginalVector marginals_1d(std::span<const double> x) { return marginals(haar_dwt_1d(x)); }

MarginalVector marginals_2d(const imageio::GrayImage& img) { return marginals(haar_dwt_2d(img)); }

ZScoreStats zscore_fit(std::span<const MarginalVector> train) {
  if (train.empty()) throw ArgumentError("zscore_fit: empty training set");
  const std::size_t d = train.front().size();
  const double n = static_cast<double>(train.size());
  ZScoreStats st;
  st.mean.assign(d, 0.0);
  st.std.assign(d, 0.0);
  for (const auto& v : train) {
    if (v.size() != d) throw ArgumentError("zscore_fit: inconsistent vector lengths");
    for (std::size_t k = 0; k < d; ++k) st.mean[k] += v[k];
  }
  for (double& m : st.mean) m /= n;
  for (const auto& v : train)
    for (std::size_t k = 0; k < d; ++k) st.std[k] += (v[k] - st.mean[k]) * (v[k] - st.mean[k]);
  for (double& s : st.std) s = std::max(train.size() > 1 ? std::sqrt(s / (n - 1.0)) : 0.0, kStdFloor);
  return st;
}

std::vector<double> zscore_apply(const ZScoreStats& stats, const MarginalVector& v) {
  if (v.size() != stats.mean.size()) throw ArgumentError("zscore_apply: length mismatch");
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = (v[k] - stats.mean[k]) / stats.std[k];
  return out;
}

namespace {

void write_values(std::ostream& out, std::span<const double> values) {
  char buf[40];
  for (double v : values) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << ' ' << buf;
  }
}

}  // namespace

void write_marginal_line(std::ostream& out, const std::string& id, const MarginalVector& v) {
  out << id;
  write_values(out, v.values());
  out << '\n';
}

std::vector<MarginalRecord> read_marginal_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<MarginalRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id;
    ls >> id;
    std::vector<double> values;
    double v;
    while (ls >> v) values.push_back(v);
    if (!ls.eof() || values.empty()) throw FormatError("malformed marginal line in " + path.string() + ": " + line);
    out.push_back({id, MarginalVector(std::move(values))});
  }
  return out;
}

void write_zscore(const std::filesystem::path& path, const ZScoreStats& stats) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "zscore " << stats.mean.size() << "\nmean";
  write_values(out, stats.mean);
  out << "\nstd";
  write_values(out, stats.std);
  out << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

ZScoreStats read_zscore(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string tag;
  std::size_t d = 0;
  if (!(in >> tag >> d) || tag != "zscore") throw FormatError("malformed z-score file " + path.string());
  ZScoreStats st;
  st.mean.resize(d);
  st.std.resize(d);
  if (!(in >> tag) || tag != "mean") throw FormatError("malformed z-score file " + path.string());
  for (double& v : st.mean)
    if (!(in >> v)) throw FormatError("truncated z-score file " + path.string());
  if (!(in >> tag) || tag != "std") throw FormatError("malformed z-score file " + path.string());
  for (double& v : st.std)
    if (!(in >> v)) throw FormatError("truncated z-score file " + path.string());
  return st;
}

}  // namespace texcov::wavelets
