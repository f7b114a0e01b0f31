#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "texcov/imageio.hpp"

namespace texcov::wavelets {

/// Orthonormal Haar decomposition down to a single approximation coefficient.
/// Scale s = 1 is the finest. For 1D pyramids detail[s-1] has one band; for
/// 2D pyramids it has three (horizontal, vertical, diagonal), each a
/// row-major (side >> s)^2 grid.
struct WaveletPyramid {
  int levels = 0;
  int dims = 1;
  std::vector<std::vector<std::vector<double>>> detail;
  std::vector<double> approx;

  std::size_t coefficient_count() const;
};

bool is_dyadic(std::size_t n);

WaveletPyramid haar_dwt_1d(std::span<const double> x);
std::vector<double> haar_idwt_1d(const WaveletPyramid& p);

/// Rows are filtered first, then columns, at every level.
WaveletPyramid haar_dwt_2d(const imageio::GrayImage& img);
imageio::GrayImage haar_idwt_2d(const WaveletPyramid& p);

/// Fraction of absolute coefficient mass per band: entries 0..J-1 are detail
/// scales 1..J (fine to coarse), entry J the approximation band. A zero
/// signal maps to the uniform vector 1/(J+1).
class MarginalVector {
 public:
  explicit MarginalVector(std::vector<double> values);
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::vector<double> values_;
};

MarginalVector marginals(const WaveletPyramid& p);
MarginalVector marginals_1d(std::span<const double> x);
MarginalVector marginals_2d(const imageio::GrayImage& img);

inline constexpr double kStdFloor = 1e-12;

struct ZScoreStats {
  std::vector<double> mean;
  std::vector<double> std;
};

ZScoreStats zscore_fit(std::span<const MarginalVector> train);
std::vector<double> zscore_apply(const ZScoreStats& stats, const MarginalVector& v);

/// Marginal feature file: one "<image-id> <values...>" line per image.
struct MarginalRecord {
  std::string id;
  MarginalVector values;
};

void write_marginal_line(std::ostream& out, const std::string& id, const MarginalVector& v);
std::vector<MarginalRecord> read_marginal_file(const std::filesystem::path& path);

void write_zscore(const std::filesystem::path& path, const ZScoreStats& stats);
ZScoreStats read_zscore(const std::filesystem::path& path);

}  // namespace texcov::wavelets
