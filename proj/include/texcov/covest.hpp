#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "texcov/localfeat.hpp"
#include "texcov/matrix.hpp"
#include "texcov/spd.hpp"

namespace texcov::covest {

/// n observations of dimension d, stored row-major.
class ObservationSet {
 public:
  ObservationSet(std::size_t n, std::size_t d, std::vector<double> rows);

  std::size_t n() const noexcept { return n_; }
  std::size_t d() const noexcept { return d_; }
  std::span<const double> row(std::size_t i) const { return {rows_.data() + i * d_, d_}; }
  std::span<const double> data() const noexcept { return rows_; }

 private:
  std::size_t n_;
  std::size_t d_;
  std::vector<double> rows_;
};

/// One observation per pixel in row-major pixel order.
ObservationSet flatten(const localfeat::FeatureField& field);

/// Unbiased estimator 1/(n-1) sum (f - mean)(f - mean)^T, symmetrized; no
/// positive-definiteness policy applied.
Matrix empirical_covariance_raw(const ObservationSet& obs);

/// empirical_covariance_raw followed by the SPD regularization policy.
spd::SpdMatrix empirical_covariance(const ObservationSet& obs);

struct McdConfig {
  double alpha = 0.9;
  int n_trial = 500;
  int n_cstep_initial = 2;
  int n_best = 10;
  std::uint64_t seed = 0;
  /// Worker threads for the trial phase; results do not depend on it.
  unsigned jobs = 1;

  void validate() const;
};

/// h = ceil(alpha * n).
std::size_t subset_size(double alpha, std::size_t n);

/// alpha / F_{chi2(d+2)}(q) with q the chi2(d) quantile at alpha; 1 when
/// alpha == 1.
double consistency_factor(double alpha, std::size_t d);

/// Mean and unbiased covariance of a subset of rows.
struct SubsetEstimate {
  std::vector<double> mean;
  Matrix cov;
  double log_det = 0.0;
  bool singular = false;
};

SubsetEstimate estimate_subset(const ObservationSet& obs, std::span<const std::size_t> idx);

/// One concentration step: the h observations with the smallest Mahalanobis
/// distance under `est`, ordered by (distance, index).
std::vector<std::size_t> c_step(const ObservationSet& obs, const SubsetEstimate& est, std::size_t h);

struct McdResult {
  spd::SpdMatrix covariance;      ///< consistency-scaled, regularized
  Matrix raw_covariance;          ///< best h-subset covariance before scaling
  std::vector<double> location;
  std::vector<std::size_t> subset;  ///< sorted indices of the best h-subset
  double log_det = 0.0;
  int best_trial = -1;
};

McdResult fast_mcd_detailed(const ObservationSet& obs, const McdConfig& cfg);

inline spd::SpdMatrix fast_mcd(const ObservationSet& obs, const McdConfig& cfg) {
  return fast_mcd_detailed(obs, cfg).covariance;
}

}  // namespace texcov::covest
