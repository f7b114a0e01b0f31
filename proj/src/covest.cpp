#include "texcov/covest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <tuple>

#include <boost/math/distributions/chi_squared.hpp>

#include "texcov/error.hpp"
#include "texcov/parallel.hpp"

namespace texcov::covest {

ObservationSet::ObservationSet(std::size_t n, std::size_t d, std::vector<double> rows)
    : n_(n), d_(d), rows_(std::move(rows)) {
  if (d == 0) throw ArgumentError("ObservationSet: dimension must be >= 1");
  if (rows_.size() != n * d) throw ArgumentError("ObservationSet: row data size mismatch");
}

ObservationSet flatten(const localfeat::FeatureField& field) {
  const auto v = field.values();
  return ObservationSet(field.pixel_count(), field.dim(), std::vector<double>(v.begin(), v.end()));
}

Matrix empirical_covariance_raw(const ObservationSet& obs) {
  const std::size_t n = obs.n(), d = obs.d();
  if (n < 2) throw ArgumentError("empirical_covariance: need at least 2 observations");
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = obs.row(i);
    for (std::size_t a = 0; a < d; ++a) {
      if (!std::isfinite(r[a])) throw NumericError("empirical_covariance: non-finite observation");
      mean[a] += r[a];
    }
  }
  for (double& m : mean) m /= static_cast<double>(n);
  Matrix c(d, d);
  std::vector<double> dev(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = obs.row(i);
    for (std::size_t a = 0; a < d; ++a) dev[a] = r[a] - mean[a];
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) c(a, b) += dev[a] * dev[b];
  }
  const double scale = 1.0 / static_cast<double>(n - 1);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      c(a, b) *= scale;
      c(b, a) = c(a, b);
    }
  return c;
}

spd::SpdMatrix empirical_covariance(const ObservationSet& obs) {
  return spd::SpdMatrix(empirical_covariance_raw(obs), spd::Regularization::On);
}

void McdConfig::validate() const {
  if (!(alpha > 0.5 && alpha <= 1.0)) throw ArgumentError("McdConfig: alpha must lie in (0.5, 1]");
  if (n_trial < 1 || n_best < 1 || n_best > n_trial || n_cstep_initial < 0)
    throw ArgumentError("McdConfig: need n_trial >= 1, 1 <= n_best <= n_trial, n_cstep_initial >= 0");
}

std::size_t subset_size(double alpha, std::size_t n) {
  // Guard against 0.9 * 2500 landing a hair above the integer.
  const double raw = alpha * static_cast<double>(n);
  const double nearest = std::round(raw);
  const double h = std::abs(raw - nearest) < 1e-9 ? nearest : std::ceil(raw);
  return std::min(n, static_cast<std::size_t>(h));
}

double consistency_factor(double alpha, std::size_t d) {
  if (alpha >= 1.0) return 1.0;
  const boost::math::chi_squared chi_d(static_cast<double>(d));
  const boost::math::chi_squared chi_d2(static_cast<double>(d + 2));
  const double q = boost::math::quantile(chi_d, alpha);
  return alpha / boost::math::cdf(chi_d2, q);
}

SubsetEstimate estimate_subset(const ObservationSet& obs, std::span<const std::size_t> idx) {
  const std::size_t d = obs.d(), m = idx.size();
  SubsetEstimate est;
  est.mean.assign(d, 0.0);
  for (std::size_t i : idx) {
    const auto r = obs.row(i);
    for (std::size_t a = 0; a < d; ++a) est.mean[a] += r[a];
  }
  for (double& v : est.mean) v /= static_cast<double>(m);
  est.cov = Matrix(d, d);
  std::vector<double> dev(d);
  for (std::size_t i : idx) {
    const auto r = obs.row(i);
    for (std::size_t a = 0; a < d; ++a) dev[a] = r[a] - est.mean[a];
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) est.cov(a, b) += dev[a] * dev[b];
  }
  const double scale = m > 1 ? 1.0 / static_cast<double>(m - 1) : 0.0;
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      est.cov(a, b) *= scale;
      est.cov(b, a) = est.cov(a, b);
    }
  const auto chol = cholesky(est.cov);
  // Relative to the diagonal scale, a vanishing pivot marks a degenerate subset.
  double diag_scale = 0.0;
  for (std::size_t a = 0; a < d; ++a) diag_scale += est.cov(a, a);
  diag_scale /= static_cast<double>(d);
  if (!chol.ok || !(diag_scale > 0.0) || chol.log_det < static_cast<double>(d) * std::log(diag_scale * 1e-12)) {
    est.singular = true;
    est.log_det = -std::numeric_limits<double>::infinity();
    return est;
  }
  est.log_det = chol.log_det;
  return est;
}

std::vector<std::size_t> c_step(const ObservationSet& obs, const SubsetEstimate& est, std::size_t h) {
  const std::size_t n = obs.n(), d = obs.d();
  const auto chol = cholesky(est.cov);
  if (!chol.ok) throw NumericError("c_step: covariance is not positive definite");
  const Matrix& l = chol.lower;
  std::vector<std::pair<double, std::size_t>> dist(n);
  std::vector<double> z(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = obs.row(i);
    // Forward substitution L z = x - mean; the squared distance is |z|^2.
    double s = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      double v = r[a] - est.mean[a];
      for (std::size_t b = 0; b < a; ++b) v -= l(a, b) * z[b];
      z[a] = v / l(a, a);
      s += z[a] * z[a];
    }
    dist[i] = {s, i};
  }
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(h - 1), dist.end());
  std::sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(h));
  std::vector<std::size_t> keep(h);
  for (std::size_t k = 0; k < h; ++k) keep[k] = dist[k].second;
  return keep;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Unbiased draw in [0, bound) by rejection.
std::size_t bounded(std::mt19937_64& rng, std::size_t bound) {
  const std::uint64_t b = bound;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % b;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % b);
}

// Floyd's algorithm for a k-subset of [0, n).
std::vector<std::size_t> random_subset(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t j = n - k; j < n; ++j) {
    const std::size_t t = bounded(rng, j + 1);
    if (std::find(out.begin(), out.end(), t) == out.end())
      out.push_back(t);
    else
      out.push_back(j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Candidate {
  double log_det = std::numeric_limits<double>::infinity();
  int trial = -1;
  std::vector<std::size_t> subset;
  bool valid = false;
};

bool better(const Candidate& a, const Candidate& b) {
  return std::tie(a.log_det, a.trial) < std::tie(b.log_det, b.trial);
}

}  // namespace

McdResult fast_mcd_detailed(const ObservationSet& obs, const McdConfig& cfg) {
  cfg.validate();
  const std::size_t n = obs.n(), d = obs.d();
  if (n <= 2 * d) throw ArgumentError("fast_mcd: need more than 2*d observations (n=" + std::to_string(n) + ", d=" + std::to_string(d) + ")");
  for (double v : obs.data())
    if (!std::isfinite(v)) throw NumericError("fast_mcd: non-finite observation");
  const std::size_t h = subset_size(cfg.alpha, n);

  auto finalize = [&](std::vector<std::size_t> subset, double log_det, int trial) {
    std::sort(subset.begin(), subset.end());
    const auto est = estimate_subset(obs, subset);
    Matrix scaled = est.cov * consistency_factor(cfg.alpha, d);
    return McdResult{spd::SpdMatrix(scaled, spd::Regularization::On), est.cov, est.mean, std::move(subset), log_det, trial};
  };

  if (h == n) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto est = estimate_subset(obs, all);
    return finalize(std::move(all), est.log_det, 0);
  }

  // Phase 1: random (d+1)-subsets, a few C-steps each.
  std::vector<Candidate> trials(static_cast<std::size_t>(cfg.n_trial));
  parallel_for(trials.size(), cfg.jobs, [&](std::size_t t) {
    std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(t) + 1)));
    auto est = estimate_subset(obs, random_subset(rng, n, d + 1));
    if (est.singular) return;
    std::vector<std::size_t> subset;
    for (int s = 0; s < cfg.n_cstep_initial; ++s) {
      subset = c_step(obs, est, h);
      est = estimate_subset(obs, subset);
      if (est.singular) return;
    }
    if (subset.empty()) {
      subset = c_step(obs, est, h);
      est = estimate_subset(obs, subset);
      if (est.singular) return;
    }
    std::sort(subset.begin(), subset.end());
    trials[t] = Candidate{est.log_det, static_cast<int>(t), std::move(subset), true};
  });

  std::vector<Candidate> valid;
  for (auto& c : trials)
    if (c.valid) valid.push_back(std::move(c));
  if (valid.empty()) throw DegenerateDataError("fast_mcd: every trial produced a singular subset covariance");
  std::sort(valid.begin(), valid.end(), better);
  valid.resize(std::min(valid.size(), static_cast<std::size_t>(cfg.n_best)));

  // Phase 2: iterate the best candidates to convergence.
  constexpr int kMaxSteps = 100;
  constexpr double kRelTol = 1e-12;
  parallel_for(valid.size(), cfg.jobs, [&](std::size_t k) {
    Candidate& c = valid[k];
    auto est = estimate_subset(obs, c.subset);
    for (int step = 0; step < kMaxSteps; ++step) {
      auto next = c_step(obs, est, h);
      std::sort(next.begin(), next.end());
      auto next_est = estimate_subset(obs, next);
      if (next_est.singular) break;
      // |det'/det - 1| ~ |log det' - log det| at the tolerance scale.
      const double change = std::abs(next_est.log_det - est.log_det);
      const bool same = next == c.subset;
      if (next_est.log_det <= est.log_det) {
        c.subset = std::move(next);
        est = std::move(next_est);
        c.log_det = est.log_det;
      }
      if (same || change <= kRelTol) break;
    }
  });
  const auto best = std::min_element(valid.begin(), valid.end(), better);
  return finalize(best->subset, best->log_det, best->trial);
}

}  // namespace texcov::covest
