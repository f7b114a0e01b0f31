#include "texcov/pipeline.hpp"

#include <cmath>

#include "texcov/error.hpp"
#include "texcov/localfeat.hpp"

namespace texcov::eval {

std::string_view to_string(PipelineKind kind) {
  switch (kind) {
    case PipelineKind::CovGrad: return "cov-grad";
    case PipelineKind::CovGabor: return "cov-gabor";
    case PipelineKind::MarginalHaar: return "marginal-haar";
  }
  return "?";
}

PipelineKind parse_pipeline(std::string_view s) {
  if (s == "cov-grad") return PipelineKind::CovGrad;
  if (s == "cov-gabor") return PipelineKind::CovGabor;
  if (s == "marginal-haar") return PipelineKind::MarginalHaar;
  throw ConfigError("unknown pipeline '" + std::string(s) + "' (expected cov-grad, cov-gabor or marginal-haar)");
}

std::string_view feature_name(PipelineKind kind) {
  switch (kind) {
    case PipelineKind::CovGrad: return "CovMat-grad";
    case PipelineKind::CovGabor: return "CovMat-gab";
    case PipelineKind::MarginalHaar: return "Marginal-Haar";
  }
  return "?";
}

void PipelineSpec::validate() const {
  mcd.validate();
  if (!(grad_scale > 0.0 && grad_scale <= 1.0)) throw ConfigError("grad_scale must lie in (0, 1]");
  if (!wavelets::is_dyadic(marginal_side)) throw ConfigError("marginal_side must be a power of two");
}

PipelineSpec default_spec(PipelineKind kind) {
  PipelineSpec spec;
  spec.kind = kind;
  spec.ref_mode = kind == PipelineKind::CovGabor ? spd::RefMode::RiemannianMean : spd::RefMode::Identity;
  return spec;
}

namespace {

std::size_t scaled(std::size_t n, double f) { return static_cast<std::size_t>(std::lround(static_cast<double>(n) * f)); }

}  // namespace

std::string processed_size(const PipelineSpec& spec, std::size_t width, std::size_t height) {
  switch (spec.kind) {
    case PipelineKind::CovGrad:
      return std::to_string(scaled(width, spec.grad_scale)) + "x" + std::to_string(scaled(height, spec.grad_scale));
    case PipelineKind::CovGabor: return std::to_string(width) + "x" + std::to_string(height);
    case PipelineKind::MarginalHaar:
      return std::to_string(spec.marginal_side) + "x" + std::to_string(spec.marginal_side);
  }
  return "?";
}

Descriptor run_pipeline(const PipelineSpec& spec, const imageio::GrayImage& img) {
  spec.validate();
  switch (spec.kind) {
    case PipelineKind::CovGrad: {
      const auto small = imageio::rescale(img, spec.grad_scale);
      const auto obs = covest::flatten(localfeat::gradient_features(small));
      return covest::fast_mcd(obs, spec.mcd);
    }
    case PipelineKind::CovGabor: {
      const auto bank = localfeat::default_gabor_bank();
      return covest::empirical_covariance(covest::flatten(localfeat::gabor_features(img, bank)));
    }
    case PipelineKind::MarginalHaar:
      return wavelets::marginals_2d(imageio::resize(img, spec.marginal_side, spec.marginal_side));
  }
  throw ArgumentError("run_pipeline: unknown pipeline");
}

std::uint64_t image_seed(std::uint64_t run_seed, std::string_view image_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : image_id) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return run_seed ^ (h * 0x9E3779B97F4A7C15ULL);
}

namespace {

std::vector<spd::SpdMatrix> as_spd(std::span<const Descriptor> ds) {
  std::vector<spd::SpdMatrix> out;
  out.reserve(ds.size());
  for (const auto& d : ds) {
    if (!std::holds_alternative<spd::SpdMatrix>(d)) throw ArgumentError("expected covariance descriptors");
    out.push_back(std::get<spd::SpdMatrix>(d));
  }
  return out;
}

std::vector<wavelets::MarginalVector> as_marginals(std::span<const Descriptor> ds) {
  std::vector<wavelets::MarginalVector> out;
  out.reserve(ds.size());
  for (const auto& d : ds) {
    if (!std::holds_alternative<wavelets::MarginalVector>(d)) throw ArgumentError("expected marginal descriptors");
    out.push_back(std::get<wavelets::MarginalVector>(d));
  }
  return out;
}

}  // namespace

FittedState fit_state(const PipelineSpec& spec, std::span<const Descriptor> train) {
  if (train.empty()) throw ArgumentError("fit_state: empty training set");
  FittedState st;
  st.kind = spec.kind;
  if (spec.spd_descriptor()) {
    const auto cs = as_spd(train);
    st.ref = spec.ref_mode == spd::RefMode::Identity ? spd::KernelRef::identity(cs.front().dim())
                                                     : spd::KernelRef::riemannian_mean(cs, spec.karcher);
  } else {
    st.zscore = wavelets::zscore_fit(as_marginals(train));
  }
  return st;
}

namespace {

std::vector<std::vector<double>> standardized(const wavelets::ZScoreStats& z, std::span<const Descriptor> ds) {
  std::vector<std::vector<double>> out;
  out.reserve(ds.size());
  for (const auto& m : as_marginals(ds)) out.push_back(wavelets::zscore_apply(z, m));
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

}  // namespace

Matrix kernel_matrix(const FittedState& state, std::span<const Descriptor> rows, std::span<const Descriptor> cols) {
  if (state.ref) return spd::cross_gram(as_spd(rows), as_spd(cols), *state.ref);
  if (!state.zscore) throw ArgumentError("kernel_matrix: state is not fitted");
  const auto zr = standardized(*state.zscore, rows);
  const auto zc = standardized(*state.zscore, cols);
  Matrix k(zr.size(), zc.size());
  for (std::size_t i = 0; i < zr.size(); ++i)
    for (std::size_t j = 0; j < zc.size(); ++j) k(i, j) = dot(zr[i], zc[j]);
  return k;
}

Matrix gram(const FittedState& state, std::span<const Descriptor> set) {
  if (state.ref) return spd::gram_matrix(as_spd(set), *state.ref);
  if (!state.zscore) throw ArgumentError("gram: state is not fitted");
  const auto z = standardized(*state.zscore, set);
  Matrix k(z.size(), z.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t j = i; j < z.size(); ++j) k(i, j) = k(j, i) = dot(z[i], z[j]);
  return k;
}

std::string kernel_spec(const FittedState& state) {
  if (state.ref) return "logeuclidean:" + std::string(spd::to_string(state.ref->mode()));
  return "linear:zscore";
}

}  // namespace texcov::eval
