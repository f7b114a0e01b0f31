#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "texcov/covest.hpp"
#include "texcov/imageio.hpp"
#include "texcov/matrix.hpp"
#include "texcov/spd.hpp"
#include "texcov/wavelets.hpp"

namespace texcov::eval {

enum class PipelineKind { CovGrad, CovGabor, MarginalHaar };

std::string_view to_string(PipelineKind kind);
PipelineKind parse_pipeline(std::string_view s);

/// Display name used in reports ("CovMat-grad", "CovMat-gab", "Marginal-Haar").
std::string_view feature_name(PipelineKind kind);

struct PipelineSpec {
  PipelineKind kind = PipelineKind::MarginalHaar;
  spd::RefMode ref_mode = spd::RefMode::Identity;
  covest::McdConfig mcd;
  double grad_scale = 0.125;
  std::size_t marginal_side = 128;
  spd::KarcherOptions karcher;

  bool spd_descriptor() const { return kind != PipelineKind::MarginalHaar; }
  void validate() const;
};

/// cov-grad: identity reference; cov-gabor: Riemannian-mean reference;
/// marginal-haar: z-scored linear kernel.
PipelineSpec default_spec(PipelineKind kind);

using Descriptor = std::variant<spd::SpdMatrix, wavelets::MarginalVector>;

/// Image -> descriptor:
///   cov-grad      resize by grad_scale, gradient features, FastMCD
///   cov-gabor     raw size, default Gabor bank, empirical covariance
///   marginal-haar resize to marginal_side^2, Haar marginals
/// FastMCD draws from spec.mcd.seed.
Descriptor run_pipeline(const PipelineSpec& spec, const imageio::GrayImage& img);

/// Size at which features are computed, e.g. "50x50".
std::string processed_size(const PipelineSpec& spec, std::size_t width, std::size_t height);

/// Per-image FastMCD seed derived from the run seed and the image id, so a
/// descriptor does not depend on the order images are processed in.
std::uint64_t image_seed(std::uint64_t run_seed, std::string_view image_id);

/// Preprocessing fitted on a training set: the kernel reference for SPD
/// descriptors, z-score statistics for marginals.
struct FittedState {
  PipelineKind kind = PipelineKind::MarginalHaar;
  std::optional<spd::KernelRef> ref;
  std::optional<wavelets::ZScoreStats> zscore;
};

FittedState fit_state(const PipelineSpec& spec, std::span<const Descriptor> train);

/// kernel(rows[i], cols[j]) under the fitted state.
Matrix kernel_matrix(const FittedState& state, std::span<const Descriptor> rows, std::span<const Descriptor> cols);

/// Symmetric kernel matrix of one set.
Matrix gram(const FittedState& state, std::span<const Descriptor> set);

/// "logeuclidean:identity", "logeuclidean:riemannian-mean" or "linear:zscore".
std::string kernel_spec(const FittedState& state);

}  // namespace texcov::eval
