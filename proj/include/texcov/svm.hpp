#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "texcov/matrix.hpp"

namespace texcov::svm {

/// Precomputed kernel matrix with +/-1 labels. Construction rejects
/// asymmetric (> 1e-10) or clearly indefinite (min eigenvalue below
/// -1e-6 * max diagonal) matrices.
class KernelGram {
 public:
  KernelGram(Matrix k, std::vector<int> labels);

  std::size_t n() const noexcept { return labels_.size(); }
  const Matrix& k() const noexcept { return k_; }
  double operator()(std::size_t i, std::size_t j) const { return k_(i, j); }
  std::span<const int> labels() const noexcept { return labels_; }

  /// Restriction to the given sample indices, in that order.
  KernelGram subset(std::span<const std::size_t> idx) const;

 private:
  Matrix k_;
  std::vector<int> labels_;
};

struct TrainOptions {
  double tol = 1e-3;
  long max_passes = 10000;
};

struct TrainedSvm {
  std::vector<double> dual_coef;  ///< alpha_i * y_i
  double bias = 0.0;
  double c = 1.0;
  std::vector<std::size_t> support_idx;
  std::string kernel_spec;
  long iterations = 0;

  std::size_t n() const noexcept { return dual_coef.size(); }
  double alpha(std::size_t i) const;
};

/// C-SVM dual solved by SMO with maximal-violating-pair selection. Stops when
/// the KKT gap max_{I_up} -y g - min_{I_low} -y g drops below tol. Bias is the
/// free-SV mean, or the midpoint of the feasible interval when no SV is free.
TrainedSvm svm_train(const KernelGram& gram, double c, TrainOptions opts = {}, std::string kernel_spec = "precomputed");

double svm_decision(const TrainedSvm& model, std::span<const double> k_row);
/// sign of the decision value; exactly 0 maps to +1.
int svm_predict(const TrainedSvm& model, std::span<const double> k_row);

/// sum alpha - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij
double dual_objective(const KernelGram& gram, std::span<const double> alpha);

void save_model(const std::filesystem::path& path, const TrainedSvm& model);
TrainedSvm load_model(const std::filesystem::path& path);

}  // namespace texcov::svm
