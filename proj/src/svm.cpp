#include "texcov/svm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "texcov/error.hpp"
#include "texcov/spd.hpp"

namespace texcov::svm {

KernelGram::KernelGram(Matrix k, std::vector<int> labels) : k_(std::move(k)), labels_(std::move(labels)) {
  if (!k_.square() || k_.rows() != labels_.size()) throw ArgumentError("KernelGram: shape does not match labels");
  for (int y : labels_)
    if (y != 1 && y != -1) throw ArgumentError("KernelGram: labels must be +1 or -1");
  double max_diag = 0.0;
  for (std::size_t i = 0; i < k_.rows(); ++i) {
    max_diag = std::max(max_diag, k_(i, i));
    for (std::size_t j = 0; j < k_.cols(); ++j) {
      if (!std::isfinite(k_(i, j))) throw NumericError("KernelGram: non-finite entry");
      if (std::abs(k_(i, j) - k_(j, i)) > 1e-10) throw ArgumentError("KernelGram: matrix is not symmetric");
    }
  }
  k_ = symmetrized(k_);
  if (k_.rows() == 0) return;
  const double min_eig = spd::sym_eig(k_).values.back();
  if (min_eig < -1e-6 * std::max(max_diag, std::numeric_limits<double>::min()))
    throw NumericError("KernelGram: kernel matrix is not positive semidefinite (min eigenvalue " +
                       std::to_string(min_eig) + ")");
}

KernelGram KernelGram::subset(std::span<const std::size_t> idx) const {
  Matrix k(idx.size(), idx.size());
  std::vector<int> y(idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a) {
    y[a] = labels_[idx[a]];
    for (std::size_t b = 0; b < idx.size(); ++b) k(a, b) = k_(idx[a], idx[b]);
  }
  return KernelGram(std::move(k), std::move(y));
}

double TrainedSvm::alpha(std::size_t i) const { return std::abs(dual_coef[i]); }

namespace {

constexpr double kTau = 1e-12;

}  // namespace

TrainedSvm svm_train(const KernelGram& gram, double c, TrainOptions opts, std::string kernel_spec) {
  const std::size_t n = gram.n();
  if (n < 2) throw ArgumentError("svm_train: need at least 2 samples");
  if (!(c > 0.0)) throw ArgumentError("svm_train: C must be positive");
  const auto y = gram.labels();
  const bool has_pos = std::find(y.begin(), y.end(), 1) != y.end();
  const bool has_neg = std::find(y.begin(), y.end(), -1) != y.end();
  if (!has_pos || !has_neg) throw ArgumentError("svm_train: both classes must be present");

  auto q = [&](std::size_t i, std::size_t j) { return static_cast<double>(y[i] * y[j]) * gram(i, j); };
  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);  // Q alpha - e

  auto in_up = [&](std::size_t t) { return (y[t] == 1 && alpha[t] < c) || (y[t] == -1 && alpha[t] > 0.0); };
  auto in_low = [&](std::size_t t) { return (y[t] == -1 && alpha[t] < c) || (y[t] == 1 && alpha[t] > 0.0); };

  const long max_iter = opts.max_passes * static_cast<long>(n);
  long iter = 0;
  for (;; ++iter) {
    double gmax = -INFINITY, gmin = INFINITY;
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > gmax) gmax = v, i = t;
      if (in_low(t) && v < gmin) gmin = v, j = t;
    }
    if (i == n || j == n || gmax - gmin < opts.tol) break;
    if (iter >= max_iter)
      throw ConvergenceError("svm_train: SMO did not reach the KKT tolerance within " + std::to_string(max_iter) +
                                 " updates",
                             gmax - gmin);

    const double old_i = alpha[i], old_j = alpha[j];
    if (y[i] != y[j]) {
      double quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) alpha[j] = 0.0, alpha[i] = diff;
      } else {
        if (alpha[i] < 0.0) alpha[i] = 0.0, alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) alpha[i] = c, alpha[j] = c - diff;
      } else {
        if (alpha[j] > c) alpha[j] = c, alpha[i] = c + diff;
      }
    } else {
      double quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) alpha[i] = c, alpha[j] = sum - c;
      } else {
        if (alpha[j] < 0.0) alpha[j] = 0.0, alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) alpha[j] = c, alpha[i] = sum - c;
      } else {
        if (alpha[i] < 0.0) alpha[i] = 0.0, alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < n; ++t) grad[t] += q(t, i) * di + q(t, j) * dj;
  }

  // rho such that f(x) = sum alpha_i y_i K(x_i, x) - rho.
  double ub = INFINITY, lb = -INFINITY, sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= c) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  double rho;
  if (n_free > 0) rho = sum_free / static_cast<double>(n_free);
  else rho = 0.5 * (ub + lb);

  TrainedSvm model;
  model.c = c;
  model.bias = -rho;
  model.kernel_spec = std::move(kernel_spec);
  model.iterations = iter;
  model.dual_coef.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    model.dual_coef[t] = alpha[t] * y[t];
    if (alpha[t] > 0.0) model.support_idx.push_back(t);
  }
  return model;
}

double svm_decision(const TrainedSvm& model, std::span<const double> k_row) {
  if (k_row.size() != model.n())
    throw ArgumentError("svm_decision: kernel row has " + std::to_string(k_row.size()) + " entries, model expects " +
                        std::to_string(model.n()));
  double f = model.bias;
  for (std::size_t i : model.support_idx) f += model.dual_coef[i] * k_row[i];
  return f;
}

int svm_predict(const TrainedSvm& model, std::span<const double> k_row) {
  return svm_decision(model, k_row) >= 0.0 ? 1 : -1;
}

double dual_objective(const KernelGram& gram, std::span<const double> alpha) {
  const auto y = gram.labels();
  double lin = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < gram.n(); ++i) {
    lin += alpha[i];
    for (std::size_t j = 0; j < gram.n(); ++j) quad += alpha[i] * alpha[j] * y[i] * y[j] * gram(i, j);
  }
  return lin - 0.5 * quad;
}

void save_model(const std::filesystem::path& path, const TrainedSvm& model) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  char buf[64];
  out << "svm " << model.n();
  std::snprintf(buf, sizeof buf, " %.17g %.17g ", model.c, model.bias);
  out << buf << model.kernel_spec << '\n';
  for (std::size_t i = 0; i < model.n(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", model.dual_coef[i]);
    out << i << ' ' << buf << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

TrainedSvm load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string tag;
  std::size_t n = 0;
  TrainedSvm model;
  if (!(in >> tag >> n >> model.c >> model.bias >> model.kernel_spec) || tag != "svm")
    throw FormatError("malformed model header in " + path.string());
  model.dual_coef.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t idx = 0;
    double coef = 0.0;
    if (!(in >> idx >> coef) || idx >= n) throw FormatError("malformed model body in " + path.string());
    model.dual_coef[idx] = coef;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (model.dual_coef[i] != 0.0) model.support_idx.push_back(i);
  return model;
}

}  // namespace texcov::svm
