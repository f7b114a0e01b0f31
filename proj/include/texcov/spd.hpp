#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "texcov/matrix.hpp"

namespace texcov::spd {

inline constexpr double kSymmetryTol = 1e-12;
/// Eigenvalues at or below kEigFloorRel * trace / d count as singular.
inline constexpr double kEigFloorRel = 1e-12;
/// Shrinkage applied by the regularization policy, relative to trace / d.
inline constexpr double kShrinkage = 1e-8;

/// Symmetric matrix (asymmetry within kSymmetryTol, stored exactly symmetric).
class SymMatrix {
 public:
  explicit SymMatrix(const Matrix& m);
  std::size_t dim() const noexcept { return m_.rows(); }
  const Matrix& matrix() const noexcept { return m_; }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }

 private:
  Matrix m_;
};

enum class Regularization { Off, On };

/// Symmetric positive-definite matrix. Construction checks symmetry and that
/// the smallest eigenvalue exceeds the floor; with Regularization::On a
/// too-small spectrum is shrunk toward a scaled identity instead of rejected.
class SpdMatrix {
 public:
  explicit SpdMatrix(const Matrix& m, Regularization reg = Regularization::Off);

  static SpdMatrix identity(std::size_t d) { return SpdMatrix(Matrix::identity(d)); }

  std::size_t dim() const noexcept { return m_.rows(); }
  const Matrix& matrix() const noexcept { return m_; }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }

  friend bool operator==(const SpdMatrix&, const SpdMatrix&) = default;

 private:
  Matrix m_;
};

struct EigenDecomposition {
  std::vector<double> values;  ///< descending
  Matrix vectors;              ///< orthonormal columns, column k pairs with values[k]
};

/// Cyclic Jacobi rotations; stops when the off-diagonal Frobenius norm drops
/// below 1e-14 of the total norm (max 100 sweeps).
EigenDecomposition sym_eig(const Matrix& m);
inline EigenDecomposition sym_eig(const SymMatrix& m) { return sym_eig(m.matrix()); }

/// U diag(f(lambda)) U^T.
template <typename Fn>
Matrix spectral_map(const EigenDecomposition& e, Fn&& f);

SymMatrix spd_log(const SpdMatrix& c);
SpdMatrix spd_exp(const SymMatrix& s);
SpdMatrix spd_sqrt(const SpdMatrix& c);
SpdMatrix spd_invsqrt(const SpdMatrix& c);

/// || log(A^{-1/2} B A^{-1/2}) ||_F
double riemannian_distance(const SpdMatrix& a, const SpdMatrix& b);

struct KarcherOptions {
  double tol = 1e-9;
  int max_iter = 200;
};

/// Fixed-point Karcher mean started from the arithmetic mean. On return the
/// Frobenius norm of the mean tangent vector at the result is <= tol.
SpdMatrix riemannian_mean(std::span<const SpdMatrix> cs, KarcherOptions opts = {});

/// Frobenius norm of (1/N) sum log(G^{-1/2} C_i G^{-1/2}).
double karcher_residual(std::span<const SpdMatrix> cs, const SpdMatrix& g);

enum class RefMode { Identity, RiemannianMean };

std::string_view to_string(RefMode mode);
RefMode parse_ref_mode(std::string_view s);

/// Reference point G of the tangent space used by the LogEuclidean kernel.
class KernelRef {
 public:
  KernelRef(RefMode mode, SpdMatrix g);

  static KernelRef identity(std::size_t d);
  static KernelRef riemannian_mean(std::span<const SpdMatrix> cs, KarcherOptions opts = {});

  RefMode mode() const noexcept { return mode_; }
  const SpdMatrix& matrix() const noexcept { return g_; }
  std::size_t dim() const noexcept { return g_.dim(); }

  /// log(G^{-1/2} C G^{-1/2}), the argument symmetrized first.
  SymMatrix tangent(const SpdMatrix& c) const;

 private:
  RefMode mode_;
  SpdMatrix g_;
  Matrix g_invsqrt_;
};

/// Below this Frobenius norm a tangent vector is treated as zero.
inline constexpr double kDegenerateNorm = 1e-12;

/// Cosine similarity of tangent vectors; 0 if exactly one is degenerate,
/// 1 if both are.
double normalized_inner(const SymMatrix& li, const SymMatrix& lj);

double logeuclidean_kernel(const SpdMatrix& ci, const SpdMatrix& cj, const KernelRef& g);

/// Symmetric n x n matrix of kernel values; each tangent vector is computed
/// once and only the upper triangle is evaluated.
Matrix gram_matrix(std::span<const SpdMatrix> cs, const KernelRef& g);

/// rows x cols matrix of kernel(rows[i], cols[j]).
Matrix cross_gram(std::span<const SpdMatrix> rows, std::span<const SpdMatrix> cols, const KernelRef& g);

/// Text format: "spd <d>" then d rows of d values with 17 significant digits.
void write_spd(std::ostream& out, const Matrix& m);
void write_spd(const std::filesystem::path& path, const SpdMatrix& m);
Matrix read_spd_matrix(std::istream& in);
SpdMatrix read_spd(const std::filesystem::path& path);

template <typename Fn>
Matrix spectral_map(const EigenDecomposition& e, Fn&& f) {
  const std::size_t n = e.values.size();
  Matrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double fk = f(e.values[k]);
    for (std::size_t i = 0; i < n; ++i) {
      const double ui = e.vectors(i, k) * fk;
      for (std::size_t j = i; j < n; ++j) out(i, j) += ui * e.vectors(j, k);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) out(i, j) = out(j, i);
  return out;
}

}  // namespace texcov::spd
