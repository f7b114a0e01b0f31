#include "texcov/spd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "texcov/error.hpp"

namespace texcov::spd {

SymMatrix::SymMatrix(const Matrix& m) {
  if (!m.square() || m.empty()) throw ArgumentError("SymMatrix: matrix must be square and nonempty");
  if (asymmetry(m) > kSymmetryTol) throw ArgumentError("SymMatrix: matrix is not symmetric");
  m_ = symmetrized(m);
}

SpdMatrix::SpdMatrix(const Matrix& m, Regularization reg) {
  m_ = SymMatrix(m).matrix();
  const std::size_t d = m_.rows();
  for (double v : m_.data())
    if (!std::isfinite(v)) throw NumericError("SpdMatrix: non-finite entry");
  const auto eig = sym_eig(m_);
  const double scale = m_.trace() / static_cast<double>(d);
  const double floor = kEigFloorRel * scale;
  if (eig.values.back() > floor && eig.values.back() > 0.0) return;
  if (reg == Regularization::Off)
    throw NotPositiveDefiniteError("SpdMatrix: smallest eigenvalue " + std::to_string(eig.values.back()) +
                                   " is not above the floor");
  // A zero matrix has no trace to scale by; shrink toward the unit identity.
  const double shrink = kShrinkage * (scale > 0.0 ? scale : 1.0);
  for (std::size_t i = 0; i < d; ++i) m_(i, i) += shrink;
  const double new_floor = kEigFloorRel * m_.trace() / static_cast<double>(d);
  if (!(eig.values.back() + shrink > new_floor))
    throw NotPositiveDefiniteError("SpdMatrix: matrix is indefinite beyond the regularization range");
}

EigenDecomposition sym_eig(const Matrix& input) {
  if (!input.square()) throw ArgumentError("sym_eig: matrix not square");
  if (asymmetry(input) > kSymmetryTol) throw ArgumentError("sym_eig: matrix not symmetric");
  const std::size_t n = input.rows();
  Matrix a = symmetrized(input);
  Matrix v = Matrix::identity(n);
  const double total = a.frobenius_norm();

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  constexpr int kMaxSweeps = 100;
  int sweep = 0;
  for (; sweep < kMaxSweeps; ++sweep) {
    if (off_norm() <= 1e-14 * total) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (sweep == kMaxSweeps && off_norm() > 1e-14 * total)
    throw ConvergenceError("sym_eig: Jacobi sweeps did not converge", off_norm());

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  EigenDecomposition out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

namespace {

void require_positive(const EigenDecomposition& e, const char* what) {
  const double scale = std::accumulate(e.values.begin(), e.values.end(), 0.0) / static_cast<double>(e.values.size());
  if (!(e.values.back() > kEigFloorRel * scale) || !(e.values.back() > 0.0))
    throw NotPositiveDefiniteError(std::string(what) + ": eigenvalue below floor");
}

}  // namespace

SymMatrix spd_log(const SpdMatrix& c) {
  const auto e = sym_eig(c.matrix());
  require_positive(e, "spd_log");
  return SymMatrix(spectral_map(e, [](double x) { return std::log(x); }));
}

SpdMatrix spd_exp(const SymMatrix& s) {
  return SpdMatrix(spectral_map(sym_eig(s.matrix()), [](double x) { return std::exp(x); }));
}

SpdMatrix spd_sqrt(const SpdMatrix& c) {
  const auto e = sym_eig(c.matrix());
  require_positive(e, "spd_sqrt");
  return SpdMatrix(spectral_map(e, [](double x) { return std::sqrt(x); }));
}

SpdMatrix spd_invsqrt(const SpdMatrix& c) {
  const auto e = sym_eig(c.matrix());
  require_positive(e, "spd_invsqrt");
  return SpdMatrix(spectral_map(e, [](double x) { return 1.0 / std::sqrt(x); }));
}

namespace {

// symmetrized(W C W) for symmetric W.
Matrix congruence(const Matrix& w, const Matrix& c) { return symmetrized(w * c * w); }

}  // namespace

double riemannian_distance(const SpdMatrix& a, const SpdMatrix& b) {
  if (a.dim() != b.dim()) throw ArgumentError("riemannian_distance: dimension mismatch");
  const auto inner = sym_eig(congruence(spd_invsqrt(a).matrix(), b.matrix()));
  require_positive(inner, "riemannian_distance");
  double s = 0.0;
  for (double l : inner.values) s += std::log(l) * std::log(l);
  return std::sqrt(s);
}

namespace {

struct ReferenceFactors {
  Matrix sqrt;
  Matrix invsqrt;
};

ReferenceFactors factors(const SpdMatrix& g) {
  const auto e = sym_eig(g.matrix());
  require_positive(e, "riemannian_mean");
  return {spectral_map(e, [](double x) { return std::sqrt(x); }),
          spectral_map(e, [](double x) { return 1.0 / std::sqrt(x); })};
}

// Mean of log(G^{-1/2} C G^{-1/2}) over the set.
Matrix mean_tangent(std::span<const SpdMatrix> cs, const Matrix& invsqrt) {
  const std::size_t d = invsqrt.rows();
  Matrix out(d, d);
  for (const auto& c : cs) {
    if (c.dim() != d) throw ArgumentError("riemannian_mean: dimension mismatch");
    const auto e = sym_eig(congruence(invsqrt, c.matrix()));
    require_positive(e, "riemannian_mean");
    out += spectral_map(e, [](double x) { return std::log(x); });
  }
  out *= 1.0 / static_cast<double>(cs.size());
  return out;
}

}  // namespace

double karcher_residual(std::span<const SpdMatrix> cs, const SpdMatrix& g) {
  return mean_tangent(cs, factors(g).invsqrt).frobenius_norm();
}

SpdMatrix riemannian_mean(std::span<const SpdMatrix> cs, KarcherOptions opts) {
  if (cs.empty()) throw ArgumentError("riemannian_mean: empty set");
  const std::size_t d = cs.front().dim();
  Matrix arith(d, d);
  for (const auto& c : cs) {
    if (c.dim() != d) throw ArgumentError("riemannian_mean: dimension mismatch");
    arith += c.matrix();
  }
  arith *= 1.0 / static_cast<double>(cs.size());
  SpdMatrix g(arith);

  // The full step G^{1/2} exp(T) G^{1/2} can overshoot and then oscillate
  // with a contraction close to 1 on widely spread sets. Steps are halved
  // until the gradient norm shrinks by at least a factor 1 - step/2.
  auto f = factors(g);
  auto tm = mean_tangent(cs, f.invsqrt);
  double residual = tm.frobenius_norm();
  for (int iter = 0; iter < opts.max_iter && residual > opts.tol; ++iter) {
    const auto dir = sym_eig(tm);
    double step = 1.0;
    for (;;) {
      const Matrix expo = spectral_map(dir, [step](double x) { return std::exp(step * x); });
      SpdMatrix candidate(congruence(f.sqrt, expo));
      auto cf = factors(candidate);
      auto ctm = mean_tangent(cs, cf.invsqrt);
      if (ctm.frobenius_norm() <= (1.0 - 0.5 * step) * residual || step < 1e-6) {
        g = std::move(candidate);
        f = std::move(cf);
        tm = std::move(ctm);
        break;
      }
      step *= 0.5;
    }
    residual = tm.frobenius_norm();
  }
  if (residual <= opts.tol) return g;
  throw ConvergenceError("riemannian_mean: no convergence within " + std::to_string(opts.max_iter) +
                             " iterations (residual " + std::to_string(residual) + ")",
                         residual);
}

std::string_view to_string(RefMode mode) {
  return mode == RefMode::Identity ? "identity" : "riemannian-mean";
}

RefMode parse_ref_mode(std::string_view s) {
  if (s == "identity") return RefMode::Identity;
  if (s == "riemannian-mean") return RefMode::RiemannianMean;
  throw ConfigError("unknown kernel reference '" + std::string(s) + "'");
}

KernelRef::KernelRef(RefMode mode, SpdMatrix g)
    : mode_(mode), g_(std::move(g)), g_invsqrt_(spd_invsqrt(g_).matrix()) {}

KernelRef KernelRef::identity(std::size_t d) { return KernelRef(RefMode::Identity, SpdMatrix::identity(d)); }

KernelRef KernelRef::riemannian_mean(std::span<const SpdMatrix> cs, KarcherOptions opts) {
  return KernelRef(RefMode::RiemannianMean, spd::riemannian_mean(cs, opts));
}

SymMatrix KernelRef::tangent(const SpdMatrix& c) const {
  if (c.dim() != dim()) throw ArgumentError("KernelRef: descriptor dimension does not match reference");
  const auto e = sym_eig(congruence(g_invsqrt_, c.matrix()));
  require_positive(e, "logeuclidean_kernel");
  return SymMatrix(spectral_map(e, [](double x) { return std::log(x); }));
}

double normalized_inner(const SymMatrix& li, const SymMatrix& lj) {
  const double ni = li.matrix().frobenius_norm();
  const double nj = lj.matrix().frobenius_norm();
  const bool di = ni <= kDegenerateNorm, dj = nj <= kDegenerateNorm;
  if (di && dj) return 1.0;
  if (di || dj) return 0.0;
  return frobenius_inner(li.matrix(), lj.matrix()) / (ni * nj);
}

double logeuclidean_kernel(const SpdMatrix& ci, const SpdMatrix& cj, const KernelRef& g) {
  return normalized_inner(g.tangent(ci), g.tangent(cj));
}

Matrix gram_matrix(std::span<const SpdMatrix> cs, const KernelRef& g) {
  std::vector<SymMatrix> logs;
  logs.reserve(cs.size());
  for (const auto& c : cs) logs.push_back(g.tangent(c));
  Matrix k(cs.size(), cs.size());
  for (std::size_t i = 0; i < cs.size(); ++i)
    for (std::size_t j = i; j < cs.size(); ++j) {
      const double v = normalized_inner(logs[i], logs[j]);
      k(i, j) = v;
      k(j, i) = v;
    }
  return k;
}

Matrix cross_gram(std::span<const SpdMatrix> rows, std::span<const SpdMatrix> cols, const KernelRef& g) {
  std::vector<SymMatrix> lc;
  lc.reserve(cols.size());
  for (const auto& c : cols) lc.push_back(g.tangent(c));
  Matrix k(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto li = g.tangent(rows[i]);
    for (std::size_t j = 0; j < cols.size(); ++j) k(i, j) = normalized_inner(li, lc[j]);
  }
  return k;
}

void write_spd(std::ostream& out, const Matrix& m) {
  out << "spd " << m.rows() << '\n';
  char buf[40];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      out << (j ? " " : "") << buf;
    }
    out << '\n';
  }
}

void write_spd(const std::filesystem::path& path, const SpdMatrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_spd(out, m.matrix());
  if (!out) throw IoError("failed writing " + path.string());
}

Matrix read_spd_matrix(std::istream& in) {
  std::string tag;
  long d = 0;
  if (!(in >> tag >> d) || tag != "spd" || d <= 0) throw FormatError("malformed matrix header (expected 'spd <d>')");
  Matrix m(static_cast<std::size_t>(d), static_cast<std::size_t>(d));
  for (double& v : m.data())
    if (!(in >> v)) throw FormatError("truncated matrix body");
  return m;
}

SpdMatrix read_spd(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return SpdMatrix(read_spd_matrix(in));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace texcov::spd
