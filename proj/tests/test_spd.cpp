#include <doctest.h>

#include <cmath>
#include <numbers>
#include <fstream>
#include <random>

#include "test_support.hpp"
#include "texcov/error.hpp"
#include "texcov/spd.hpp"

using namespace texcov;
using namespace texcov::spd;
using texcov::testing::random_spd;
using texcov::testing::rel_diff;

TEST_CASE("sym_eig on small known matrices") {
  const auto id = sym_eig(Matrix::identity(3));
  for (double v : id.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));

  const auto diag = sym_eig(Matrix{{4, 0}, {0, 1}});
  CHECK(diag.values[0] == doctest::Approx(4.0));
  CHECK(diag.values[1] == doctest::Approx(1.0));
  CHECK(std::abs(diag.vectors(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(diag.vectors(1, 1)) == doctest::Approx(1.0));

  // Characteristic polynomial (2 - l)^2 - 1 = 0 gives l = 3, 1.
  const auto e = sym_eig(Matrix{{2, 1}, {1, 2}});
  CHECK(e.values[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(e.values[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("sym_eig reconstructs random symmetric matrices with orthonormal vectors") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  for (std::size_t d : {1, 2, 5, 12, 30}) {
    Matrix m(d, d);
    for (double& v : m.data()) v = normal(rng);
    m = symmetrized(m);
    const auto e = sym_eig(m);
    for (std::size_t k = 1; k < d; ++k) CHECK(e.values[k - 1] >= e.values[k]);
    const Matrix rec = e.vectors * Matrix::diagonal(e.values) * e.vectors.transposed();
    CHECK((rec - m).frobenius_norm() <= 1e-10 * m.frobenius_norm());
    const Matrix gram = e.vectors.transposed() * e.vectors;
    CHECK((gram - Matrix::identity(d)).frobenius_norm() <= 1e-10);
  }
}

TEST_CASE("sym_eig rejects non-symmetric input") {
  CHECK_THROWS_AS(sym_eig(Matrix{{1, 2}, {0, 1}}), ArgumentError);
}

TEST_CASE("matrix functions on diagonal inputs") {
  const double e = std::numbers::e;
  CHECK(spd_log(SpdMatrix::identity(3)).matrix().frobenius_norm() == doctest::Approx(0.0));

  const auto l = spd_log(SpdMatrix(Matrix{{e, 0}, {0, e * e}}));
  CHECK(l(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(l(1, 1) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(std::abs(l(0, 1)) < 1e-15);

  const auto is = spd_invsqrt(SpdMatrix(Matrix{{4, 0}, {0, 9}}));
  CHECK(is(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(is(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const auto s = spd_sqrt(SpdMatrix(Matrix{{4, 0}, {0, 9}}));
  CHECK(s(0, 0) == doctest::Approx(2.0));
  CHECK(s(1, 1) == doctest::Approx(3.0));
}

TEST_CASE("exp inverts log and sqrt squares back") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const auto c = random_spd(rng, 2 + t % 11, 1e6);
    CHECK(rel_diff(spd_exp(spd_log(c)).matrix(), c.matrix()) <= 1e-9);
    const auto r = spd_sqrt(c).matrix();
    CHECK(rel_diff(r * r, c.matrix()) <= 1e-10);
    const auto ri = spd_invsqrt(c).matrix();
    CHECK(rel_diff(ri * c.matrix() * ri, Matrix::identity(c.dim())) <= 1e-8);
  }
}

TEST_CASE("SpdMatrix positivity policy") {
  CHECK_THROWS_AS(SpdMatrix(Matrix{{1, 0}, {0, 0}}), NotPositiveDefiniteError);
  CHECK_THROWS_AS(SpdMatrix(Matrix{{1, 0}, {0, -1}}), NotPositiveDefiniteError);
  CHECK_THROWS_AS(SpdMatrix(Matrix{{1, 0.5}, {0.4, 1}}), ArgumentError);

  // Rank-deficient but PSD: shrunk by 1e-8 * trace / d.
  const SpdMatrix reg(Matrix{{2, 0}, {0, 0}}, Regularization::On);
  CHECK(reg(1, 1) == doctest::Approx(1e-8).epsilon(1e-12));
  CHECK(reg(0, 0) == doctest::Approx(2.0 + 1e-8));

  // A zero matrix has no scale; shrink toward 1e-8 * I.
  const SpdMatrix zero(Matrix(3, 3), Regularization::On);
  CHECK(zero(2, 2) == doctest::Approx(1e-8));

  // Clearly indefinite input is rejected.
  CHECK_THROWS_AS(SpdMatrix(Matrix{{1, 0}, {0, -0.5}}, Regularization::On), NotPositiveDefiniteError);
}

TEST_CASE("riemannian_distance basics") {
  std::mt19937_64 rng(3);
  const auto c = random_spd(rng, 4);
  CHECK(riemannian_distance(c, c) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(riemannian_distance(SpdMatrix::identity(2), SpdMatrix(std::numbers::e * Matrix::identity(2))) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  const auto a = random_spd(rng, 5), b = random_spd(rng, 5);
  CHECK(std::abs(riemannian_distance(a, b) - riemannian_distance(b, a)) <= 1e-9);
  CHECK_THROWS_AS(riemannian_distance(a, random_spd(rng, 3)), ArgumentError);
}

TEST_CASE("riemannian_distance is affine invariant and satisfies the triangle inequality") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 30; ++t) {
    const std::size_t d = 2 + t % 6;
    const auto a = random_spd(rng, d, 1e3), b = random_spd(rng, d, 1e3), c = random_spd(rng, d, 1e3);
    Matrix w(d, d);
    for (double& v : w.data()) v = normal(rng);
    const SpdMatrix wa(symmetrized(w * a.matrix() * w.transposed()));
    const SpdMatrix wb(symmetrized(w * b.matrix() * w.transposed()));
    const double dab = riemannian_distance(a, b);
    CHECK(std::abs(riemannian_distance(wa, wb) - dab) <= 1e-7 * std::max(1.0, dab));
    CHECK(riemannian_distance(a, c) <= dab + riemannian_distance(b, c) + 1e-9);
  }
}

TEST_CASE("riemannian_mean") {
  std::mt19937_64 rng(23);
  const auto a = random_spd(rng, 4, 50.0), b = random_spd(rng, 4, 50.0);

  SUBCASE("single element and duplicates") {
    const std::vector<SpdMatrix> one{a};
    CHECK(rel_diff(riemannian_mean(one).matrix(), a.matrix()) <= 1e-12);
    const std::vector<SpdMatrix> two{a, a};
    CHECK(rel_diff(riemannian_mean(two).matrix(), a.matrix()) <= 1e-12);
  }

  SUBCASE("two-point mean equals the geodesic midpoint") {
    // A^{1/2} (A^{-1/2} B A^{-1/2})^{1/2} A^{1/2}, evaluated independently.
    const Matrix ah = spd_sqrt(a).matrix(), aih = spd_invsqrt(a).matrix();
    const SpdMatrix inner(symmetrized(aih * b.matrix() * aih));
    const Matrix mid = symmetrized(ah * spd_sqrt(inner).matrix() * ah);
    const std::vector<SpdMatrix> pair{a, b};
    CHECK(rel_diff(riemannian_mean(pair).matrix(), mid) <= 1e-7);
  }

  SUBCASE("first-order condition at the returned mean") {
    std::vector<SpdMatrix> cs;
    for (int i = 0; i < 9; ++i) cs.push_back(random_spd(rng, 7, 100.0));
    const auto g = riemannian_mean(cs);
    CHECK(karcher_residual(cs, g) <= 1e-9);
  }

  SUBCASE("iteration cap surfaces as a convergence error") {
    std::vector<SpdMatrix> cs;
    for (int i = 0; i < 5; ++i) cs.push_back(random_spd(rng, 5, 1e4));
    CHECK_THROWS_AS(riemannian_mean(cs, {.tol = 1e-9, .max_iter = 1}), ConvergenceError);
  }

  SUBCASE("empty and mixed-dimension inputs") {
    CHECK_THROWS_AS(riemannian_mean(std::vector<SpdMatrix>{}), ArgumentError);
    const std::vector<SpdMatrix> mixed{a, random_spd(rng, 3)};
    CHECK_THROWS_AS(riemannian_mean(mixed), ArgumentError);
  }
}

TEST_CASE("logeuclidean_kernel values and conventions") {
  const double e = std::numbers::e;
  const auto id = KernelRef::identity(2);
  // log gives diag(1,0) and diag(0,1): orthogonal.
  CHECK(logeuclidean_kernel(SpdMatrix(Matrix{{e, 0}, {0, 1}}), SpdMatrix(Matrix{{1, 0}, {0, e}}), id) ==
        doctest::Approx(0.0));

  std::mt19937_64 rng(31);
  const auto c = random_spd(rng, 2);
  CHECK(logeuclidean_kernel(c, c, id) == doctest::Approx(1.0).epsilon(1e-14));

  // With G = I the kernel is the normalized Frobenius product of matrix logs.
  const auto a = random_spd(rng, 3), b = random_spd(rng, 3);
  const auto la = spd_log(a).matrix(), lb = spd_log(b).matrix();
  const double expected = frobenius_inner(la, lb) / (la.frobenius_norm() * lb.frobenius_norm());
  CHECK(logeuclidean_kernel(a, b, KernelRef::identity(3)) == doctest::Approx(expected).epsilon(1e-12));

  // C == G maps to the zero tangent vector.
  const KernelRef at_a(RefMode::RiemannianMean, a);
  CHECK(logeuclidean_kernel(a, a, at_a) == 1.0);
  CHECK(logeuclidean_kernel(a, b, at_a) == 0.0);

  CHECK_THROWS_AS(logeuclidean_kernel(a, b, KernelRef::identity(2)), ArgumentError);
}

TEST_CASE("gram_matrix structure") {
  std::mt19937_64 rng(41);
  const auto c = random_spd(rng, 3);
  const std::vector<SpdMatrix> one{c};
  CHECK(gram_matrix(one, KernelRef::identity(3))(0, 0) == doctest::Approx(1.0));

  std::vector<SpdMatrix> cs;
  for (int i = 0; i < 5; ++i) cs.push_back(random_spd(rng, 3));
  cs.push_back(cs[1]);
  const auto ref = KernelRef::riemannian_mean(cs);
  const Matrix k = gram_matrix(cs, ref);
  for (std::size_t j = 0; j < cs.size(); ++j) CHECK(k(1, j) == k(5, j));
  CHECK(asymmetry(k) == 0.0);
  CHECK(sym_eig(k).values.back() >= -1e-8);
  const Matrix cross = cross_gram(cs, cs, ref);
  CHECK((cross - k).frobenius_norm() <= 1e-14);
}

TEST_CASE("matrix file round trip is exact") {
  std::mt19937_64 rng(43);
  const auto c = random_spd(rng, 7);
  texcov::testing::TempDir dir("spd");
  write_spd(dir.path() / "c.spd", c);
  CHECK(read_spd(dir.path() / "c.spd") == c);
  std::ifstream in(dir.path() / "c.spd");
  std::string first;
  std::getline(in, first);
  CHECK(first == "spd 7");
}

TEST_CASE("ref mode parsing") {
  CHECK(parse_ref_mode("identity") == RefMode::Identity);
  CHECK(parse_ref_mode("riemannian-mean") == RefMode::RiemannianMean);
  CHECK_THROWS_AS(parse_ref_mode("stein"), ConfigError);
}
