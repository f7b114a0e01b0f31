#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "qp_oracle.hpp"
#include "test_support.hpp"
#include "texcov/error.hpp"
#include "texcov/svm.hpp"

using namespace texcov;
using namespace texcov::svm;

namespace {

struct Problem {
  Matrix k;
  std::vector<int> y;
};

// Gaussian-kernel Gram of random 2D points with a class-dependent shift;
// strictly PD for distinct points.
Problem random_problem(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> normal;
  std::vector<std::array<double, 2>> x(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = (i % 2 == 0) ? 1 : -1;
    x[i] = {normal(rng) + 0.8 * y[i], normal(rng)};
  }
  std::shuffle(y.begin(), y.end(), rng);
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = x[i][0] - x[j][0], dy = x[i][1] - x[j][1];
      k(i, j) = std::exp(-0.5 * (dx * dx + dy * dy));
    }
  return {k, y};
}

std::vector<double> train_decisions(const TrainedSvm& m, const Matrix& k) {
  std::vector<double> f(k.rows());
  for (std::size_t i = 0; i < k.rows(); ++i) f[i] = svm_decision(m, k.row(i));
  return f;
}

std::vector<double> alphas(const TrainedSvm& m) {
  std::vector<double> a(m.n());
  for (std::size_t i = 0; i < m.n(); ++i) a[i] = m.alpha(i);
  return a;
}

void check_kkt(const KernelGram& g, const TrainedSvm& m, double tol) {
  const auto f = train_decisions(m, g.k());
  for (std::size_t i = 0; i < g.n(); ++i) {
    const double a = m.alpha(i), margin = g.labels()[i] * f[i];
    if (a <= 0.0) CHECK(margin >= 1.0 - tol);
    else if (a >= m.c) CHECK(margin <= 1.0 + tol);
    else CHECK(std::abs(margin - 1.0) <= tol);
  }
}

void check_feasible(const KernelGram& g, const TrainedSvm& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.n(); ++i) {
    CHECK(m.alpha(i) >= 0.0);
    CHECK(m.alpha(i) <= m.c);
    s += m.dual_coef[i];
  }
  CHECK(std::abs(s) <= 1e-8 * m.c);
}

}  // namespace

TEST_CASE("two-point hand-solved model") {
  const KernelGram g(Matrix::identity(2), {1, -1});
  const auto m = svm_train(g, 1e6);
  CHECK(m.alpha(0) == doctest::Approx(1.0));
  CHECK(m.alpha(1) == doctest::Approx(1.0));
  CHECK(m.bias == doctest::Approx(0.0).epsilon(1e-12));
  const std::vector<double> r0{1.0, 0.0}, r1{0.0, 1.0};
  CHECK(svm_decision(m, r0) == doctest::Approx(1.0));
  CHECK(svm_decision(m, r1) == doctest::Approx(-1.0));
  CHECK(svm_predict(m, r0) == 1);
  CHECK(svm_predict(m, r1) == -1);
  CHECK(m.support_idx == std::vector<std::size_t>{0, 1});
}

TEST_CASE("exact zero decision predicts +1") {
  TrainedSvm m;
  m.dual_coef = {1.0, -1.0};
  m.bias = 0.0;
  const std::vector<double> tie{0.5, 0.5};
  CHECK(svm_decision(m, tie) == 0.0);
  CHECK(svm_predict(m, tie) == 1);
}

TEST_CASE("duplicated dataset gives the same decision function") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 5; ++t) {
    const auto p = random_problem(rng, 6);
    Matrix k2(12, 12);
    std::vector<int> y2(12);
    for (std::size_t i = 0; i < 12; ++i) {
      y2[i] = p.y[i % 6];
      for (std::size_t j = 0; j < 12; ++j) k2(i, j) = p.k(i % 6, j % 6);
    }
    const double c = 5.0;
    const auto m1 = svm_train(KernelGram(p.k, p.y), c, {.tol = 1e-9});
    // Each duplicate pair shares the original box, so the doubled problem
    // needs C/2 per copy to describe the same function.
    const auto m2 = svm_train(KernelGram(k2, y2), c / 2.0, {.tol = 1e-9});
    for (std::size_t i = 0; i < 6; ++i)
      CHECK(svm_decision(m1, p.k.row(i)) == doctest::Approx(svm_decision(m2, k2.row(i))).epsilon(1e-6));
  }
}

TEST_CASE("hard-margin duplicated dataset keeps the decision function") {
  std::mt19937_64 rng(32);
  const auto p = random_problem(rng, 5);
  Matrix k2(10, 10);
  std::vector<int> y2(10);
  for (std::size_t i = 0; i < 10; ++i) {
    y2[i] = p.y[i % 5];
    for (std::size_t j = 0; j < 10; ++j) k2(i, j) = p.k(i % 5, j % 5);
  }
  const auto m1 = svm_train(KernelGram(p.k, p.y), 1e6, {.tol = 1e-9});
  const auto m2 = svm_train(KernelGram(k2, y2), 1e6, {.tol = 1e-9});
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(std::abs(svm_decision(m1, p.k.row(i)) - svm_decision(m2, k2.row(i))) <= 1e-6);
}

TEST_CASE("flipping labels flips every decision value") {
  std::mt19937_64 rng(33);
  for (int t = 0; t < 5; ++t) {
    const auto p = random_problem(rng, 8);
    auto flipped = p.y;
    for (int& v : flipped) v = -v;
    const auto a = svm_train(KernelGram(p.k, p.y), 2.0, {.tol = 1e-9});
    const auto b = svm_train(KernelGram(p.k, flipped), 2.0, {.tol = 1e-9});
    for (std::size_t i = 0; i < 8; ++i)
      CHECK(svm_decision(a, p.k.row(i)) == doctest::Approx(-svm_decision(b, p.k.row(i))).epsilon(1e-6));
  }
}

TEST_CASE("SMO matches the exhaustive QP oracle and satisfies KKT") {
  std::mt19937_64 rng(34);
  const double cs[] = {0.1, 1.0, 10.0, 1000.0};
  double worst = 0.0;
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(t) % 7;
    const auto p = random_problem(rng, n);
    if (std::count(p.y.begin(), p.y.end(), 1) == 0 || std::count(p.y.begin(), p.y.end(), -1) == 0) continue;
    const KernelGram g(p.k, p.y);
    const double c = cs[t % 4];
    const auto m = svm_train(g, c);
    const auto tight = svm_train(g, c, {.tol = 1e-9});
    const auto oracle = texcov::testing::exhaustive_svm_dual(g, c);
    CHECK(std::abs(dual_objective(g, alphas(tight)) - oracle.objective) <= 1e-6);
    // A 1e-3 KKT gap bounds the objective error only loosely.
    worst = std::max(worst, std::abs(dual_objective(g, alphas(m)) - oracle.objective));
    CHECK(dual_objective(g, alphas(m)) <= oracle.objective + 1e-9);
    check_kkt(g, m, 1e-3);
    check_kkt(g, tight, 1e-3);
    check_feasible(g, m);
    check_feasible(g, tight);
  }
  MESSAGE("worst dual objective gap at tol 1e-3: " << worst);
  CHECK(worst <= 1e-4);
}

TEST_CASE("permuting the samples leaves decisions unchanged") {
  std::mt19937_64 rng(35);
  for (int t = 0; t < 5; ++t) {
    const std::size_t n = 10;
    const auto p = random_problem(rng, n);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const KernelGram g(p.k, p.y);
    const auto gp = g.subset(perm);
    const auto a = svm_train(g, 3.0, {.tol = 1e-10});
    const auto b = svm_train(gp, 3.0, {.tol = 1e-10});
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::abs(svm_decision(a, p.k.row(perm[i])) - svm_decision(b, gp.k().row(i))) < 1e-6);
  }
}

TEST_CASE("KernelGram and training errors") {
  CHECK_NOTHROW(KernelGram(Matrix::identity(2), {1, -1}));
  CHECK_THROWS_AS(KernelGram(Matrix::identity(3), {1, -1}), ArgumentError);
  CHECK_THROWS_AS(KernelGram(Matrix::identity(2), {1, 0}), ArgumentError);
  CHECK_THROWS_AS(KernelGram(Matrix{{1, 0.5}, {0.4, 1}}, {1, -1}), ArgumentError);
  CHECK_THROWS_AS(KernelGram(Matrix{{1, 2}, {2, 1}}, {1, -1}), NumericError);
  CHECK_THROWS_AS(svm_train(KernelGram(Matrix::identity(2), {1, 1}), 1.0), ArgumentError);
  const KernelGram g(Matrix::identity(2), {1, -1});
  CHECK_THROWS_AS(svm_train(g, 0.0), ArgumentError);
  CHECK_THROWS_AS(svm_train(g, -1.0), ArgumentError);
  CHECK_THROWS_AS(svm_train(KernelGram(Matrix::identity(3), {1, 1, 1}), 1.0), ArgumentError);
  const auto m = svm_train(g, 1.0);
  const std::vector<double> short_row{1.0};
  CHECK_THROWS_AS(svm_decision(m, short_row), ArgumentError);
}

TEST_CASE("model files round-trip") {
  std::mt19937_64 rng(36);
  const auto p = random_problem(rng, 8);
  const auto m = svm_train(KernelGram(p.k, p.y), 7.5, {}, "logeuclidean:identity");
  texcov::testing::TempDir dir("svm");
  save_model(dir.path() / "model.txt", m);
  const auto back = load_model(dir.path() / "model.txt");
  CHECK(back.dual_coef == m.dual_coef);
  CHECK(back.bias == m.bias);
  CHECK(back.c == m.c);
  CHECK(back.kernel_spec == m.kernel_spec);
  CHECK(back.support_idx == m.support_idx);
  CHECK_THROWS_AS(load_model(dir.path() / "nope.txt"), IoError);
}
