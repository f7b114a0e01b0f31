#pragma once

// Exhaustive active-set solver for the C-SVM dual on tiny problems. Every
// assignment of samples to {alpha = 0, alpha = C, free} is tried; for the
// free set the equality-constrained stationarity system is solved directly
// and kept if the result is feasible. The dual is concave, so the best
// feasible stationary point is the global optimum.

#include <cmath>
#include <limits>
#include <vector>

#include "texcov/matrix.hpp"
#include "texcov/svm.hpp"

namespace texcov::testing {

struct QpSolution {
  std::vector<double> alpha;
  double objective = -std::numeric_limits<double>::infinity();
};

inline QpSolution exhaustive_svm_dual(const svm::KernelGram& g, double c) {
  const std::size_t n = g.n();
  const auto y = g.labels();
  QpSolution best;
  std::vector<int> state(n, 0);  // 0: at zero, 1: at C, 2: free
  std::size_t combos = 1;
  for (std::size_t i = 0; i < n; ++i) combos *= 3;
  for (std::size_t code = 0; code < combos; ++code) {
    std::size_t rest = code;
    std::vector<std::size_t> free;
    std::vector<double> alpha(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      state[i] = static_cast<int>(rest % 3);
      rest /= 3;
      if (state[i] == 1) alpha[i] = c;
      if (state[i] == 2) free.push_back(i);
    }
    double bound_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) bound_sum += alpha[i] * y[i];
    if (free.empty()) {
      if (std::abs(bound_sum) > 1e-12 * c) continue;
    } else {
      // [Q_FF  y_F] [a_F]   [1 - Q_FB a_B]
      // [y_F^T  0 ] [ nu] = [ -y_B^T a_B ]
      const std::size_t m = free.size();
      Matrix a(m + 1, m + 1);
      std::vector<double> rhs(m + 1, 0.0);
      for (std::size_t p = 0; p < m; ++p) {
        const std::size_t i = free[p];
        double r = 1.0;
        for (std::size_t j = 0; j < n; ++j)
          if (state[j] == 1) r -= y[i] * y[j] * g(i, j) * alpha[j];
        rhs[p] = r;
        for (std::size_t q = 0; q < m; ++q) a(p, q) = y[i] * y[free[q]] * g(i, free[q]);
        a(p, m) = y[i];
        a(m, p) = y[i];
      }
      rhs[m] = -bound_sum;
      if (!solve_linear(a, rhs)) continue;
      bool feasible = true;
      for (std::size_t p = 0; p < m; ++p) {
        if (rhs[p] < -1e-12 || rhs[p] > c + 1e-12) feasible = false;
        alpha[free[p]] = std::min(c, std::max(0.0, rhs[p]));
      }
      if (!feasible) continue;
    }
    const double obj = svm::dual_objective(g, alpha);
    if (obj > best.objective) best = {alpha, obj};
  }
  return best;
}

}  // namespace texcov::testing
