// Brute-force linear-programming reference: enumerate every basic solution of
//   max c'x  s.t.  Ax <= b, x >= 0
// in slack form [A I] z = b, z >= 0, and keep the best feasible vertex. The
// feasible region is pointed (x >= 0), so feasibility of the LP is equivalent
// to existence of a feasible basic solution, and when the optimum is bounded
// it is attained at one. Only practical for tiny m, n.
#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

namespace oracle {

struct VertexBest {
  bool feasible = false;
  double objective = -std::numeric_limits<double>::infinity();
};

inline VertexBest best_vertex(int m, int n, const std::vector<double>& a,
                              const std::vector<double>& b,
                              const std::vector<double>& c,
                              double tol = 1e-9) {
  int total = n + m;
  Eigen::MatrixXd full(m, total);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) full(i, j) = a[static_cast<std::size_t>(i) * n + j];
    for (int k = 0; k < m; ++k) full(i, n + k) = i == k ? 1.0 : 0.0;
  }
  Eigen::VectorXd rhs(m);
  for (int i = 0; i < m; ++i) rhs(i) = b[i];

  VertexBest best;
  std::vector<int> comb(m);
  for (int i = 0; i < m; ++i) comb[i] = i;
  while (true) {
    Eigen::MatrixXd basis(m, m);
    for (int k = 0; k < m; ++k) basis.col(k) = full.col(comb[k]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(basis);
    if (lu.isInvertible()) {
      Eigen::VectorXd z = lu.solve(rhs);
      bool ok = true;
      for (int k = 0; k < m; ++k)
        if (z(k) < -tol) { ok = false; break; }
      if (ok) {
        double obj = 0.0;
        for (int k = 0; k < m; ++k)
          if (comb[k] < n) obj += c[comb[k]] * z(k);
        best.feasible = true;
        if (obj > best.objective) best.objective = obj;
      }
    }
    // next m-combination of {0..total-1}
    int i = m - 1;
    while (i >= 0 && comb[i] == total - m + i) --i;
    if (i < 0) break;
    ++comb[i];
    for (int k = i + 1; k < m; ++k) comb[k] = comb[k - 1] + 1;
  }
  return best;
}

}  // namespace oracle
