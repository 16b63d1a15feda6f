#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace anomdet {

struct LpError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Canonical form: maximize c'x subject to Ax <= b, x >= 0. Dense, row-major,
// sized for validation work (hundreds of rows/columns, not millions).
struct LpProblem {
  int m = 0, n = 0;
  std::vector<double> a;  // m*n, row-major
  std::vector<double> b;  // m
  std::vector<double> c;  // n

  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
  double at(int i, int j) const {
    return a[static_cast<std::size_t>(i) * n + j];
  }
  void validate() const;  // throws LpError on malformed dimensions
};

enum class LpStatus { Optimal, Infeasible, Unbounded };
const char* lp_status_name(LpStatus s);

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> x;   // n, primal activities
  std::vector<double> y;   // m, row marginals (duals of Ax <= b)
  std::vector<double> dj;  // n, column reduced costs c_j - y'A_j
  std::vector<int> basis;  // m basic indices: j < n structural, n+i slack i
  bool primal_degenerate = false;  // a basic variable sits at zero
  bool dual_degenerate = false;    // a nonbasic column has zero reduced cost
  int iterations = 0;
};

// Two-phase primal simplex with Bland's anticycling rule. The returned basis
// is refactorized against the original data, so x, y and dj satisfy the
// optimality identities to rounding accuracy rather than to accumulated
// tableau drift.
LpSolution solve(const LpProblem& p);

// Forward-difference row marginal (obj(b_i + h) - obj(b)) / h via re-solve.
// Throws LpError if either solve is not optimal.
double marginal_row_value(const LpProblem& p, int row, double h);

// Worth of one unit of a material: what it costs to obtain minus what having
// it is worth at the margin.
inline double incremental_value(double total_unit_cost, double marginal) {
  return total_unit_cost - marginal;
}

// Price at which activity j would break even: c_j - D_j. Solves internally.
double break_even_value(const LpProblem& p, int col);

// Plain-text problem file: comment lines (#...), then "m n", then the n
// objective coefficients, then m rows of n matrix coefficients followed by
// the bound.
LpProblem read_problem_file(const std::string& path);
void write_problem_file(const LpProblem& p, const std::string& path);

}  // namespace anomdet
