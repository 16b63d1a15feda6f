#include "anomdet/lp_core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "anomdet/util.hpp"

namespace anomdet {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kDegenTol = 1e-7;

// Dense LU with partial pivoting; solves in place. Returns false when the
// matrix is numerically singular.
class DenseLu {
 public:
  bool factor(int n, std::vector<double> a) {
    n_ = n;
    a_ = std::move(a);
    perm_.resize(n);
    for (int i = 0; i < n; ++i) perm_[i] = i;
    for (int k = 0; k < n; ++k) {
      int piv = k;
      double best = std::abs(a_[idx(k, k)]);
      for (int i = k + 1; i < n; ++i) {
        double v = std::abs(a_[idx(i, k)]);
        if (v > best) {
          best = v;
          piv = i;
        }
      }
      if (best < 1e-12) return false;
      if (piv != k) {
        for (int j = 0; j < n; ++j) std::swap(a_[idx(piv, j)], a_[idx(k, j)]);
        std::swap(perm_[piv], perm_[k]);
      }
      for (int i = k + 1; i < n; ++i) {
        double f = a_[idx(i, k)] / a_[idx(k, k)];
        a_[idx(i, k)] = f;
        for (int j = k + 1; j < n; ++j) a_[idx(i, j)] -= f * a_[idx(k, j)];
      }
    }
    return true;
  }

  std::vector<double> solve(const std::vector<double>& rhs) const {
    std::vector<double> x(n_);
    for (int i = 0; i < n_; ++i) x[i] = rhs[perm_[i]];
    for (int i = 1; i < n_; ++i)
      for (int j = 0; j < i; ++j) x[i] -= a_[idx(i, j)] * x[j];
    for (int i = n_ - 1; i >= 0; --i) {
      for (int j = i + 1; j < n_; ++j) x[i] -= a_[idx(i, j)] * x[j];
      x[i] /= a_[idx(i, i)];
    }
    return x;
  }

 private:
  std::size_t idx(int i, int j) const {
    return static_cast<std::size_t>(i) * n_ + j;
  }
  int n_ = 0;
  std::vector<double> a_;
  std::vector<int> perm_;
};

// Full-tableau simplex working state. Columns: n structural, m slack, then
// any phase-1 artificials. Rows whose bound is negative are negated up front
// so the right-hand side starts nonnegative.
struct Tableau {
  int m, n, ncols;
  int n_art = 0;
  std::vector<double> t;     // m rows * (ncols + 1); last column is the rhs
  std::vector<double> drow;  // reduced costs, ncols entries + objective
  double dobj = 0.0;
  std::vector<int> basic;    // per row
  std::vector<char> banned;  // per column: excluded from entering

  double& at(int i, int j) { return t[static_cast<std::size_t>(i) * (ncols + 1) + j]; }
  double& rhs(int i) { return at(i, ncols); }

  void pivot(int pr, int pc) {
    double pv = at(pr, pc);
    for (int j = 0; j <= ncols; ++j) at(pr, j) /= pv;
    for (int i = 0; i < m; ++i) {
      if (i == pr) continue;
      double f = at(i, pc);
      if (f == 0.0) continue;
      for (int j = 0; j <= ncols; ++j) at(i, j) -= f * at(pr, j);
      at(i, pc) = 0.0;
    }
    double fd = drow[pc];
    if (fd != 0.0) {
      for (int j = 0; j < ncols; ++j) drow[j] -= fd * at(pr, j);
      dobj += fd * rhs(pr);
      drow[pc] = 0.0;
    }
    basic[pr] = pc;
  }

  // Rebuilds the reduced-cost row for the given column costs.
  void reset_costs(const std::vector<double>& cost) {
    drow.assign(cost.begin(), cost.end());
    dobj = 0.0;
    for (int i = 0; i < m; ++i) {
      double cb = cost[basic[i]];
      if (cb == 0.0) continue;
      for (int j = 0; j < ncols; ++j) drow[j] -= cb * at(i, j);
      dobj += cb * rhs(i);
    }
  }

  // Bland's rule: entering column is the lowest-index improving one, leaving
  // row breaks ratio ties on the lowest basic index. Returns the iteration
  // count, or -1 on unboundedness.
  int run(int max_iter) {
    int iters = 0;
    while (iters < max_iter) {
      int enter = -1;
      for (int j = 0; j < ncols; ++j) {
        if (banned[j]) continue;
        if (drow[j] > kPivotTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return iters;  // optimal
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        double aij = at(i, enter);
        if (aij > kPivotTol) {
          double ratio = rhs(i) > 0.0 ? rhs(i) / aij : 0.0;
          if (ratio < best - 1e-12 ||
              (ratio < best + 1e-12 &&
               (leave < 0 || basic[i] < basic[leave]))) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return -1;  // unbounded direction
      pivot(leave, enter);
      ++iters;
    }
    throw LpError("simplex iteration limit hit");
  }
};

}  // namespace

void LpProblem::validate() const {
  if (m < 0 || n <= 0) throw LpError("lp: bad dimensions");
  if (a.size() != static_cast<std::size_t>(m) * n ||
      b.size() != static_cast<std::size_t>(m) ||
      c.size() != static_cast<std::size_t>(n))
    throw LpError("lp: matrix/vector sizes disagree with dimensions");
  for (double v : a)
    if (!std::isfinite(v)) throw LpError("lp: non-finite matrix entry");
  for (double v : b)
    if (!std::isfinite(v)) throw LpError("lp: non-finite bound");
  for (double v : c)
    if (!std::isfinite(v)) throw LpError("lp: non-finite objective entry");
}

const char* lp_status_name(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
  }
  return "?";
}

LpSolution solve(const LpProblem& p) {
  p.validate();
  const int m = p.m, n = p.n;

  // Which rows need an artificial (negative bound after the slack).
  std::vector<char> negated(m, 0);
  int n_art = 0;
  for (int i = 0; i < m; ++i)
    if (p.b[i] < 0.0) {
      negated[i] = 1;
      ++n_art;
    }

  Tableau tb;
  tb.m = m;
  tb.n = n;
  tb.n_art = n_art;
  tb.ncols = n + m + n_art;
  tb.t.assign(static_cast<std::size_t>(m) * (tb.ncols + 1), 0.0);
  tb.basic.assign(m, -1);
  tb.banned.assign(tb.ncols, 0);

  int art = 0;
  for (int i = 0; i < m; ++i) {
    double sign = negated[i] ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) tb.at(i, j) = sign * p.at(i, j);
    tb.at(i, n + i) = sign;  // slack
    tb.rhs(i) = sign * p.b[i];
    if (negated[i]) {
      int acol = n + m + art++;
      tb.at(i, acol) = 1.0;
      tb.basic[i] = acol;
    } else {
      tb.basic[i] = n + i;
    }
  }

  const int max_iter = 50000 + 200 * (m + n) * (m + n);
  int total_iters = 0;

  if (n_art > 0) {
    std::vector<double> cost1(tb.ncols, 0.0);
    for (int j = n + m; j < tb.ncols; ++j) cost1[j] = -1.0;
    tb.reset_costs(cost1);
    int it = tb.run(max_iter);
    if (it < 0) throw LpError("phase 1 reported an unbounded direction");
    total_iters += it;
    double scale = 1.0;
    for (int i = 0; i < m; ++i) scale = std::max(scale, std::abs(p.b[i]));
    if (tb.dobj < -1e-9 * scale) {
      LpSolution s;
      s.status = LpStatus::Infeasible;
      return s;
    }
    // Drive artificials out of the basis where possible; where a row has no
    // real column left, the artificial stays basic at level zero and simply
    // marks a redundant constraint.
    for (int i = 0; i < m; ++i) {
      if (tb.basic[i] < n + m) continue;
      for (int j = 0; j < n + m; ++j) {
        if (std::abs(tb.at(i, j)) > kPivotTol) {
          tb.pivot(i, j);
          break;
        }
      }
    }
    for (int j = n + m; j < tb.ncols; ++j) tb.banned[j] = 1;
  }

  std::vector<double> cost2(tb.ncols, 0.0);
  for (int j = 0; j < n; ++j) cost2[j] = p.c[j];
  tb.reset_costs(cost2);
  int it = tb.run(max_iter);
  if (it < 0) {
    LpSolution s;
    s.status = LpStatus::Unbounded;
    return s;
  }
  total_iters += it;

  // Refactorize the final basis against the original data. A leftover
  // artificial on row i acts as the unit column e_i with zero cost, which
  // pins its dual to zero.
  LpSolution s;
  s.status = LpStatus::Optimal;
  s.iterations = total_iters;
  s.basis = tb.basic;
  std::vector<double> bmat(static_cast<std::size_t>(m) * m, 0.0);
  std::vector<double> cb(m, 0.0);
  for (int k = 0; k < m; ++k) {
    int col = tb.basic[k];
    if (col < n) {
      for (int i = 0; i < m; ++i) bmat[static_cast<std::size_t>(i) * m + k] = p.at(i, col);
      cb[k] = p.c[col];
    } else if (col < n + m) {
      bmat[static_cast<std::size_t>(col - n) * m + k] = 1.0;
    } else {
      // leftover artificial: unit column on its own row
      int row = -1;
      for (int i = 0; i < m; ++i)
        if (tb.basic[i] == col) row = i;
      bmat[static_cast<std::size_t>(row) * m + k] = 1.0;
    }
  }
  DenseLu lu;
  if (!lu.factor(m, bmat)) throw LpError("final basis is singular");
  std::vector<double> xb = lu.solve(p.b);
  // Transpose solve for the duals.
  std::vector<double> bt(static_cast<std::size_t>(m) * m, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      bt[static_cast<std::size_t>(i) * m + j] = bmat[static_cast<std::size_t>(j) * m + i];
  DenseLu lut;
  if (!lut.factor(m, std::move(bt))) throw LpError("final basis is singular");
  s.y = lut.solve(cb);

  s.x.assign(n, 0.0);
  for (int k = 0; k < m; ++k)
    if (tb.basic[k] < n) s.x[tb.basic[k]] = xb[k];
  s.objective = 0.0;
  for (int j = 0; j < n; ++j) s.objective += p.c[j] * s.x[j];

  s.dj.assign(n, 0.0);
  for (int j = 0; j < n; ++j) {
    double z = 0.0;
    for (int i = 0; i < m; ++i) z += s.y[i] * p.at(i, j);
    s.dj[j] = p.c[j] - z;
  }

  double bscale = 1.0;
  for (int i = 0; i < m; ++i) bscale = std::max(bscale, std::abs(p.b[i]));
  double cscale = 1.0;
  for (int j = 0; j < n; ++j) cscale = std::max(cscale, std::abs(p.c[j]));
  std::vector<char> is_basic(n + m, 0);
  for (int k = 0; k < m; ++k) {
    if (tb.basic[k] < n + m) is_basic[tb.basic[k]] = 1;
    if (std::abs(xb[k]) < kDegenTol * bscale) s.primal_degenerate = true;
  }
  for (int j = 0; j < n; ++j)
    if (!is_basic[j] && std::abs(s.dj[j]) < kDegenTol * cscale)
      s.dual_degenerate = true;
  for (int i = 0; i < m; ++i)
    if (!is_basic[n + i] && std::abs(s.y[i]) < kDegenTol * cscale)
      s.dual_degenerate = true;
  return s;
}

double marginal_row_value(const LpProblem& p, int row, double h) {
  if (row < 0 || row >= p.m) throw LpError("marginal: row out of range");
  if (h == 0.0) throw LpError("marginal: zero step");
  LpSolution base = solve(p);
  if (base.status != LpStatus::Optimal)
    throw LpError(std::string("marginal: base problem is ") +
                  lp_status_name(base.status));
  LpProblem q = p;
  q.b[row] += h;
  LpSolution moved = solve(q);
  if (moved.status != LpStatus::Optimal)
    throw LpError(std::string("marginal: shifted problem is ") +
                  lp_status_name(moved.status));
  return (moved.objective - base.objective) / h;
}

double break_even_value(const LpProblem& p, int col) {
  if (col < 0 || col >= p.n) throw LpError("break-even: column out of range");
  LpSolution s = solve(p);
  if (s.status != LpStatus::Optimal)
    throw LpError(std::string("break-even: problem is ") +
                  lp_status_name(s.status));
  return p.c[col] - s.dj[col];
}

LpProblem read_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LpError("cannot open problem file: " + path);
  std::vector<double> nums;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    double v;
    while (ls >> v) nums.push_back(v);
    if (!ls.eof()) throw LpError("bad token in problem file: " + path);
  }
  if (nums.size() < 2) throw LpError("truncated problem file: " + path);
  LpProblem p;
  p.m = static_cast<int>(nums[0]);
  p.n = static_cast<int>(nums[1]);
  if (p.m < 0 || p.n <= 0 || nums[0] != p.m || nums[1] != p.n)
    throw LpError("bad dimensions in problem file: " + path);
  std::size_t want = 2 + static_cast<std::size_t>(p.n) +
                     static_cast<std::size_t>(p.m) * (p.n + 1);
  if (nums.size() != want)
    throw LpError("problem file has " + std::to_string(nums.size()) +
                  " numbers, expected " + std::to_string(want) + ": " + path);
  std::size_t k = 2;
  p.c.assign(nums.begin() + k, nums.begin() + k + p.n);
  k += p.n;
  p.a.resize(static_cast<std::size_t>(p.m) * p.n);
  p.b.resize(p.m);
  for (int i = 0; i < p.m; ++i) {
    for (int j = 0; j < p.n; ++j) p.at(i, j) = nums[k++];
    p.b[i] = nums[k++];
  }
  p.validate();
  return p;
}

void write_problem_file(const LpProblem& p, const std::string& path) {
  p.validate();
  std::ofstream out(path);
  if (!out) throw LpError("cannot write problem file: " + path);
  out << "# max c'x  s.t. Ax <= b, x >= 0\n";
  out << p.m << ' ' << p.n << '\n';
  for (int j = 0; j < p.n; ++j)
    out << format_double(p.c[j]) << (j + 1 == p.n ? '\n' : ' ');
  for (int i = 0; i < p.m; ++i) {
    for (int j = 0; j < p.n; ++j) out << format_double(p.at(i, j)) << ' ';
    out << format_double(p.b[i]) << '\n';
  }
  if (!out) throw LpError("write failed: " + path);
}

}  // namespace anomdet
