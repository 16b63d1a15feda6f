#include "anomdet/pair_select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>

#include "anomdet/util.hpp"

namespace anomdet {

namespace {

// Counts strict inversions (i < j with a[i] > a[j]) while merge-sorting.
long long merge_count(std::vector<double>& a, std::vector<double>& buf) {
  long long inv = 0;
  std::size_t n = a.size();
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo + width < n; lo += 2 * width) {
      std::size_t mid = lo + width;
      std::size_t hi = std::min(lo + 2 * width, n);
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (a[i] <= a[j]) {
          buf[k++] = a[i++];
        } else {
          inv += static_cast<long long>(mid - i);
          buf[k++] = a[j++];
        }
      }
      while (i < mid) buf[k++] = a[i++];
      while (j < hi) buf[k++] = a[j++];
      std::copy(buf.begin() + lo, buf.begin() + hi, a.begin() + lo);
    }
  }
  return inv;
}

long long tie_pair_count(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  long long total = 0;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    long long t = static_cast<long long>(j - i);
    total += t * (t - 1) / 2;
    i = j;
  }
  return total;
}

}  // namespace

KendallResult kendall_tau_full(std::span<const double> x,
                               std::span<const double> y) {
  if (x.size() != y.size())
    throw LengthMismatchError("kendall: length mismatch");
  std::size_t n = x.size();
  if (n < 2) throw LengthMismatchError("kendall: need at least 2 points");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return y[a] < y[b];
  });

  long long n0 = static_cast<long long>(n) * (static_cast<long long>(n) - 1) / 2;

  // Tie pair counts: within x, within y, and joint.
  long long n1 = 0, n3 = 0;
  {
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j < n && x[order[j]] == x[order[i]]) ++j;
      long long t = static_cast<long long>(j - i);
      n1 += t * (t - 1) / 2;
      // joint ties are runs of equal y inside this x-run (sorted by y already)
      std::size_t k = i;
      while (k < j) {
        std::size_t l = k;
        while (l < j && y[order[l]] == y[order[k]]) ++l;
        long long tt = static_cast<long long>(l - k);
        n3 += tt * (tt - 1) / 2;
        k = l;
      }
      i = j;
    }
  }
  long long n2 = tie_pair_count(std::vector<double>(y.begin(), y.end()));

  if (n1 == n0 || n2 == n0) return {0.0, true};

  // With rows sorted by (x asc, y asc), an inversion in the y sequence is
  // exactly a strictly discordant pair: x-ties contribute none (their y runs
  // ascend) and y-ties are not strict inversions.
  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  long long disc = merge_count(ys, buf);

  long long num = n0 - n1 - n2 + n3 - 2 * disc;  // concordant - discordant
  double den = std::sqrt(static_cast<double>(n0 - n1)) *
               std::sqrt(static_cast<double>(n0 - n2));
  return {static_cast<double>(num) / den, false};
}

double kendall_tau(std::span<const double> x, std::span<const double> y) {
  return kendall_tau_full(x, y).tau;
}

bool KeyPattern::matches(const VariableKey& k) const {
  auto m = [](const std::string& pat, std::string_view text) {
    return pat.empty() || glob_match(pat, text);
  };
  return m(category, category_name(k.category)) && m(site, k.site) &&
         m(material, k.material) && m(attribute, k.attribute);
}

std::vector<KeyPair> candidate_pairs_from_groups(
    const std::vector<VariableKey>& variables, const PairGroupConfig& cfg) {
  auto group_index = [&cfg](const std::string& name) {
    for (std::size_t i = 0; i < cfg.groups.size(); ++i)
      if (cfg.groups[i].name == name) return i;
    throw UnknownGroupError("unknown pairing group '" + name + "'");
  };

  // Membership lists per group, in variable order.
  std::vector<std::vector<std::size_t>> members(cfg.groups.size());
  for (std::size_t v = 0; v < variables.size(); ++v)
    for (std::size_t g = 0; g < cfg.groups.size(); ++g)
      for (const auto& pat : cfg.groups[g].match)
        if (pat.matches(variables[v])) {
          members[g].push_back(v);
          break;
        }

  std::set<std::pair<std::size_t, std::size_t>> picked;
  for (const auto& [ga, gb] : cfg.allow) {
    std::size_t ia = group_index(ga), ib = group_index(gb);
    for (std::size_t u : members[ia])
      for (std::size_t v : members[ib]) {
        if (u == v) continue;
        picked.emplace(std::min(u, v), std::max(u, v));
      }
  }

  std::vector<KeyPair> out;
  out.reserve(picked.size());
  for (const auto& [u, v] : picked)
    out.emplace_back(variables[u], variables[v]);
  // `variables` need not arrive sorted, so sort pairs canonically ourselves.
  for (auto& pr : out)
    if (pr.second < pr.first) std::swap(pr.first, pr.second);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int PenalizedKendallMatrix::index_of(const VariableKey& k) const {
  auto it = std::lower_bound(variables_.begin(), variables_.end(), k);
  if (it == variables_.end() || !(*it == k)) return -1;
  return static_cast<int>(it - variables_.begin());
}

PenalizedKendallMatrix penalized_matrix(const HistoryMatrix& h,
                                        const std::vector<KeyPair>& pairs) {
  PenalizedKendallMatrix m;
  {
    std::vector<VariableKey> vars;
    vars.reserve(pairs.size() * 2);
    for (const auto& [a, b] : pairs) {
      vars.push_back(a);
      vars.push_back(b);
    }
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
    m.variables_ = std::move(vars);
  }
  m.n_ = static_cast<int>(m.variables_.size());
  m.tau_.assign(static_cast<std::size_t>(m.n_) * m.n_, 0.0);
  m.penalties_.assign(m.n_, 0.0);

  int n_cases = h.n_cases();
  std::vector<std::vector<double>> imputed(m.n_);
  for (int i = 0; i < m.n_; ++i) {
    auto idx = h.find_variable(m.variables_[i]);
    if (!idx)
      throw UnknownVariableError("pair variable not in history: '" +
                                 m.variables_[i].str() + "'");
    const auto& cells = h.cells(*idx);
    double mean = 0.0;
    for (const auto& [cs, v] : cells) mean += v;
    mean = cells.empty() ? 0.0 : mean / static_cast<double>(cells.size());
    std::vector<double> col(n_cases, mean);
    for (const auto& [cs, v] : cells) col[cs] = v;
    imputed[i] = std::move(col);
    m.penalties_[i] =
        n_cases > 0 ? std::sqrt(static_cast<double>(cells.size()) / n_cases)
                    : 0.0;
    m.tau_[static_cast<std::size_t>(i) * m.n_ + i] = 1.0;
  }

  // The correlation sweep is the expensive step at production scale; entries
  // are independent, so compute them in parallel into preassigned slots.
  std::vector<std::pair<int, int>> ij(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p)
    ij[p] = {m.index_of(pairs[p].first), m.index_of(pairs[p].second)};
  std::vector<double> entry(pairs.size(), 0.0);
  parallel_for(pairs.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      auto [i, j] = ij[p];
      double tau = n_cases >= 2 ? kendall_tau(imputed[i], imputed[j]) : 0.0;
      entry[p] = tau * m.penalties_[i] * m.penalties_[j];
    }
  });
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    auto [i, j] = ij[p];
    m.tau_[static_cast<std::size_t>(i) * m.n_ + j] = entry[p];
    m.tau_[static_cast<std::size_t>(j) * m.n_ + i] = entry[p];
  }
  return m;
}

namespace {

struct Dsu {
  std::vector<int> parent, size;
  explicit Dsu(int n) : parent(n), size(n, 1) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size[a] < size[b]) std::swap(a, b);
    parent[b] = a;
    size[a] += size[b];
    return true;
  }
};

}  // namespace

std::vector<WeightedEdge> spanning_forest(int n_nodes,
                                          std::vector<WeightedEdge> edges) {
  // Kruskal, maximizing. Ties break on the lexicographically smaller edge so
  // the forest is the same on every run and platform.
  std::sort(edges.begin(), edges.end(),
            [](const WeightedEdge& a, const WeightedEdge& b) {
              if (a.w != b.w) return a.w > b.w;
              if (a.u != b.u) return a.u < b.u;
              return a.v < b.v;
            });
  Dsu dsu(n_nodes);
  std::vector<WeightedEdge> out;
  for (const auto& e : edges)
    if (dsu.unite(e.u, e.v)) out.push_back(e);
  return out;
}

std::vector<CandidatePair> max_weight_spanning_tree(
    const PenalizedKendallMatrix& m, const std::vector<KeyPair>& pairs) {
  std::vector<WeightedEdge> edges;
  edges.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    int i = m.index_of(a), j = m.index_of(b);
    if (i < 0 || j < 0)
      throw UnknownVariableError("pair not present in the kendall matrix");
    edges.push_back({std::min(i, j), std::max(i, j), std::abs(m.at(i, j))});
  }
  auto forest = spanning_forest(static_cast<int>(m.variables().size()),
                                std::move(edges));
  std::vector<CandidatePair> out;
  out.reserve(forest.size());
  for (const auto& e : forest)
    out.push_back({m.variables()[e.u], m.variables()[e.v], e.w});
  std::sort(out.begin(), out.end(), [](const CandidatePair& a,
                                       const CandidatePair& b) {
    return std::make_pair(a.x_var, a.y_var) < std::make_pair(b.x_var, b.y_var);
  });
  return out;
}

std::vector<CandidatePair> threshold_filter(std::vector<CandidatePair> pairs,
                                            double k) {
  std::erase_if(pairs, [k](const CandidatePair& p) { return p.weight < k; });
  return pairs;
}

namespace {

struct FitOutcome {
  std::optional<PairModel> model;
  std::optional<PairFitSkip> skip;
};

FitOutcome fit_one_pair(const HistoryMatrix& h, const CandidatePair& cp,
                        const PairFitConfig& fit_cfg, const MvsConfig& mvs_cfg,
                        std::uint64_t master_seed) {
  auto ix = h.find_variable(cp.x_var);
  auto iy = h.find_variable(cp.y_var);
  if (!ix || !iy)
    throw UnknownVariableError("pair variable not in history: '" +
                               (!ix ? cp.x_var : cp.y_var).str() + "'");

  // Strictly joint-present cases; imputed values never enter the fit.
  std::vector<double> xs, ys;
  {
    const auto& cx = h.cells(*ix);
    const auto& cy = h.cells(*iy);
    std::size_t i = 0, j = 0;
    while (i < cx.size() && j < cy.size()) {
      if (cx[i].first < cy[j].first) {
        ++i;
      } else if (cy[j].first < cx[i].first) {
        ++j;
      } else {
        xs.push_back(cx[i].second);
        ys.push_back(cy[j].second);
        ++i;
        ++j;
      }
    }
  }

  int n = static_cast<int>(xs.size());
  int need = std::max(2, fit_cfg.min_joint);
  if (n < need)
    return {std::nullopt,
            PairFitSkip{{cp.x_var, cp.y_var},
                        PairFitSkip::Reason::InsufficientJointSamples}};

  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0)
    return {std::nullopt,
            PairFitSkip{{cp.x_var, cp.y_var}, PairFitSkip::Reason::SingularFit}};

  PairModel m;
  m.x_var = cp.x_var;
  m.y_var = cp.y_var;
  m.weight = cp.weight;
  m.n_joint = n;
  m.a = sxy / sxx;
  m.b = my - m.a * mx;

  std::vector<double> res(n);
  double rbar = 0.0;
  for (int i = 0; i < n; ++i) {
    res[i] = ys[i] - (m.a * xs[i] + m.b);
    rbar += res[i];
  }
  rbar /= n;
  m.e_bar = rbar;
  double se2 = 0.0;
  for (int i = 0; i < n; ++i) se2 += (res[i] - rbar) * (res[i] - rbar);
  se2 /= (n - 1);

  // An exact linear relation leaves only rounding noise in the residuals.
  // Compare against the data's own scale to decide whether the pair is a
  // genuine zero-variance line.
  double scale2 = std::max({syy / (n - 1), m.a * m.a * sxx / (n - 1),
                            m.b * m.b, 1e-300});
  m.degenerate = se2 <= 1e-24 * scale2;

  std::vector<double> devs(n);
  for (int i = 0; i < n; ++i) devs[i] = std::abs(res[i] - rbar);
  std::sort(devs.begin(), devs.end());
  if (m.degenerate) {
    m.s_e2 = 0.0;
    m.r2 = 1.0;
    // Rounding allowance: replaying points of the exact relation must not
    // flag, while any real departure still does.
    double yscale = std::sqrt(syy / (n - 1) + my * my) + std::abs(m.b);
    m.linreg_band = devs.back() * 8.0 + 1e-12 * yscale;
  } else {
    m.s_e2 = se2;
    m.r2 = (sxy * sxy) / (sxx * syy);
    int rank = static_cast<int>(std::ceil(0.99 * n));  // 1-based nearest rank
    m.linreg_band = devs[std::min(rank, n) - 1];
  }

  m.gauss.mux = mx;
  m.gauss.muy = my;
  m.gauss.vxx = sxx / (n - 1);
  m.gauss.vxy = sxy / (n - 1);
  m.gauss.vyy = syy / (n - 1);
  double tr = m.gauss.vxx + m.gauss.vyy;
  if (m.gauss.det() < 1e-12 * tr * tr) {
    double lam = 1e-9 * tr;
    m.gauss.vxx += lam;
    m.gauss.vyy += lam;
  }
  m.has_mvs = tr > 0.0 && m.gauss.det() > 0.0;
  m.mvs_seed = mix_seed(master_seed,
                        fnv1a64(cp.y_var.str(),
                                fnv1a64(cp.x_var.str() + "\x1f")));
  if (m.has_mvs) m.mvs_cutoffs = mvs_cutoff_density(m.gauss, mvs_cfg, m.mvs_seed);
  return {std::move(m), std::nullopt};
}

}  // namespace

PairFitResult fit_pair_models(const HistoryMatrix& h,
                              const std::vector<CandidatePair>& pairs,
                              const PairFitConfig& fit_cfg,
                              const MvsConfig& mvs_cfg,
                              std::uint64_t master_seed) {
  std::vector<FitOutcome> outcomes(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p)
      outcomes[p] = fit_one_pair(h, pairs[p], fit_cfg, mvs_cfg, master_seed);
  });
  PairFitResult out;
  for (auto& o : outcomes) {
    if (o.model) out.models.push_back(std::move(*o.model));
    if (o.skip) out.skipped.push_back(std::move(*o.skip));
  }
  return out;
}

}  // namespace anomdet
