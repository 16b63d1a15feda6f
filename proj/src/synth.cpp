#include "anomdet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "anomdet/util.hpp"

using nlohmann::json;

namespace anomdet {

namespace {

constexpr char kAttrPrice[] = "price";
constexpr char kAttrMax[] = "max";
constexpr char kAttrActivity[] = "activity";
constexpr char kAttrDj[] = "dj";
constexpr char kAttrMarginal[] = "marginal_value";

VariableKey make_key(Category cat, const std::string& site,
                     const std::string& material, const char* attribute) {
  return VariableKey{cat, site, material, attribute};
}

int param_index(const ScenarioConfig& cfg, const std::string& name) {
  for (std::size_t i = 0; i < cfg.params.size(); ++i)
    if (cfg.params[i].name == name) return static_cast<int>(i);
  return -1;
}

CoefRef parse_coef(const ScenarioConfig& cfg, const json& v,
                   const std::string& where) {
  CoefRef ref;
  if (v.is_number()) {
    ref.fixed = v.get<double>();
    return ref;
  }
  if (!v.is_string())
    throw ScenarioError("coefficient at " + where +
                        " must be a number or a parameter name");
  std::string s = v.get<std::string>();
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    ref.sign = s[0] == '-' ? -1.0 : 1.0;
    s.erase(0, 1);
  }
  ref.param = param_index(cfg, s);
  if (ref.param < 0)
    throw ScenarioError("unknown parameter '" + s + "' at " + where);
  return ref;
}

json must(const json& j, const char* field, const std::string& where) {
  auto it = j.find(field);
  if (it == j.end())
    throw ScenarioError("missing field '" + std::string(field) + "' in " +
                        where);
  return *it;
}

VariableKey pair_key_from_json(const json& j, const char* field) {
  return VariableKey::parse(
      must(j, field, "injection").get<std::string>());
}

}  // namespace

void ScenarioConfig::validate() const {
  if (n_cases < 0) throw ScenarioError("n_cases must be >= 0");
  if (columns.empty()) throw ScenarioError("scenario has no columns");
  if (max_retries < 1) throw ScenarioError("max_retries must be >= 1");
  for (const auto& p : params) {
    if (p.name.empty()) throw ScenarioError("parameter with empty name");
    if (!(p.rel_noise >= 0.0) || p.rel_noise >= 1.0)
      throw ScenarioError("rel_noise of '" + p.name + "' outside [0, 1)");
  }
  for (const auto& e : matrix) {
    if (e.row < 0 || e.row >= static_cast<int>(rows.size()) ||
        e.col < 0 || e.col >= static_cast<int>(columns.size()))
      throw ScenarioError("matrix entry references a missing row or column");
  }
  // Every emitted key must be distinct; collisions would make a case
  // ill-defined.
  std::vector<VariableKey> keys;
  for (const auto& c : columns) {
    if (c.obj.is_param())
      keys.push_back(make_key(c.category, c.site, c.material, kAttrPrice));
    keys.push_back(make_key(c.category, c.site, c.material, kAttrActivity));
    keys.push_back(make_key(c.category, c.site, c.material, kAttrDj));
  }
  for (const auto& r : rows) {
    if (r.limit.is_param())
      keys.push_back(make_key(r.category, r.site, r.material, kAttrMax));
    keys.push_back(make_key(r.category, r.site, r.material, kAttrMarginal));
  }
  std::sort(keys.begin(), keys.end());
  auto dup = std::adjacent_find(keys.begin(), keys.end());
  if (dup != keys.end())
    throw ScenarioError("two scenario elements map to the same key: " +
                        dup->str());
}

ScenarioConfig scenario_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("scenario is not valid JSON: ") + e.what());
  }
  ScenarioConfig cfg;
  cfg.n_cases = must(j, "n_cases", "scenario").get<int>();
  cfg.seed = must(j, "seed", "scenario").get<std::uint64_t>();
  if (j.contains("start_period"))
    cfg.start_period = Period::parse(j["start_period"].get<std::string>());
  if (j.contains("max_retries")) cfg.max_retries = j["max_retries"].get<int>();

  for (const auto& pj : must(j, "params", "scenario")) {
    ParamDef p;
    p.name = must(pj, "name", "params").get<std::string>();
    p.base = must(pj, "base", "param '" + p.name + "'").get<double>();
    p.rel_noise =
        must(pj, "rel_noise", "param '" + p.name + "'").get<double>();
    cfg.params.push_back(std::move(p));
  }

  for (const auto& cj : must(j, "columns", "scenario")) {
    ColumnDef c;
    c.name = must(cj, "name", "columns").get<std::string>();
    std::string where = "column '" + c.name + "'";
    c.category =
        category_from_name(must(cj, "category", where).get<std::string>());
    c.site = must(cj, "site", where).get<std::string>();
    c.material = must(cj, "material", where).get<std::string>();
    c.obj = parse_coef(cfg, must(cj, "obj", where), where);
    cfg.columns.push_back(std::move(c));
  }

  for (const auto& rj : must(j, "rows", "scenario")) {
    RowDef r;
    r.name = must(rj, "name", "rows").get<std::string>();
    std::string where = "row '" + r.name + "'";
    r.category =
        category_from_name(must(rj, "category", where).get<std::string>());
    r.site = must(rj, "site", where).get<std::string>();
    r.material = must(rj, "material", where).get<std::string>();
    r.limit = parse_coef(cfg, must(rj, "limit", where), where);
    cfg.rows.push_back(std::move(r));
  }

  auto index_of = [](const auto& list, const std::string& name,
                     const char* what) {
    for (std::size_t i = 0; i < list.size(); ++i)
      if (list[i].name == name) return static_cast<int>(i);
    throw ScenarioError("matrix references unknown " + std::string(what) +
                        " '" + name + "'");
  };
  for (const auto& ej : must(j, "matrix", "scenario")) {
    MatrixEntryDef e;
    e.row = index_of(cfg.rows, must(ej, "row", "matrix").get<std::string>(),
                     "row");
    e.col = index_of(cfg.columns,
                     must(ej, "col", "matrix").get<std::string>(), "column");
    e.coef = must(ej, "coef", "matrix").get<double>();
    cfg.matrix.push_back(e);
  }

  cfg.validate();
  return cfg;
}

ScenarioConfig read_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return scenario_from_json_text(ss.str());
}

LpProblem build_problem(const ScenarioConfig& cfg,
                        const std::vector<double>& drawn) {
  LpProblem p;
  p.m = static_cast<int>(cfg.rows.size());
  p.n = static_cast<int>(cfg.columns.size());
  p.a.assign(static_cast<std::size_t>(p.m) * p.n, 0.0);
  p.b.resize(p.m);
  p.c.resize(p.n);
  for (int j = 0; j < p.n; ++j) p.c[j] = cfg.columns[j].obj.value(drawn);
  for (int i = 0; i < p.m; ++i) p.b[i] = cfg.rows[i].limit.value(drawn);
  for (const auto& e : cfg.matrix) p.at(e.row, e.col) += e.coef;
  return p;
}

PlanCase generate_case(const ScenarioConfig& cfg, int index) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(index)));

  std::vector<double> drawn(cfg.params.size());
  LpSolution sol;
  LpProblem p;
  int attempt = 0;
  for (;; ++attempt) {
    if (attempt >= cfg.max_retries)
      throw ScenarioError("case " + std::to_string(index) + " found no " +
                          "optimal draw in " + std::to_string(attempt) +
                          " attempts");
    for (std::size_t k = 0; k < cfg.params.size(); ++k) {
      const auto& pd = cfg.params[k];
      drawn[k] = pd.base * (1.0 + rng.uniform(-pd.rel_noise, pd.rel_noise));
    }
    p = build_problem(cfg, drawn);
    sol = solve(p);
    if (sol.status == LpStatus::Optimal) break;
  }

  // Published planning tables carry cleaned solver output: activities, duals
  // and reduced costs that are zero up to solver precision are written as
  // exact zeros, so numerical dust never masquerades as a tiny observation.
  {
    double tol = 1e-9 * (1.0 + std::abs(sol.objective));
    auto snap = [tol](std::vector<double>& v) {
      for (double& x : v)
        if (std::abs(x) <= tol) x = 0.0;
    };
    snap(sol.x);
    snap(sol.y);
    snap(sol.dj);
  }

  PlanCase c;
  {
    char buf[16];
    std::snprintf(buf, sizeof buf, "C%05d", index);
    c.case_id = buf;
  }
  c.period = cfg.start_period.plus_months(index);

  for (int j = 0; j < p.n; ++j) {
    const auto& col = cfg.columns[j];
    if (col.obj.is_param())
      c.observations.emplace(
          make_key(col.category, col.site, col.material, kAttrPrice),
          drawn[col.obj.param]);
    c.observations.emplace(
        make_key(col.category, col.site, col.material, kAttrActivity),
        sol.x[j]);
    c.observations.emplace(
        make_key(col.category, col.site, col.material, kAttrDj), sol.dj[j]);
  }
  for (int i = 0; i < p.m; ++i) {
    const auto& row = cfg.rows[i];
    if (row.limit.is_param())
      c.observations.emplace(
          make_key(row.category, row.site, row.material, kAttrMax),
          drawn[row.limit.param]);
    c.observations.emplace(
        make_key(row.category, row.site, row.material, kAttrMarginal),
        sol.y[i]);
  }
  c.observations.emplace(
      VariableKey{Category::Bounds, "ALL", "OBJECTIVE", "value"},
      sol.objective);
  return c;
}

HistoryMatrix generate_history(const ScenarioConfig& cfg) {
  cfg.validate();
  std::vector<PlanCase> cases(cfg.n_cases);
  parallel_for(static_cast<std::size_t>(cfg.n_cases),
               [&](std::size_t lo, std::size_t hi) {
                 for (std::size_t i = lo; i < hi; ++i)
                   cases[i] = generate_case(cfg, static_cast<int>(i));
               });
  return history_from_cases(std::move(cases));
}

const char* injection_kind_name(InjectionSpec::Kind k) {
  switch (k) {
    case InjectionSpec::Kind::ScaleValue: return "ScaleValue";
    case InjectionSpec::Kind::BreakLinearRelation: return "BreakLinearRelation";
    case InjectionSpec::Kind::ShiftPairJointly: return "ShiftPairJointly";
    case InjectionSpec::Kind::DropValue: return "DropValue";
  }
  return "?";
}

namespace {

InjectionSpec::Kind injection_kind_from_name(const std::string& s) {
  if (s == "ScaleValue") return InjectionSpec::Kind::ScaleValue;
  if (s == "BreakLinearRelation")
    return InjectionSpec::Kind::BreakLinearRelation;
  if (s == "ShiftPairJointly") return InjectionSpec::Kind::ShiftPairJointly;
  if (s == "DropValue") return InjectionSpec::Kind::DropValue;
  throw InjectionError("unknown injection kind '" + s + "'");
}

// Line fit over the strictly joint-present cases of a pair, as the injection
// geometry reference.
struct PairGeometry {
  int n = 0;
  double mx = 0, my = 0, sd_x = 0, sd_y = 0;
  double a = 0, b = 0, e_bar = 0, s_e = 0;
};

PairGeometry fit_geometry(const HistoryMatrix& h, const VariableKey& kx,
                          const VariableKey& ky) {
  auto ix = h.find_variable(kx);
  auto iy = h.find_variable(ky);
  if (!ix || !iy)
    throw InjectionError("pair variable not in history: '" +
                         (!ix ? kx : ky).str() + "'");
  std::vector<double> xs, ys;
  const auto& cx = h.cells(*ix);
  const auto& cy = h.cells(*iy);
  std::size_t i = 0, j = 0;
  while (i < cx.size() && j < cy.size()) {
    if (cx[i].first < cy[j].first) ++i;
    else if (cy[j].first < cx[i].first) ++j;
    else {
      xs.push_back(cx[i++].second);
      ys.push_back(cy[j++].second);
    }
  }
  PairGeometry g;
  g.n = static_cast<int>(xs.size());
  if (g.n < 2)
    throw InjectionError("pair has fewer than 2 joint cases in history");
  for (int k = 0; k < g.n; ++k) {
    g.mx += xs[k];
    g.my += ys[k];
  }
  g.mx /= g.n;
  g.my /= g.n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int k = 0; k < g.n; ++k) {
    sxx += (xs[k] - g.mx) * (xs[k] - g.mx);
    sxy += (xs[k] - g.mx) * (ys[k] - g.my);
    syy += (ys[k] - g.my) * (ys[k] - g.my);
  }
  if (sxx == 0.0)
    throw InjectionError("pair history is vertical (x never varies)");
  g.sd_x = std::sqrt(sxx / (g.n - 1));
  g.sd_y = std::sqrt(syy / (g.n - 1));
  g.a = sxy / sxx;
  g.b = g.my - g.a * g.mx;
  double rbar = 0;
  std::vector<double> res(g.n);
  for (int k = 0; k < g.n; ++k) {
    res[k] = ys[k] - (g.a * xs[k] + g.b);
    rbar += res[k];
  }
  rbar /= g.n;
  g.e_bar = rbar;
  double se2 = 0;
  for (int k = 0; k < g.n; ++k) se2 += (res[k] - rbar) * (res[k] - rbar);
  se2 /= (g.n - 1);
  double scale2 = std::max({syy / (g.n - 1), g.a * g.a * sxx / (g.n - 1),
                            g.b * g.b, 1e-300});
  // An exact relation has only rounding noise; fall back to a fraction of
  // the y spread so the offset is still a real departure.
  g.s_e = se2 > 1e-24 * scale2 ? std::sqrt(se2)
                               : (g.sd_y > 0 ? 0.01 * g.sd_y : 1.0);
  return g;
}

double observed_or_throw(const PlanCase& c, const VariableKey& k) {
  auto it = c.observations.find(k);
  if (it == c.observations.end())
    throw InjectionError("injection target '" + k.str() +
                         "' is absent from case " + c.case_id);
  return it->second;
}

}  // namespace

std::vector<InjectionSpec> injections_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InjectionError(std::string("injections are not valid JSON: ") +
                         e.what());
  }
  if (!j.is_array()) throw InjectionError("injection file must be an array");
  std::vector<InjectionSpec> out;
  for (const auto& ij : j) {
    InjectionSpec s;
    s.kind = injection_kind_from_name(
        must(ij, "kind", "injection").get<std::string>());
    switch (s.kind) {
      case InjectionSpec::Kind::ScaleValue:
        s.target = pair_key_from_json(ij, "target");
        s.magnitude = must(ij, "magnitude", "injection").get<double>();
        break;
      case InjectionSpec::Kind::DropValue:
        s.target = pair_key_from_json(ij, "target");
        break;
      case InjectionSpec::Kind::BreakLinearRelation:
      case InjectionSpec::Kind::ShiftPairJointly:
        s.x_var = pair_key_from_json(ij, "x");
        s.y_var = pair_key_from_json(ij, "y");
        s.magnitude = must(ij, "magnitude", "injection").get<double>();
        break;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<InjectionSpec> read_injection_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InjectionError("cannot open injection file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return injections_from_json_text(ss.str());
}

std::pair<PlanCase, GroundTruth> inject(const HistoryMatrix& h, PlanCase base,
                                        const InjectionSpec& spec) {
  GroundTruth gt;
  gt.case_id = base.case_id;
  gt.spec = spec;
  switch (spec.kind) {
    case InjectionSpec::Kind::ScaleValue: {
      double old = observed_or_throw(base, spec.target);
      double neu = old * spec.magnitude;
      base.observations[spec.target] = neu;
      gt.expected_detector = "univariate";
      gt.details = {{"old", old}, {"new", neu}};
      break;
    }
    case InjectionSpec::Kind::DropValue: {
      double old = observed_or_throw(base, spec.target);
      base.observations.erase(spec.target);
      gt.expected_detector = "none";
      gt.details = {{"old", old}};
      break;
    }
    case InjectionSpec::Kind::BreakLinearRelation: {
      double x = observed_or_throw(base, spec.x_var);
      double old_y = observed_or_throw(base, spec.y_var);
      PairGeometry g = fit_geometry(h, spec.x_var, spec.y_var);
      double neu = g.a * x + g.b + g.e_bar + spec.magnitude * g.s_e;
      base.observations[spec.y_var] = neu;
      gt.expected_detector = "bivariate";
      gt.details = {{"old_y", old_y}, {"new_y", neu},    {"a", g.a},
                    {"b", g.b},       {"offset_unit", g.s_e}};
      break;
    }
    case InjectionSpec::Kind::ShiftPairJointly: {
      observed_or_throw(base, spec.x_var);
      observed_or_throw(base, spec.y_var);
      PairGeometry g = fit_geometry(h, spec.x_var, spec.y_var);
      if (g.sd_x == 0.0)
        throw InjectionError("cannot shift along a line with zero x spread");
      double nx = g.mx + spec.magnitude * g.sd_x;
      double ny = g.a * nx + g.b + g.e_bar;
      base.observations[spec.x_var] = nx;
      base.observations[spec.y_var] = ny;
      gt.expected_detector = "bivariate";
      gt.details = {{"new_x", nx}, {"new_y", ny}, {"a", g.a}, {"b", g.b}};
      break;
    }
  }
  return {std::move(base), std::move(gt)};
}

void write_ground_truth(const std::vector<GroundTruth>& gt,
                        const std::string& path) {
  json arr = json::array();
  for (const auto& g : gt) {
    json e;
    e["case_id"] = g.case_id;
    e["kind"] = injection_kind_name(g.spec.kind);
    switch (g.spec.kind) {
      case InjectionSpec::Kind::ScaleValue:
      case InjectionSpec::Kind::DropValue:
        e["target"] = g.spec.target.str();
        break;
      default:
        e["x"] = g.spec.x_var.str();
        e["y"] = g.spec.y_var.str();
    }
    e["magnitude"] = g.spec.magnitude;
    e["expected_detector"] = g.expected_detector;
    for (const auto& [k, v] : g.details) e["details"][k] = v;
    arr.push_back(std::move(e));
  }
  std::ofstream out(path);
  if (!out) throw InjectionError("cannot write ground truth: " + path);
  out << arr.dump(2) << '\n';
  if (!out) throw InjectionError("write failed: " + path);
}

}  // namespace anomdet
