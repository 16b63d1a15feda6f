#include "anomdet/ecod.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace anomdet {

EmpiricalCdf::EmpiricalCdf(std::vector<double> samples)
    : sorted_(std::move(samples)) {
  if (sorted_.empty()) throw EmptySamplesError("empty sample");
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::cdf(double x) const {
  auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) / n();
}

double EmpiricalCdf::tail_ge(double x) const {
  auto it = std::lower_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(sorted_.end() - it) / n();
}

double EmpiricalCdf::nearest_distance(double x) const {
  auto it = std::lower_bound(sorted_.begin(), sorted_.end(), x);
  double best = std::numeric_limits<double>::infinity();
  if (it != sorted_.end()) best = std::min(best, *it - x);
  if (it != sorted_.begin()) best = std::min(best, x - *(it - 1));
  return best;
}

Skew skew_direction(const std::vector<double>& samples) {
  std::size_t n = samples.size();
  if (n < 2) throw DegenerateSamplesError("skew needs at least 2 samples");
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m3 = 0.0;
  for (double v : samples) {
    double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  if (m2 == 0.0) throw DegenerateSamplesError("skew of a constant sample");
  // The adjusted coefficient is sqrt(n(n-1))/(n-2) * m3/m2^1.5 scaled; the
  // adjustment factor is positive, so only the sign of m3 decides the
  // direction. Ties (m3 == 0) go Right.
  return m3 >= 0.0 ? Skew::Right : Skew::Left;
}

EcodVariableModel fit_variable_model(std::vector<double> samples, int n_plans,
                                     const EcodConfig& cfg) {
  EcodVariableModel m{EmpiricalCdf(std::move(samples))};
  m.n_train = m.cdf.n();
  m.n_plans = n_plans;

  const auto& s = m.cdf.sorted_samples();
  bool constant = s.front() == s.back();
  if (m.n_train >= 2 && !constant) {
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= m.n_train;
    double ss = 0.0;
    for (double v : s) ss += (v - mean) * (v - mean);
    m.train_std = std::sqrt(ss / (m.n_train - 1));
    m.skew = skew_direction(s);
  }

  double ratio = n_plans > 0
                     ? static_cast<double>(m.n_train) / n_plans
                     : 0.0;
  m.eligible = !constant && m.n_train >= cfg.k && ratio >= cfg.p;
  return m;
}

std::optional<double> ecod_score(const EcodVariableModel& m, double x) {
  if (!m.eligible)
    throw IneligibleVariableError("scoring an ineligible variable");
  double mass =
      m.skew == Skew::Right ? m.cdf.cdf(x) : m.cdf.tail_ge(x);
  if (mass == 0.0) return std::nullopt;
  return -std::log2(mass);
}

ScoredValue ecod_prime_score(const EcodVariableModel& m, double x,
                             const EcodConfig& cfg) {
  if (!m.eligible)
    throw IneligibleVariableError("scoring an ineligible variable");
  // Strictly outside the training support, on either side: distance-based
  // score in units of the training spread so different variables stay
  // comparable. Inside support the tail score is always defined, because the
  // skew-relevant tail count of an in-support value is at least 1.
  if (x < m.cdf.min() || x > m.cdf.max())
    return {cfg.c * m.cdf.nearest_distance(x) / m.train_std, FindingKind::AA};
  return {*ecod_score(m, x), FindingKind::A};
}

const char* finding_kind_name(FindingKind k) {
  return k == FindingKind::AA ? "AA" : "A";
}

EcodModelSet::EcodModelSet(std::vector<VariableKey> keys,
                           std::vector<EcodVariableModel> models)
    : keys_(std::move(keys)), models_(std::move(models)) {}

const EcodVariableModel* EcodModelSet::find(const VariableKey& key) const {
  auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
  if (it == keys_.end() || !(*it == key)) return nullptr;
  return &models_[it - keys_.begin()];
}

int EcodModelSet::eligible_count() const {
  int n = 0;
  for (const auto& m : models_) n += m.eligible ? 1 : 0;
  return n;
}

EcodModelSet fit_ecod_models(const HistoryMatrix& h, const EcodConfig& cfg) {
  int nv = h.n_variables();
  std::vector<EcodVariableModel> models;
  models.reserve(nv);
  for (int v = 0; v < nv; ++v)
    models.push_back(
        fit_variable_model(h.column_view(v), h.n_cases(), cfg));
  return EcodModelSet(h.variables(), std::move(models));
}

std::vector<UnivariateFinding> detect_univariate(const EcodModelSet& models,
                                                 const PlanCase& c,
                                                 const EcodConfig& cfg) {
  std::vector<UnivariateFinding> aa, a;
  for (const auto& [key, x] : c.observations) {
    const EcodVariableModel* m = models.find(key);
    if (!m || !m->eligible) continue;
    ScoredValue sv = ecod_prime_score(*m, x, cfg);
    UnivariateFinding f{key,       x,
                        sv.score,  sv.kind,
                        m->n_train, m->cdf.min(),
                        m->cdf.max()};
    (sv.kind == FindingKind::AA ? aa : a).push_back(std::move(f));
  }
  auto by_score = [](const UnivariateFinding& l, const UnivariateFinding& r) {
    if (l.score != r.score) return l.score > r.score;
    return l.variable < r.variable;
  };
  std::sort(a.begin(), a.end(), by_score);
  if (static_cast<int>(a.size()) > cfg.top_n) a.resize(cfg.top_n);
  aa.insert(aa.end(), a.begin(), a.end());
  std::sort(aa.begin(), aa.end(), by_score);
  return aa;
}

std::vector<UnivariateFinding> detect_univariate(const HistoryMatrix& h,
                                                 const PlanCase& c,
                                                 const EcodConfig& cfg) {
  return detect_univariate(fit_ecod_models(h, cfg), c, cfg);
}

}  // namespace anomdet
