#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "anomdet/plan_store.hpp"

namespace anomdet {

struct EmptySamplesError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateSamplesError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IneligibleVariableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Empirical CDF over a fixed sample, kept as the sorted sample itself.
class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::vector<double> samples);  // throws EmptySamples

  int n() const { return static_cast<int>(sorted_.size()); }
  double min() const { return sorted_.front(); }
  double max() const { return sorted_.back(); }
  const std::vector<double>& sorted_samples() const { return sorted_; }

  // F(x) = (count of samples <= x) / n.
  double cdf(double x) const;
  // Right-tail mass (count of samples >= x) / n, the mirror of cdf(). Both
  // tails count the boundary point inclusively, so an in-sample extreme never
  // has zero mass on its own side.
  double tail_ge(double x) const;

  // Distance from x to the nearest sample.
  double nearest_distance(double x) const;

 private:
  std::vector<double> sorted_;
};

enum class Skew { Right, Left };

// Sign of the adjusted Fisher-Pearson sample skewness; exactly zero counts as
// Right. Throws DegenerateSamplesError for n < 2 or a constant sample.
Skew skew_direction(const std::vector<double>& samples);

struct EcodConfig {
  double c = 10.0;     // out-of-support score multiplier
  int k = 5;           // minimum sample count per variable
  double p = 0.05;     // minimum presence ratio per variable
  int top_n = 5000;    // cap on in-support findings per case
};

struct EcodVariableModel {
  EmpiricalCdf cdf;
  Skew skew = Skew::Right;
  bool eligible = false;
  double train_std = 0.0;  // sample standard deviation (n-1 denominator)
  int n_train = 0;
  int n_plans = 0;  // history size the presence ratio was taken against
};

// Fits one variable's model. Eligibility requires n >= cfg.k, presence ratio
// n / n_plans >= cfg.p, and a non-constant sample; ineligible variables keep
// their data but are never scored.
EcodVariableModel fit_variable_model(std::vector<double> samples, int n_plans,
                                     const EcodConfig& cfg);

// Tail surprise in bits. Right skew scores the lower tail, -log2(F(x));
// left skew scores the upper tail, -log2(tail_ge(x)). Returns nullopt when
// the relevant tail count is zero, i.e. x lies strictly outside the training
// support on the skew-relevant side. Throws IneligibleVariableError.
std::optional<double> ecod_score(const EcodVariableModel& m, double x);

enum class FindingKind { AA, A };
const char* finding_kind_name(FindingKind k);

struct ScoredValue {
  double score = 0.0;
  FindingKind kind = FindingKind::A;
};

// Total scoring rule: in-support values get the tail score (kind A);
// out-of-support values get cfg.c * nearest-sample distance, normalized by
// the training standard deviation (kind AA). AA scores are strictly positive
// and unbounded, so a far-out value always outranks every in-support one.
ScoredValue ecod_prime_score(const EcodVariableModel& m, double x,
                             const EcodConfig& cfg);

struct UnivariateFinding {
  VariableKey variable;
  double observed = 0.0;
  double score = 0.0;
  FindingKind kind = FindingKind::A;
  int n_train = 0;
  double historical_min = 0.0;
  double historical_max = 0.0;
};

// Per-variable models for a whole history, keyed in canonical order.
class EcodModelSet {
 public:
  EcodModelSet() = default;
  EcodModelSet(std::vector<VariableKey> keys,
               std::vector<EcodVariableModel> models);

  const EcodVariableModel* find(const VariableKey& key) const;
  const std::vector<VariableKey>& keys() const { return keys_; }
  const std::vector<EcodVariableModel>& models() const { return models_; }
  int eligible_count() const;

 private:
  std::vector<VariableKey> keys_;
  std::vector<EcodVariableModel> models_;
};

EcodModelSet fit_ecod_models(const HistoryMatrix& h, const EcodConfig& cfg);

// Scores every observation of the case that has an eligible model. Returns
// all AA findings plus the top cfg.top_n A findings, sorted by score
// descending with canonical-key tie-break.
std::vector<UnivariateFinding> detect_univariate(const EcodModelSet& models,
                                                 const PlanCase& c,
                                                 const EcodConfig& cfg);

// Convenience: fit-then-detect against a history.
std::vector<UnivariateFinding> detect_univariate(const HistoryMatrix& h,
                                                 const PlanCase& c,
                                                 const EcodConfig& cfg);

}  // namespace anomdet
