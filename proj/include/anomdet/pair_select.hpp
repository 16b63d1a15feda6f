#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "anomdet/bivariate.hpp"
#include "anomdet/plan_store.hpp"

namespace anomdet {

struct LengthMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownGroupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tie-corrected Kendall rank correlation (the tau-b variant), computed with
// the merge-sort inversion count, O(n log n). Sequences where either side is
// entirely tied have no defined rank correlation; `all_tied` is set and tau
// is reported as 0.
struct KendallResult {
  double tau = 0.0;
  bool all_tied = false;
};
KendallResult kendall_tau_full(std::span<const double> x,
                               std::span<const double> y);
double kendall_tau(std::span<const double> x, std::span<const double> y);

// One field pattern per component; empty means "*". A key matches when all
// four components match their globs.
struct KeyPattern {
  std::string category;   // glob over the category name
  std::string site;
  std::string material;
  std::string attribute;
  bool matches(const VariableKey& k) const;
};

struct GroupDef {
  std::string name;
  std::vector<KeyPattern> match;  // key is in the group if ANY pattern matches
};

// Pairing is restricted to explicitly allowed group products, which keeps the
// candidate set at the scale the correlation step can afford.
struct PairGroupConfig {
  std::vector<GroupDef> groups;
  std::vector<std::pair<std::string, std::string>> allow;
};

using KeyPair = std::pair<VariableKey, VariableKey>;

// All unordered pairs {u, v}, u < v canonically, with u and v in two groups
// whose product is allowed (either orientation). No self-pairs, no
// duplicates; output sorted. Throws UnknownGroupError for a name in `allow`
// that has no definition.
std::vector<KeyPair> candidate_pairs_from_groups(
    const std::vector<VariableKey>& variables, const PairGroupConfig& cfg);

// Kendall matrix over the variables referenced by the candidate pairs, with
// missing-data damping. Each variable's column is mean-imputed to full case
// length before the rank correlation; each entry is then scaled by
// sqrt(present_i / n) * sqrt(present_j / n), so a sparsely observed variable
// cannot fake a strong link through its imputed constants.
class PenalizedKendallMatrix {
 public:
  const std::vector<VariableKey>& variables() const { return variables_; }
  double at(int i, int j) const { return tau_[i * n_ + j]; }
  double penalty(int i) const { return penalties_[i]; }
  int index_of(const VariableKey& k) const;  // -1 when absent

 private:
  friend PenalizedKendallMatrix penalized_matrix(
      const HistoryMatrix& h, const std::vector<KeyPair>& pairs);

  int n_ = 0;
  std::vector<VariableKey> variables_;
  std::vector<double> tau_;        // dense symmetric, candidate entries only
  std::vector<double> penalties_;
};

PenalizedKendallMatrix penalized_matrix(const HistoryMatrix& h,
                                        const std::vector<KeyPair>& pairs);

struct CandidatePair {
  VariableKey x_var, y_var;  // x_var < y_var canonically
  double weight = 0.0;       // |penalized tau|
};

// Maximum-weight spanning forest (Kruskal over the candidate edges, not the
// complete graph). Deterministic: edges are taken in (weight desc, pair asc)
// order, so ties always resolve the same way.
std::vector<CandidatePair> max_weight_spanning_tree(
    const PenalizedKendallMatrix& m, const std::vector<KeyPair>& pairs);

// Low-level forest used by the wrapper above and directly by tests.
struct WeightedEdge {
  int u = 0, v = 0;
  double w = 0.0;
};
std::vector<WeightedEdge> spanning_forest(int n_nodes,
                                          std::vector<WeightedEdge> edges);

// Keeps pairs with weight >= k (boundary inclusive).
std::vector<CandidatePair> threshold_filter(std::vector<CandidatePair> pairs,
                                            double k);

// Everything detection needs about one selected pair.
struct PairModel {
  VariableKey x_var, y_var;
  double weight = 0.0;   // selection weight, for provenance
  int n_joint = 0;       // strictly joint-present fit cases

  // Line fit y ~ a*x + b over the joint-present cases.
  double a = 0.0, b = 0.0;
  double e_bar = 0.0;    // mean residual
  double s_e2 = 0.0;     // residual variance (n-1 denominator)
  double r2 = 0.0;       // squared Pearson correlation
  bool degenerate = false;  // zero residual variance (exact line)
  double linreg_band = 0.0;  // 99th percentile of |residual - e_bar|

  // Joint Gaussian of (x, y): sample mean and covariance (regularized when
  // nearly singular, so the stored covariance is the one detection uses).
  Gaussian2d gauss;
  bool has_mvs = false;  // false when the covariance stayed singular
  std::map<double, double> mvs_cutoffs;  // level -> density threshold
  std::uint64_t mvs_seed = 0;
};

struct PairFitConfig {
  int min_joint = 5;  // minimum joint-present cases to fit a pair
};

// Why a surviving pair still produced no model.
struct PairFitSkip {
  KeyPair pair;
  enum class Reason { InsufficientJointSamples, SingularFit } reason;
};

struct PairFitResult {
  std::vector<PairModel> models;
  std::vector<PairFitSkip> skipped;
};

// Fits the per-pair models over strictly joint-present cases (imputation is
// for selection only, never for fitting). Each pair's density calibration
// runs on its own seed derived from `master_seed` and the pair name, so a
// model does not change when unrelated pairs come or go.
PairFitResult fit_pair_models(const HistoryMatrix& h,
                              const std::vector<CandidatePair>& pairs,
                              const PairFitConfig& fit_cfg,
                              const MvsConfig& mvs_cfg,
                              std::uint64_t master_seed);

}  // namespace anomdet
