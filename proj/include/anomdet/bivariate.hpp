#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "anomdet/plan_store.hpp"

namespace anomdet {

struct PairModel;  // from pair_select.hpp

struct SingularCovarianceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownCutoffLevelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MvsConfig {
  int n_samples = 1500;                     // calibration draws per pair
  std::vector<double> levels = {0.01, 0.05};  // flagged-mass levels
};

// Plain 2x2 Gaussian, used for the joint-density side of pair scoring.
struct Gaussian2d {
  double mux = 0.0, muy = 0.0;
  double vxx = 1.0, vxy = 0.0, vyy = 1.0;

  double det() const { return vxx * vyy - vxy * vxy; }
  double density(double x, double y) const;  // throws SingularCovarianceError

  // Draws one point, consuming exactly one normal pair from the rng.
  std::pair<double, double> sample(class Rng& rng) const;
};

// Density thresholds by simulation: draw cfg.n_samples points from the
// model's own Gaussian, evaluate their densities, and cut at the empirical
// level-quantile -- so a fraction `level` of in-distribution points falls
// below the returned threshold. Keys of the result are exactly cfg.levels.
std::map<double, double> mvs_cutoff_density(const Gaussian2d& g,
                                            const MvsConfig& cfg,
                                            std::uint64_t seed);

// Likelihood of the observed y under the residual law of the fitted line;
// lower means more anomalous. For a pair flagged degenerate (zero residual
// variance) the density is not defined: any off-line point is treated as
// maximally anomalous (score 0) and an on-line point as unremarkable
// (score +inf).
double linreg_score(const PairModel& m, double x, double y);

// True when the centered residual exceeds the training band (strictly).
bool linreg_flag(const PairModel& m, double x, double y);

// Joint Gaussian density of (x, y) under the pair's fitted mean/covariance.
// Throws SingularCovarianceError when the pair carries no usable covariance.
double mvs_score(const PairModel& m, double x, double y);

// True when the joint density falls strictly below the pair's precomputed
// threshold for `level`. Level must be one of the calibrated levels. Pairs
// without a usable covariance never flag.
bool mvs_flag(const PairModel& m, double x, double y, double level);

// Region taxonomy over the two flags.
//   linreg  mvs    label
//   true    true   Significant      (off the line and jointly implausible)
//   true    false  Disproportionate (off the line, but inside the cloud)
//   false   true   SuezType         (on the line, but the line moved)
//   false   false  NonAnomalous
enum class RegionLabel { NonAnomalous, Significant, Disproportionate, SuezType };
RegionLabel classify(bool linreg_flagged, bool mvs_flagged);
const char* region_label_name(RegionLabel l);

struct BivariateFinding {
  VariableKey x_var, y_var;
  double x_value = 0.0, y_value = 0.0;
  double linreg_score = 0.0;
  double mvs_score = 0.0;
  bool linreg_flagged = false;
  bool mvs_flagged = false;
  RegionLabel label = RegionLabel::NonAnomalous;
};

// Evaluates every pair whose two variables are both observed in the case and
// returns the findings with label != NonAnomalous, most anomalous first
// (ascending mvs score, then ascending linreg score, then pair key).
std::vector<BivariateFinding> detect_bivariate(
    const std::vector<PairModel>& models, const PlanCase& c, double mvs_level);

}  // namespace anomdet
