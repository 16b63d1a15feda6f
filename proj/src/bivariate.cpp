#include "anomdet/bivariate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "anomdet/pair_select.hpp"
#include "anomdet/util.hpp"

namespace anomdet {

double Gaussian2d::density(double x, double y) const {
  double d = det();
  if (!(d > 0.0))
    throw SingularCovarianceError("2d gaussian with non-positive determinant");
  double dx = x - mux, dy = y - muy;
  // Quadratic form with the closed-form 2x2 inverse.
  double q = (dx * (vyy * dx - vxy * dy) + dy * (vxx * dy - vxy * dx)) / d;
  return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(d));
}

std::pair<double, double> Gaussian2d::sample(Rng& rng) const {
  if (!(vxx > 0.0) || !(det() > 0.0))
    throw SingularCovarianceError("sampling a singular 2d gaussian");
  double l11 = std::sqrt(vxx);
  double l21 = vxy / l11;
  double l22 = std::sqrt(std::max(vyy - l21 * l21, 0.0));
  auto [z1, z2] = rng.normal_pair();
  return {mux + l11 * z1, muy + l21 * z1 + l22 * z2};
}

std::map<double, double> mvs_cutoff_density(const Gaussian2d& g,
                                            const MvsConfig& cfg,
                                            std::uint64_t seed) {
  if (cfg.n_samples < 100)
    throw std::invalid_argument("mvs calibration needs at least 100 samples");
  for (double level : cfg.levels)
    if (!(level > 0.0) || level > 1.0)
      throw std::invalid_argument("mvs level outside (0, 1]");

  Rng rng(seed);
  std::vector<double> dens(cfg.n_samples);
  for (int i = 0; i < cfg.n_samples; ++i) {
    auto [x, y] = g.sample(rng);
    dens[i] = g.density(x, y);
  }
  std::sort(dens.begin(), dens.end());

  std::map<double, double> out;
  for (double level : cfg.levels) {
    // Index such that `level` of the draws lie strictly below the cutoff
    // (up to ties). The small epsilon undoes binary rounding in level * n.
    auto k = static_cast<std::size_t>(
        std::floor(level * cfg.n_samples + 1e-9));
    k = std::min(k, dens.size() - 1);
    out[level] = dens[k];
  }
  return out;
}

double linreg_score(const PairModel& m, double x, double y) {
  double r = y - (m.a * x + m.b);
  double dev = std::abs(r - m.e_bar);
  if (m.degenerate) {
    // No residual law to score against: off the exact line is maximally
    // anomalous, on it is maximally unremarkable.
    return dev > m.linreg_band ? 0.0
                               : std::numeric_limits<double>::infinity();
  }
  return std::exp(-(dev * dev) / (2.0 * m.s_e2)) /
         std::sqrt(2.0 * std::numbers::pi * m.s_e2);
}

bool linreg_flag(const PairModel& m, double x, double y) {
  double r = y - (m.a * x + m.b);
  return std::abs(r - m.e_bar) > m.linreg_band;
}

double mvs_score(const PairModel& m, double x, double y) {
  if (!m.has_mvs)
    throw SingularCovarianceError("pair '" + m.x_var.str() + "' / '" +
                                  m.y_var.str() + "' has no usable covariance");
  return m.gauss.density(x, y);
}

bool mvs_flag(const PairModel& m, double x, double y, double level) {
  if (!m.has_mvs) return false;
  auto it = m.mvs_cutoffs.find(level);
  if (it == m.mvs_cutoffs.end())
    throw UnknownCutoffLevelError("no calibrated cutoff for level " +
                                  format_double(level));
  return mvs_score(m, x, y) < it->second;
}

RegionLabel classify(bool linreg_flagged, bool mvs_flagged) {
  if (linreg_flagged && mvs_flagged) return RegionLabel::Significant;
  if (linreg_flagged) return RegionLabel::Disproportionate;
  if (mvs_flagged) return RegionLabel::SuezType;
  return RegionLabel::NonAnomalous;
}

const char* region_label_name(RegionLabel l) {
  switch (l) {
    case RegionLabel::NonAnomalous: return "NonAnomalous";
    case RegionLabel::Significant: return "Significant";
    case RegionLabel::Disproportionate: return "Disproportionate";
    case RegionLabel::SuezType: return "SuezType";
  }
  return "?";
}

std::vector<BivariateFinding> detect_bivariate(
    const std::vector<PairModel>& models, const PlanCase& c,
    double mvs_level) {
  std::vector<BivariateFinding> out;
  for (const auto& m : models) {
    auto itx = c.observations.find(m.x_var);
    auto ity = c.observations.find(m.y_var);
    if (itx == c.observations.end() || ity == c.observations.end()) continue;
    double x = itx->second, y = ity->second;

    BivariateFinding f;
    f.x_var = m.x_var;
    f.y_var = m.y_var;
    f.x_value = x;
    f.y_value = y;
    f.linreg_score = linreg_score(m, x, y);
    f.linreg_flagged = linreg_flag(m, x, y);
    if (m.has_mvs) {
      f.mvs_score = mvs_score(m, x, y);
      f.mvs_flagged = mvs_flag(m, x, y, mvs_level);
    } else {
      f.mvs_score = std::numeric_limits<double>::infinity();
      f.mvs_flagged = false;
    }
    f.label = classify(f.linreg_flagged, f.mvs_flagged);
    if (f.label != RegionLabel::NonAnomalous) out.push_back(std::move(f));
  }
  std::sort(out.begin(), out.end(),
            [](const BivariateFinding& l, const BivariateFinding& r) {
              if (l.mvs_score != r.mvs_score) return l.mvs_score < r.mvs_score;
              if (l.linreg_score != r.linreg_score)
                return l.linreg_score < r.linreg_score;
              return std::make_pair(l.x_var, l.y_var) <
                     std::make_pair(r.x_var, r.y_var);
            });
  return out;
}

}  // namespace anomdet
