#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "anomdet/lp_core.hpp"
#include "anomdet/plan_store.hpp"

namespace anomdet {

struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InjectionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A perturbable scalar: each case draws base * (1 + U(-rel_noise, rel_noise)).
struct ParamDef {
  std::string name;
  double base = 0.0;
  double rel_noise = 0.0;  // in [0, 1)
};

// Objective/limit coefficients reference a parameter (optionally negated,
// e.g. "-p_crude" for a cost) or carry a fixed number.
struct CoefRef {
  double sign = 1.0;
  int param = -1;  // -1 means fixed
  double fixed = 0.0;

  bool is_param() const { return param >= 0; }
  double value(const std::vector<double>& drawn) const {
    return param >= 0 ? sign * drawn[param] : fixed;
  }
};

// One LP activity. Emits per case: the objective parameter under attribute
// "price" (when parameterized), the solved level under "activity", and the
// reduced cost under "dj".
struct ColumnDef {
  std::string name;
  Category category = Category::Sales;
  std::string site, material;
  CoefRef obj;
};

// One LP row (Ax <= b). Emits per case: the bound parameter under "max"
// (when parameterized) and the row dual under "marginal_value".
struct RowDef {
  std::string name;
  Category category = Category::Capacity;
  std::string site, material;
  CoefRef limit;
};

struct MatrixEntryDef {
  int row = 0, col = 0;
  double coef = 0.0;
};

// The whole generator input: a fixed LP structure whose prices and bounds
// wiggle case to case. Everything numeric lives here, not in code.
struct ScenarioConfig {
  std::vector<ParamDef> params;
  std::vector<ColumnDef> columns;
  std::vector<RowDef> rows;
  std::vector<MatrixEntryDef> matrix;
  int n_cases = 0;
  std::uint64_t seed = 0;
  Period start_period{2021, 1};
  int max_retries = 20;  // redraws allowed when a draw is not Optimal

  void validate() const;  // throws ScenarioError
};

ScenarioConfig scenario_from_json_text(const std::string& text);
ScenarioConfig read_scenario_file(const std::string& path);

// The LP for one drawn parameter vector.
LpProblem build_problem(const ScenarioConfig& cfg,
                        const std::vector<double>& drawn);

// Case `index` of the scenario: seed is derived from (cfg.seed, index), so
// any single case can be regenerated without generating the others. Indices
// at or beyond cfg.n_cases give fresh cases outside the history.
PlanCase generate_case(const ScenarioConfig& cfg, int index);

// Cases 0 .. n_cases-1 assembled into a history.
HistoryMatrix generate_history(const ScenarioConfig& cfg);

struct InjectionSpec {
  enum class Kind { ScaleValue, BreakLinearRelation, ShiftPairJointly, DropValue };
  Kind kind = Kind::ScaleValue;
  VariableKey target;        // ScaleValue / DropValue
  VariableKey x_var, y_var;  // the pair kinds
  double magnitude = 0.0;
};
const char* injection_kind_name(InjectionSpec::Kind k);

std::vector<InjectionSpec> injections_from_json_text(const std::string& text);
std::vector<InjectionSpec> read_injection_file(const std::string& path);

// What was done to a case, for scoring detectors afterwards.
struct GroundTruth {
  std::string case_id;
  InjectionSpec spec;
  std::string expected_detector;  // "univariate", "bivariate" or "none"
  std::map<std::string, double> details;  // old/new values, fit geometry
};

void write_ground_truth(const std::vector<GroundTruth>& gt,
                        const std::string& path);

// Applies one injection to a copy of `base`, using the history to aim the
// tampering: ScaleValue multiplies one observation; DropValue removes one;
// BreakLinearRelation moves y off the pair's historical line by
// `magnitude` residual deviations while holding x; ShiftPairJointly slides
// the point `magnitude` x-deviations along the line. Throws InjectionError
// when a target is absent from the case or the history cannot support the
// geometry.
std::pair<PlanCase, GroundTruth> inject(const HistoryMatrix& h, PlanCase base,
                                        const InjectionSpec& spec);

}  // namespace anomdet
