#pragma once

#include <compare>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace anomdet {

// One planning value is addressed by (category, site, material, attribute).
// The nine categories partition a plan the way an LP-based planning matrix
// does: transactions, unit capacities, process limits, explicit bounds,
// movements, recipes, stock, and conservation rows.
enum class Category {
  Sales,
  Purchase,
  Capacity,
  Proclim,
  Bounds,
  Transfer,
  Blending,
  Inventory,
  MaterialBalance,
};

std::string_view category_name(Category c);
Category category_from_name(std::string_view s);  // throws BadKeyError

struct VariableKey {
  Category category = Category::Sales;
  std::string site;
  std::string material;
  std::string attribute;

  // Canonical form "Category:site:material:attribute". Components may not
  // contain ':' (enforced on ingest), so the form round-trips.
  std::string str() const;
  static VariableKey parse(std::string_view s);  // throws BadKeyError

  bool operator==(const VariableKey&) const = default;
  // Canonical order: component-wise by (category name, site, material,
  // attribute). Note this can differ from lexicographic order of str() when
  // one component is a strict prefix of another.
  bool operator<(const VariableKey& o) const;
};

// Characters that would break the canonical string form or the CSV layer.
// Site/material/attribute components must avoid them.
bool valid_key_component(std::string_view s);

struct Period {
  int year = 0;
  int month = 0;  // 1..12, or 0 for the "unknown" sentinel

  std::string str() const;  // "YYYY-MM"
  static Period parse(std::string_view s);  // throws BadPeriodError
  Period plus_months(int k) const;

  auto operator<=>(const Period&) const = default;
};

// One planning case: a single optimizer run's worth of values. A key that is
// absent simply was not part of this plan; absence is not the same as zero.
struct PlanCase {
  std::string case_id;
  Period period;
  std::map<VariableKey, double> observations;
};

// Column-sparse history: variables x cases, ordered canonically so that every
// downstream computation sees the same layout no matter how the data arrived.
// Immutable once built.
class HistoryMatrix {
 public:
  const std::vector<VariableKey>& variables() const { return variables_; }
  const std::vector<std::string>& case_ids() const { return case_ids_; }
  const std::vector<Period>& periods() const { return periods_; }
  int n_cases() const { return static_cast<int>(case_ids_.size()); }
  int n_variables() const { return static_cast<int>(variables_.size()); }

  std::optional<int> find_variable(const VariableKey& key) const;
  bool present(int var_idx, int case_idx) const;
  int present_count(int var_idx) const;
  long total_present() const;

  // Present values of one variable, in case order. Throws UnknownVariableError.
  std::vector<double> column_view(const VariableKey& key) const;
  std::vector<double> column_view(int var_idx) const;

  // (case_idx, value) pairs of one variable, ascending case_idx.
  const std::vector<std::pair<int, double>>& cells(int var_idx) const {
    return cells_[var_idx];
  }

  PlanCase case_at(int case_idx) const;

 private:
  friend HistoryMatrix history_from_cases(std::vector<PlanCase> cases);

  std::vector<VariableKey> variables_;
  std::vector<std::string> case_ids_;
  std::vector<Period> periods_;
  std::vector<std::vector<std::pair<int, double>>> cells_;
};

struct BadKeyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadPeriodError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownVariableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ingest errors carry file/row context in the message.
struct IngestError : std::runtime_error {
  enum class Kind { MissingFile, DuplicateObservation, BadNumeric, BadHeader, BadRow };
  Kind kind;
  IngestError(Kind k, const std::string& msg)
      : std::runtime_error(msg), kind(k) {}
};

// One delimited-text source. `path` may be a glob, resolved against the
// base directory passed to ingest_tables. If `category` is set the file needs
// no category column. `columns` optionally renames {case_id, period, category,
// site, material, attribute, value} to the actual header names in the file.
struct SourceSpec {
  std::string path;
  std::optional<Category> category;
  std::map<std::string, std::string> columns;
};

struct IngestConfig {
  std::vector<SourceSpec> sources;
};

// Reads every configured source under base_dir and assembles one history.
// The same (case, key) observed twice is an error, not a silent overwrite.
HistoryMatrix ingest_tables(const IngestConfig& cfg, const std::string& base_dir);

// Builds a history from in-memory cases (used by the generator and by tests).
// Duplicate case ids or duplicate keys inside a case are rejected.
HistoryMatrix history_from_cases(std::vector<PlanCase> cases);

// Writes the combined canonical table: header
// case_id,period,category,site,material,attribute,value; rows case-major,
// keys in canonical order. ingest of the written file reproduces the matrix.
void export_history(const HistoryMatrix& h, const std::string& path);

// Single-case file in the same combined format. All rows must share one
// case id.
PlanCase read_case_file(const std::string& path);
void write_case_file(const PlanCase& c, const std::string& path);

}  // namespace anomdet
