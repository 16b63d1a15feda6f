#include "anomdet/plan_store.hpp"

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "anomdet/util.hpp"

namespace fs = std::filesystem;

namespace anomdet {

namespace {

constexpr std::array<std::string_view, 9> kCategoryNames = {
    "Sales",    "Purchase", "Capacity",  "Proclim",        "Bounds",
    "Transfer", "Blending", "Inventory", "MaterialBalance"};

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

double parse_value(std::string_view s, const std::string& where) {
  std::string tmp(s);
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size() || tmp.empty() || errno == ERANGE ||
      !std::isfinite(v)) {
    throw IngestError(IngestError::Kind::BadNumeric,
                      "bad numeric value '" + tmp + "' at " + where);
  }
  return v;
}

int parse_int_field(std::string_view s, std::string_view what) {
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9')
      throw BadPeriodError("bad " + std::string(what) + " in period: '" +
                           std::string(s) + "'");
    v = v * 10 + (c - '0');
  }
  return v;
}

// One parsed observation row, with provenance for error messages.
struct Obs {
  std::string case_id;
  Period period;
  VariableKey key;
  double value;
  std::string where;
};

void append_rows_from_file(const std::string& path,
                           const SourceSpec& src,
                           std::vector<Obs>& out) {
  std::ifstream in(path);
  if (!in)
    throw IngestError(IngestError::Kind::MissingFile,
                      "cannot open table: " + path);

  auto mapped = [&src](const char* role) -> std::string {
    auto it = src.columns.find(role);
    return it == src.columns.end() ? std::string(role) : it->second;
  };

  std::string line;
  int lineno = 0;
  // Header: locate the role columns by name.
  if (!std::getline(in, line))
    throw IngestError(IngestError::Kind::BadHeader, "empty table: " + path);
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split(line, ',');
  auto col_of = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  };
  int c_case = col_of(mapped("case_id"));
  int c_site = col_of(mapped("site"));
  int c_mat = col_of(mapped("material"));
  int c_attr = col_of(mapped("attribute"));
  int c_val = col_of(mapped("value"));
  int c_cat = col_of(mapped("category"));
  int c_per = col_of(mapped("period"));
  if (c_case < 0 || c_site < 0 || c_mat < 0 || c_attr < 0 || c_val < 0)
    throw IngestError(IngestError::Kind::BadHeader,
                      "missing required columns in " + path + " (need "
                      "case_id, site, material, attribute, value)");
  if (c_cat < 0 && !src.category)
    throw IngestError(IngestError::Kind::BadHeader,
                      "no category column and no per-source category for " +
                          path);

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split(line, ',');
    std::string where = path + ":" + std::to_string(lineno);
    auto field = [&](int idx) -> std::string_view {
      if (idx < 0 || idx >= static_cast<int>(f.size()))
        throw IngestError(IngestError::Kind::BadRow,
                          "short row at " + where);
      return f[idx];
    };
    Obs o;
    o.case_id = std::string(field(c_case));
    o.where = where;
    if (o.case_id.empty())
      throw IngestError(IngestError::Kind::BadRow, "empty case_id at " + where);
    Category cat;
    if (c_cat >= 0) {
      try {
        cat = category_from_name(field(c_cat));
      } catch (const BadKeyError& e) {
        throw IngestError(IngestError::Kind::BadRow,
                          std::string(e.what()) + " at " + where);
      }
    } else {
      cat = *src.category;
    }
    o.key.category = cat;
    o.key.site = std::string(field(c_site));
    o.key.material = std::string(field(c_mat));
    o.key.attribute = std::string(field(c_attr));
    if (!valid_key_component(o.key.site) ||
        !valid_key_component(o.key.material) ||
        !valid_key_component(o.key.attribute))
      throw IngestError(IngestError::Kind::BadRow,
                        "key component contains a reserved character at " +
                            where);
    if (c_per >= 0) {
      try {
        o.period = Period::parse(field(c_per));
      } catch (const BadPeriodError& e) {
        throw IngestError(IngestError::Kind::BadRow,
                          std::string(e.what()) + " at " + where);
      }
    }
    o.value = parse_value(field(c_val), where);
    out.push_back(std::move(o));
  }
}

// Validates ingested rows (period consistency, duplicate observations, with
// file/row context in every message) and folds them into one PlanCase per id.
std::vector<PlanCase> cases_from_rows(std::vector<Obs> rows) {
  // A case id seen with two different periods is a data error.
  std::map<std::string, Period> case_periods;
  for (const auto& o : rows) {
    auto [it, inserted] = case_periods.emplace(o.case_id, o.period);
    if (!inserted && it->second != o.period)
      throw IngestError(IngestError::Kind::BadRow,
                        "case '" + o.case_id +
                            "' appears with two different periods (" +
                            it->second.str() + " vs " + o.period.str() +
                            " at " + o.where + ")");
  }

  // The same (case, key) observed twice is an error, not a silent overwrite;
  // sort pointers so both offending locations can be named.
  std::vector<const Obs*> order;
  order.reserve(rows.size());
  for (const auto& o : rows) order.push_back(&o);
  std::sort(order.begin(), order.end(), [](const Obs* a, const Obs* b) {
    return std::tie(a->case_id, a->key) < std::tie(b->case_id, b->key);
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i]->case_id == order[i - 1]->case_id &&
        order[i]->key == order[i - 1]->key)
      throw IngestError(IngestError::Kind::DuplicateObservation,
                        "duplicate observation for case '" +
                            order[i]->case_id + "', key '" +
                            order[i]->key.str() + "' (at " +
                            order[i - 1]->where + " and " + order[i]->where +
                            ")");
  }

  std::map<std::string, PlanCase> by_id;
  for (auto& o : rows) {
    PlanCase& c = by_id[o.case_id];
    if (c.case_id.empty()) {
      c.case_id = o.case_id;
      c.period = o.period;
    }
    c.observations.emplace(std::move(o.key), o.value);
  }
  std::vector<PlanCase> cases;
  cases.reserve(by_id.size());
  for (auto& [id, c] : by_id) cases.push_back(std::move(c));
  return cases;
}

}  // namespace

std::string_view category_name(Category c) {
  return kCategoryNames[static_cast<int>(c)];
}

Category category_from_name(std::string_view s) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i)
    if (kCategoryNames[i] == s) return static_cast<Category>(i);
  throw BadKeyError("unknown category '" + std::string(s) + "'");
}

bool valid_key_component(std::string_view s) {
  for (char c : s)
    if (c == ':' || c == ',' || c == '\n' || c == '\r') return false;
  return true;
}

std::string VariableKey::str() const {
  std::string out(category_name(category));
  out += ':';
  out += site;
  out += ':';
  out += material;
  out += ':';
  out += attribute;
  return out;
}

VariableKey VariableKey::parse(std::string_view s) {
  auto parts = split(s, ':');
  if (parts.size() != 4)
    throw BadKeyError("bad variable key '" + std::string(s) + "'");
  VariableKey k;
  k.category = category_from_name(parts[0]);
  k.site = std::string(parts[1]);
  k.material = std::string(parts[2]);
  k.attribute = std::string(parts[3]);
  return k;
}

bool VariableKey::operator<(const VariableKey& o) const {
  return std::make_tuple(category_name(category), std::string_view(site),
                         std::string_view(material),
                         std::string_view(attribute)) <
         std::make_tuple(category_name(o.category), std::string_view(o.site),
                         std::string_view(o.material),
                         std::string_view(o.attribute));
}

std::string Period::str() const {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
  return buf;
}

Period Period::parse(std::string_view s) {
  auto parts = split(s, '-');
  if (parts.size() != 2 || parts[0].size() != 4 || parts[1].size() != 2)
    throw BadPeriodError("bad period '" + std::string(s) +
                         "' (expected YYYY-MM)");
  Period p;
  p.year = parse_int_field(parts[0], "year");
  p.month = parse_int_field(parts[1], "month");
  if (p.month > 12)
    throw BadPeriodError("bad month in period '" + std::string(s) + "'");
  return p;
}

Period Period::plus_months(int k) const {
  int base = year * 12 + (month - 1) + k;
  return Period{base / 12, base % 12 + 1};
}

std::optional<int> HistoryMatrix::find_variable(const VariableKey& key) const {
  auto it = std::lower_bound(variables_.begin(), variables_.end(), key);
  if (it == variables_.end() || !(*it == key)) return std::nullopt;
  return static_cast<int>(it - variables_.begin());
}

bool HistoryMatrix::present(int var_idx, int case_idx) const {
  const auto& v = cells_[var_idx];
  auto it = std::lower_bound(
      v.begin(), v.end(), case_idx,
      [](const std::pair<int, double>& c, int x) { return c.first < x; });
  return it != v.end() && it->first == case_idx;
}

int HistoryMatrix::present_count(int var_idx) const {
  return static_cast<int>(cells_[var_idx].size());
}

long HistoryMatrix::total_present() const {
  long n = 0;
  for (const auto& v : cells_) n += static_cast<long>(v.size());
  return n;
}

std::vector<double> HistoryMatrix::column_view(int var_idx) const {
  std::vector<double> out;
  out.reserve(cells_[var_idx].size());
  for (const auto& [cs, val] : cells_[var_idx]) out.push_back(val);
  return out;
}

std::vector<double> HistoryMatrix::column_view(const VariableKey& key) const {
  auto idx = find_variable(key);
  if (!idx) throw UnknownVariableError("unknown variable '" + key.str() + "'");
  return column_view(*idx);
}

PlanCase HistoryMatrix::case_at(int case_idx) const {
  PlanCase c;
  c.case_id = case_ids_[case_idx];
  c.period = periods_[case_idx];
  for (int v = 0; v < n_variables(); ++v) {
    const auto& col = cells_[v];
    auto it = std::lower_bound(
        col.begin(), col.end(), case_idx,
        [](const std::pair<int, double>& cell, int x) { return cell.first < x; });
    if (it != col.end() && it->first == case_idx)
      c.observations.emplace(variables_[v], it->second);
  }
  return c;
}

HistoryMatrix ingest_tables(const IngestConfig& cfg,
                            const std::string& base_dir) {
  std::vector<Obs> rows;
  for (const auto& src : cfg.sources) {
    // A plain path is used as-is; a glob is expanded against base_dir in
    // sorted order so ingest is independent of directory enumeration order.
    bool is_glob = src.path.find_first_of("*?") != std::string::npos;
    std::vector<std::string> paths;
    if (is_glob) {
      std::error_code ec;
      for (const auto& entry : fs::directory_iterator(base_dir, ec)) {
        if (!entry.is_regular_file()) continue;
        std::string name = entry.path().filename().string();
        if (glob_match(src.path, name)) paths.push_back(entry.path().string());
      }
      if (ec)
        throw IngestError(IngestError::Kind::MissingFile,
                          "cannot list directory: " + base_dir);
      std::sort(paths.begin(), paths.end());
      if (paths.empty())
        throw IngestError(IngestError::Kind::MissingFile,
                          "no table matches '" + src.path + "' in " + base_dir);
    } else {
      fs::path p(src.path);
      paths.push_back(p.is_absolute() ? src.path
                                      : (fs::path(base_dir) / p).string());
    }
    for (const auto& p : paths) append_rows_from_file(p, src, rows);
  }
  return history_from_cases(cases_from_rows(std::move(rows)));
}

HistoryMatrix history_from_cases(std::vector<PlanCase> cases) {
  std::set<std::string> seen_ids;
  for (const auto& c : cases) {
    if (c.case_id.empty())
      throw IngestError(IngestError::Kind::BadRow, "case with empty id");
    if (!seen_ids.insert(c.case_id).second)
      throw IngestError(IngestError::Kind::DuplicateObservation,
                        "case id '" + c.case_id + "' appears twice");
    for (const auto& [key, value] : c.observations)
      if (!std::isfinite(value))
        throw IngestError(IngestError::Kind::BadNumeric,
                          "non-finite value for '" + key.str() + "' in case " +
                              c.case_id);
  }

  // Case order: lexicographic by (period, case_id); variable order: canonical.
  std::sort(cases.begin(), cases.end(),
            [](const PlanCase& a, const PlanCase& b) {
              return std::tie(a.period, a.case_id) <
                     std::tie(b.period, b.case_id);
            });

  HistoryMatrix h;
  std::map<VariableKey, int> var_index;
  for (const auto& c : cases)
    for (const auto& [key, value] : c.observations) var_index.emplace(key, 0);
  h.variables_.reserve(var_index.size());
  for (auto& [key, idx] : var_index) {
    idx = static_cast<int>(h.variables_.size());
    h.variables_.push_back(key);
  }

  h.case_ids_.reserve(cases.size());
  h.periods_.reserve(cases.size());
  h.cells_.resize(h.variables_.size());
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    h.case_ids_.push_back(cases[ci].case_id);
    h.periods_.push_back(cases[ci].period);
    for (const auto& [key, value] : cases[ci].observations)
      h.cells_[var_index.at(key)].emplace_back(static_cast<int>(ci), value);
  }
  return h;
}

namespace {

void write_row(std::ostream& out, const std::string& case_id,
               const Period& period, const VariableKey& k, double v) {
  out << case_id << ',' << period.str() << ','
      << category_name(k.category) << ',' << k.site << ',' << k.material
      << ',' << k.attribute << ',' << format_double(v) << '\n';
}

constexpr const char* kCombinedHeader =
    "case_id,period,category,site,material,attribute,value\n";

}  // namespace

void export_history(const HistoryMatrix& h, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kCombinedHeader;
  for (int cs = 0; cs < h.n_cases(); ++cs) {
    PlanCase c = h.case_at(cs);
    for (const auto& [key, value] : c.observations)
      write_row(out, c.case_id, c.period, key, value);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

PlanCase read_case_file(const std::string& path) {
  IngestConfig cfg;
  cfg.sources.push_back(
      SourceSpec{fs::path(path).filename().string(), std::nullopt, {}});
  HistoryMatrix h =
      ingest_tables(cfg, fs::path(path).parent_path().string());
  if (h.n_cases() != 1)
    throw IngestError(IngestError::Kind::BadRow,
                      "case file " + path + " holds " +
                          std::to_string(h.n_cases()) +
                          " cases, expected exactly 1");
  return h.case_at(0);
}

void write_case_file(const PlanCase& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kCombinedHeader;
  for (const auto& [key, value] : c.observations)
    write_row(out, c.case_id, c.period, key, value);
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace anomdet
