#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "anomdet/plan_store.hpp"

using namespace anomdet;
namespace fs = std::filesystem;

namespace {

// Unique scratch directory per test run, removed on destruction.
struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("anomdet_ps_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name, const std::string& content) const {
    auto p = path / name;
    std::ofstream out(p);
    out << content;
    return p.string();
  }
  static inline int counter = 0;
};

PlanCase make_case(const std::string& id, Period per,
                   std::vector<std::pair<std::string, double>> obs) {
  PlanCase c;
  c.case_id = id;
  c.period = per;
  for (auto& [k, v] : obs) c.observations.emplace(VariableKey::parse(k), v);
  return c;
}

}  // namespace

TEST_CASE("category names round-trip") {
  for (int i = 0; i < 9; ++i) {
    auto c = static_cast<Category>(i);
    CHECK(category_from_name(category_name(c)) == c);
  }
  CHECK_THROWS_AS(category_from_name("NotACategory"), BadKeyError);
}

TEST_CASE("variable keys round-trip through their canonical string") {
  VariableKey k{Category::Transfer, "S1S2", "GSL", "activity"};
  CHECK(k.str() == "Transfer:S1S2:GSL:activity");
  CHECK(VariableKey::parse(k.str()) == k);
  CHECK_THROWS_AS(VariableKey::parse("missing:parts"), BadKeyError);
  CHECK_THROWS_AS(VariableKey::parse("NotACat:a:b:c"), BadKeyError);
  VariableKey empty_parts = VariableKey::parse("Sales:::");
  CHECK(empty_parts.site.empty());
  CHECK(empty_parts.str() == "Sales:::");
}

TEST_CASE("key ordering is component-wise on (category name, site, material, attribute)") {
  auto ref_less = [](const VariableKey& a, const VariableKey& b) {
    return std::make_tuple(std::string(category_name(a.category)), a.site,
                           a.material, a.attribute) <
           std::make_tuple(std::string(category_name(b.category)), b.site,
                           b.material, b.attribute);
  };
  std::vector<VariableKey> keys;
  for (auto cat : {Category::Sales, Category::Bounds, Category::MaterialBalance})
    for (std::string site : {"S1", "S10", "S2", ""})
      for (std::string attr : {"price", "max", "dj"})
        keys.push_back({cat, site, "M", attr});
  for (const auto& a : keys)
    for (const auto& b : keys) {
      CHECK((a < b) == ref_less(a, b));
    }
  // The prefix case where component order and string order disagree.
  VariableKey s1{Category::Sales, "S1", "M", "x"};
  VariableKey s10{Category::Sales, "S10", "M", "x"};
  CHECK(s1 < s10);
}

TEST_CASE("key components reject reserved characters") {
  CHECK(valid_key_component("GSL_95"));
  CHECK(!valid_key_component("a:b"));
  CHECK(!valid_key_component("a,b"));
  CHECK(!valid_key_component("a\nb"));
  CHECK(!valid_key_component("a\rb"));
}

TEST_CASE("periods parse, format and step") {
  Period p = Period::parse("2021-11");
  CHECK(p.year == 2021);
  CHECK(p.month == 11);
  CHECK(p.str() == "2021-11");
  CHECK(p.plus_months(1).str() == "2021-12");
  CHECK(p.plus_months(2).str() == "2022-01");
  CHECK(p.plus_months(26).str() == "2024-01");
  CHECK(Period::parse("2021-01") < Period::parse("2021-02"));
  CHECK_THROWS_AS(Period::parse("2021-13"), BadPeriodError);
  CHECK_THROWS_AS(Period::parse("2021"), BadPeriodError);
  CHECK_THROWS_AS(Period::parse("21-01"), BadPeriodError);
}

TEST_CASE("history assembly sorts cases by period and keys canonically") {
  std::vector<PlanCase> cases;
  cases.push_back(make_case("B", {2021, 2},
                            {{"Sales:S1:GSL:price", 75.0},
                             {"Purchase:S1:CRD:price", 50.0}}));
  cases.push_back(make_case("A", {2021, 3}, {{"Sales:S1:GSL:price", 76.0}}));
  cases.push_back(make_case("C", {2021, 1}, {{"Sales:S1:GSL:price", 74.0}}));
  HistoryMatrix h = history_from_cases(std::move(cases));

  CHECK(h.n_cases() == 3);
  CHECK(h.case_ids() == std::vector<std::string>{"C", "B", "A"});
  CHECK(h.n_variables() == 2);
  CHECK(h.variables()[0].str() == "Purchase:S1:CRD:price");

  auto col = h.column_view(VariableKey::parse("Sales:S1:GSL:price"));
  CHECK(col == std::vector<double>{74.0, 75.0, 76.0});

  auto sparse = h.column_view(VariableKey::parse("Purchase:S1:CRD:price"));
  CHECK(sparse == std::vector<double>{50.0});
  int purchase_idx = *h.find_variable(VariableKey::parse("Purchase:S1:CRD:price"));
  CHECK(h.present_count(purchase_idx) == 1);
  CHECK(h.present(purchase_idx, 1));
  CHECK(!h.present(purchase_idx, 0));
  CHECK(h.total_present() == 4);

  PlanCase back = h.case_at(0);
  CHECK(back.case_id == "C");
  CHECK(back.period.str() == "2021-01");
  CHECK(back.observations.size() == 1);

  CHECK(!h.find_variable(VariableKey::parse("Sales:S9:X:price")));
  CHECK_THROWS_AS(h.column_view(VariableKey::parse("Sales:S9:X:price")),
                  UnknownVariableError);
}

TEST_CASE("history rejects duplicate ids, empty ids and non-finite values") {
  std::vector<PlanCase> dup;
  dup.push_back(make_case("A", {2021, 1}, {{"Sales:S1:G:price", 1.0}}));
  dup.push_back(make_case("A", {2021, 2}, {{"Sales:S1:G:price", 2.0}}));
  CHECK_THROWS_AS(history_from_cases(std::move(dup)), IngestError);

  std::vector<PlanCase> unnamed;
  unnamed.push_back(make_case("", {2021, 1}, {{"Sales:S1:G:price", 1.0}}));
  CHECK_THROWS_AS(history_from_cases(std::move(unnamed)), IngestError);

  std::vector<PlanCase> inf;
  inf.push_back(make_case("A", {2021, 1},
                          {{"Sales:S1:G:price", std::stod("inf")}}));
  CHECK_THROWS_AS(history_from_cases(std::move(inf)), IngestError);
}

TEST_CASE("ingest reads the combined layout") {
  TempDir tmp;
  tmp.file("h.csv",
           "case_id,period,category,site,material,attribute,value\n"
           "C1,2021-01,Sales,S1,GSL,price,75.5\n"
           "C1,2021-01,Purchase,S1,CRD,price,50\n"
           "C2,2021-02,Sales,S1,GSL,price,76.25\n");
  IngestConfig cfg;
  cfg.sources.push_back({"h.csv", {}, {}});
  HistoryMatrix h = ingest_tables(cfg, tmp.path.string());
  CHECK(h.n_cases() == 2);
  CHECK(h.n_variables() == 2);
  CHECK(h.column_view(VariableKey::parse("Sales:S1:GSL:price")) ==
        std::vector<double>{75.5, 76.25});
}

TEST_CASE("ingest maps renamed columns and fixed categories") {
  TempDir tmp;
  tmp.file("prices.csv",
           "run,when,loc,prod,field,amount\n"
           "R1,2022-05,PLANT,GSL,price,81.5\n"
           "R2,2022-06,PLANT,GSL,price,82.5\n");
  SourceSpec src;
  src.path = "prices.csv";
  src.category = Category::Sales;
  src.columns = {{"case_id", "run"},   {"period", "when"},
                 {"site", "loc"},      {"material", "prod"},
                 {"attribute", "field"}, {"value", "amount"}};
  HistoryMatrix h = ingest_tables({{src}}, tmp.path.string());
  CHECK(h.n_cases() == 2);
  CHECK(h.variables()[0].str() == "Sales:PLANT:GSL:price");
  CHECK(h.column_view(0) == std::vector<double>{81.5, 82.5});
}

TEST_CASE("ingest expands globs in sorted order and merges files") {
  TempDir tmp;
  tmp.file("b_part.csv",
           "case_id,period,category,site,material,attribute,value\n"
           "C1,2021-01,Sales,S1,GSL,price,75\n");
  tmp.file("a_part.csv",
           "case_id,period,category,site,material,attribute,value\n"
           "C1,2021-01,Purchase,S1,CRD,price,50\n");
  tmp.file("readme.txt", "not a table");
  IngestConfig cfg;
  cfg.sources.push_back({"*_part.csv", {}, {}});
  HistoryMatrix h = ingest_tables(cfg, tmp.path.string());
  CHECK(h.n_cases() == 1);
  CHECK(h.n_variables() == 2);
}

TEST_CASE("ingest rejects duplicates naming both locations") {
  TempDir tmp;
  tmp.file("x.csv",
           "case_id,period,category,site,material,attribute,value\n"
           "C1,2021-01,Sales,S1,GSL,price,75\n");
  tmp.file("y.csv",
           "case_id,period,category,site,material,attribute,value\n"
           "C1,2021-01,Sales,S1,GSL,price,76\n");
  IngestConfig cfg;
  cfg.sources.push_back({"*.csv", {}, {}});
  try {
    ingest_tables(cfg, tmp.path.string());
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    CHECK(e.kind == IngestError::Kind::DuplicateObservation);
    std::string msg = e.what();
    CHECK(msg.find("x.csv") != std::string::npos);
    CHECK(msg.find("y.csv") != std::string::npos);
  }
}

TEST_CASE("ingest rejects malformed input") {
  TempDir tmp;
  IngestConfig cfg;
  cfg.sources.push_back({"h.csv", {}, {}});

  SUBCASE("missing file") {
    try {
      ingest_tables(cfg, tmp.path.string());
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.kind == IngestError::Kind::MissingFile);
    }
  }
  SUBCASE("bad header") {
    tmp.file("h.csv", "who,what\nC1,75\n");
    CHECK_THROWS_AS(ingest_tables(cfg, tmp.path.string()), IngestError);
  }
  SUBCASE("bad numeric") {
    tmp.file("h.csv",
             "case_id,period,category,site,material,attribute,value\n"
             "C1,2021-01,Sales,S1,GSL,price,seventy\n");
    try {
      ingest_tables(cfg, tmp.path.string());
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.kind == IngestError::Kind::BadNumeric);
    }
  }
  SUBCASE("non-finite value") {
    tmp.file("h.csv",
             "case_id,period,category,site,material,attribute,value\n"
             "C1,2021-01,Sales,S1,GSL,price,nan\n");
    CHECK_THROWS_AS(ingest_tables(cfg, tmp.path.string()), IngestError);
  }
  SUBCASE("short row") {
    tmp.file("h.csv",
             "case_id,period,category,site,material,attribute,value\n"
             "C1,2021-01,Sales\n");
    CHECK_THROWS_AS(ingest_tables(cfg, tmp.path.string()), IngestError);
  }
  SUBCASE("one case under two periods") {
    tmp.file("h.csv",
             "case_id,period,category,site,material,attribute,value\n"
             "C1,2021-01,Sales,S1,GSL,price,75\n"
             "C1,2021-02,Sales,S1,DSL,price,70\n");
    CHECK_THROWS_AS(ingest_tables(cfg, tmp.path.string()), IngestError);
  }
}

TEST_CASE("export then ingest reproduces the matrix") {
  std::vector<PlanCase> cases;
  cases.push_back(make_case("C1", {2021, 1},
                            {{"Sales:S1:GSL:price", 75.125},
                             {"Bounds:ALL:OBJECTIVE:value", 1234.5678901234567}}));
  cases.push_back(make_case("C2", {2021, 2},
                            {{"Sales:S1:GSL:price", 0.1},
                             {"Transfer:S1S2:GSL:activity", 45.000000001}}));
  HistoryMatrix h = history_from_cases(std::move(cases));

  TempDir tmp;
  std::string path = (tmp.path / "out.csv").string();
  export_history(h, path);

  IngestConfig cfg;
  cfg.sources.push_back({"out.csv", {}, {}});
  HistoryMatrix back = ingest_tables(cfg, tmp.path.string());

  REQUIRE(back.n_cases() == h.n_cases());
  REQUIRE(back.n_variables() == h.n_variables());
  CHECK(back.case_ids() == h.case_ids());
  for (int v = 0; v < h.n_variables(); ++v) {
    CHECK(back.variables()[v] == h.variables()[v]);
    CHECK(back.cells(v) == h.cells(v));  // values must survive exactly
  }
}

TEST_CASE("case files hold exactly one case") {
  TempDir tmp;
  PlanCase c = make_case("X9", {2023, 7},
                         {{"Sales:S1:GSL:price", 80.0},
                          {"Capacity:S1:CDU:max", 100.25}});
  std::string path = (tmp.path / "case.csv").string();
  write_case_file(c, path);
  PlanCase back = read_case_file(path);
  CHECK(back.case_id == c.case_id);
  CHECK(back.period == c.period);
  CHECK(back.observations == c.observations);

  tmp.file("two.csv",
           "case_id,period,category,site,material,attribute,value\n"
           "A,2021-01,Sales,S1,GSL,price,75\n"
           "B,2021-01,Sales,S1,GSL,price,76\n");
  CHECK_THROWS_AS(read_case_file((tmp.path / "two.csv").string()), IngestError);
}
