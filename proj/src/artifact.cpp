#include "anomdet/artifact.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "anomdet/util.hpp"

namespace anomdet {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string read_text_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError(std::string(what) + " not readable: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError("cannot open for writing: " + path);
  out << text;
  if (!out) throw ArtifactError("short write: " + path);
}

// ---- TrainConfig <-> JSON -------------------------------------------------

ordered_json pattern_to_json(const KeyPattern& p) {
  ordered_json j;
  j["category"] = p.category;
  j["site"] = p.site;
  j["material"] = p.material;
  j["attribute"] = p.attribute;
  return j;
}

KeyPattern pattern_from_json(const ordered_json& j) {
  KeyPattern p;
  p.category = j.value("category", std::string());
  p.site = j.value("site", std::string());
  p.material = j.value("material", std::string());
  p.attribute = j.value("attribute", std::string());
  return p;
}

ordered_json groups_to_json(const PairGroupConfig& g) {
  ordered_json j;
  j["groups"] = ordered_json::array();
  for (const auto& def : g.groups) {
    ordered_json jd;
    jd["name"] = def.name;
    jd["match"] = ordered_json::array();
    for (const auto& p : def.match) jd["match"].push_back(pattern_to_json(p));
    j["groups"].push_back(std::move(jd));
  }
  j["allow"] = ordered_json::array();
  for (const auto& [a, b] : g.allow)
    j["allow"].push_back(ordered_json::array({a, b}));
  return j;
}

PairGroupConfig groups_from_json(const ordered_json& j) {
  PairGroupConfig g;
  for (const auto& jd : j.value("groups", ordered_json::array())) {
    GroupDef def;
    def.name = jd.at("name").get<std::string>();
    for (const auto& jp : jd.value("match", ordered_json::array()))
      def.match.push_back(pattern_from_json(jp));
    g.groups.push_back(std::move(def));
  }
  for (const auto& ja : j.value("allow", ordered_json::array())) {
    if (!ja.is_array() || ja.size() != 2)
      throw ConfigError("groups.allow entries must be [name, name] pairs");
    g.allow.emplace_back(ja[0].get<std::string>(), ja[1].get<std::string>());
  }
  return g;
}

ordered_json ingest_to_json(const IngestConfig& cfg) {
  ordered_json j;
  j["sources"] = ordered_json::array();
  for (const auto& s : cfg.sources) {
    ordered_json js;
    js["path"] = s.path;
    if (s.category) js["category"] = std::string(category_name(*s.category));
    if (!s.columns.empty()) {
      ordered_json jc;
      for (const auto& [k, v] : s.columns) jc[k] = v;
      js["columns"] = std::move(jc);
    }
    j["sources"].push_back(std::move(js));
  }
  return j;
}

IngestConfig ingest_from_json(const ordered_json& j) {
  IngestConfig cfg;
  for (const auto& js : j.value("sources", ordered_json::array())) {
    SourceSpec s;
    s.path = js.at("path").get<std::string>();
    if (js.contains("category"))
      s.category = category_from_name(js["category"].get<std::string>());
    if (js.contains("columns"))
      for (const auto& [k, v] : js["columns"].items())
        s.columns[k] = v.get<std::string>();
    cfg.sources.push_back(std::move(s));
  }
  return cfg;
}

ordered_json config_to_json(const TrainConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  j["ecod"] = {{"c", cfg.ecod.c},
               {"k", cfg.ecod.k},
               {"p", cfg.ecod.p},
               {"top_n", cfg.ecod.top_n}};
  j["mvs"] = {{"n_samples", cfg.mvs.n_samples}, {"levels", cfg.mvs.levels}};
  j["pairs"] = {{"k_threshold", cfg.k_threshold},
                {"min_joint", cfg.pair_fit.min_joint}};
  j["groups"] = groups_to_json(cfg.groups);
  j["ingest"] = ingest_to_json(cfg.ingest);
  return j;
}

TrainConfig config_from_json(const ordered_json& j) {
  TrainConfig cfg;
  cfg.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("ecod")) {
    const auto& je = j["ecod"];
    cfg.ecod.c = je.value("c", cfg.ecod.c);
    cfg.ecod.k = je.value("k", cfg.ecod.k);
    cfg.ecod.p = je.value("p", cfg.ecod.p);
    cfg.ecod.top_n = je.value("top_n", cfg.ecod.top_n);
  }
  if (j.contains("mvs")) {
    const auto& jm = j["mvs"];
    cfg.mvs.n_samples = jm.value("n_samples", cfg.mvs.n_samples);
    if (jm.contains("levels"))
      cfg.mvs.levels = jm["levels"].get<std::vector<double>>();
  }
  if (j.contains("pairs")) {
    const auto& jp = j["pairs"];
    cfg.k_threshold = jp.value("k_threshold", cfg.k_threshold);
    cfg.pair_fit.min_joint = jp.value("min_joint", cfg.pair_fit.min_joint);
  }
  if (j.contains("groups")) cfg.groups = groups_from_json(j["groups"]);
  if (j.contains("ingest")) cfg.ingest = ingest_from_json(j["ingest"]);
  if (cfg.ingest.sources.empty()) cfg.ingest.sources.push_back({"*.csv", {}, {}});
  return cfg;
}

// ---- model payloads -------------------------------------------------------

const char* skew_name(Skew s) { return s == Skew::Right ? "right" : "left"; }

Skew skew_from_name(const std::string& s) {
  if (s == "right") return Skew::Right;
  if (s == "left") return Skew::Left;
  throw ArtifactError("unknown skew direction '" + s + "'");
}

ordered_json ecod_models_to_json(const EcodModelSet& set) {
  ordered_json arr = ordered_json::array();
  for (std::size_t i = 0; i < set.keys().size(); ++i) {
    const EcodVariableModel& m = set.models()[i];
    ordered_json jm;
    jm["key"] = set.keys()[i].str();
    jm["eligible"] = m.eligible;
    jm["skew"] = skew_name(m.skew);
    jm["n"] = m.n_train;
    jm["n_plans"] = m.n_plans;
    jm["std"] = m.train_std;
    jm["samples"] = m.cdf.sorted_samples();
    arr.push_back(std::move(jm));
  }
  return arr;
}

EcodModelSet ecod_models_from_json(const ordered_json& arr) {
  std::vector<VariableKey> keys;
  std::vector<EcodVariableModel> models;
  for (const auto& jm : arr) {
    keys.push_back(VariableKey::parse(jm.at("key").get<std::string>()));
    EcodVariableModel m{
        EmpiricalCdf(jm.at("samples").get<std::vector<double>>()),
        skew_from_name(jm.at("skew").get<std::string>()),
        jm.at("eligible").get<bool>(),
        jm.at("std").get<double>(),
        jm.at("n").get<int>(),
        jm.at("n_plans").get<int>()};
    if (m.n_train != m.cdf.n())
      throw ArtifactError("sample count mismatch for variable '" +
                          keys.back().str() + "'");
    models.push_back(std::move(m));
  }
  return EcodModelSet(std::move(keys), std::move(models));
}

ordered_json pairs_to_json(const std::vector<PairModel>& pairs) {
  ordered_json arr = ordered_json::array();
  for (const PairModel& m : pairs) {
    ordered_json jm;
    jm["x"] = m.x_var.str();
    jm["y"] = m.y_var.str();
    jm["weight"] = m.weight;
    jm["n_joint"] = m.n_joint;
    jm["a"] = m.a;
    jm["b"] = m.b;
    jm["e_bar"] = m.e_bar;
    jm["s_e2"] = m.s_e2;
    jm["r2"] = m.r2;
    jm["degenerate"] = m.degenerate;
    jm["band"] = m.linreg_band;
    jm["gauss"] = {{"mux", m.gauss.mux},
                   {"muy", m.gauss.muy},
                   {"vxx", m.gauss.vxx},
                   {"vxy", m.gauss.vxy},
                   {"vyy", m.gauss.vyy}};
    jm["has_mvs"] = m.has_mvs;
    ordered_json cuts = ordered_json::array();
    for (const auto& [level, thr] : m.mvs_cutoffs)
      cuts.push_back(ordered_json::array({level, thr}));
    jm["mvs_cutoffs"] = std::move(cuts);
    jm["mvs_seed"] = m.mvs_seed;
    arr.push_back(std::move(jm));
  }
  return arr;
}

std::vector<PairModel> pairs_from_json(const ordered_json& arr) {
  std::vector<PairModel> pairs;
  for (const auto& jm : arr) {
    PairModel m;
    m.x_var = VariableKey::parse(jm.at("x").get<std::string>());
    m.y_var = VariableKey::parse(jm.at("y").get<std::string>());
    m.weight = jm.at("weight").get<double>();
    m.n_joint = jm.at("n_joint").get<int>();
    m.a = jm.at("a").get<double>();
    m.b = jm.at("b").get<double>();
    m.e_bar = jm.at("e_bar").get<double>();
    m.s_e2 = jm.at("s_e2").get<double>();
    m.r2 = jm.at("r2").get<double>();
    m.degenerate = jm.at("degenerate").get<bool>();
    m.linreg_band = jm.at("band").get<double>();
    const auto& jg = jm.at("gauss");
    m.gauss.mux = jg.at("mux").get<double>();
    m.gauss.muy = jg.at("muy").get<double>();
    m.gauss.vxx = jg.at("vxx").get<double>();
    m.gauss.vxy = jg.at("vxy").get<double>();
    m.gauss.vyy = jg.at("vyy").get<double>();
    m.has_mvs = jm.at("has_mvs").get<bool>();
    for (const auto& c : jm.at("mvs_cutoffs")) {
      if (!c.is_array() || c.size() != 2)
        throw ArtifactError("mvs_cutoffs entries must be [level, threshold]");
      m.mvs_cutoffs[c[0].get<double>()] = c[1].get<double>();
    }
    m.mvs_seed = jm.at("mvs_seed").get<std::uint64_t>();
    pairs.push_back(std::move(m));
  }
  return pairs;
}

// The document minus the id field; the id is the hash of exactly this text,
// so identical content always carries an identical id.
ordered_json artifact_body_json(const ModelArtifact& a) {
  ordered_json j;
  j["format"] = ModelArtifact::kFormat;
  j["format_version"] = ModelArtifact::kFormatVersion;
  j["parent_id"] = a.parent_id;
  j["trained_at"] = a.trained_at;
  j["config"] = config_to_json(a.config);
  j["groups_hash"] = group_config_hash(a.config.groups);

  ordered_json window = ordered_json::array();
  for (std::size_t i = 0; i < a.case_ids.size(); ++i)
    window.push_back(ordered_json::array({a.case_ids[i], a.periods[i].str()}));
  j["window"] = std::move(window);

  j["summary"] = {{"variables", static_cast<int>(a.ecod.keys().size())},
                  {"eligible", a.ecod.eligible_count()},
                  {"pairs_prefilter", a.pairs_prefilter},
                  {"pairs_forest", a.pairs_forest},
                  {"pairs_kept", a.pairs_kept},
                  {"pairs_fitted", static_cast<int>(a.pairs.size())},
                  {"pairs_skipped", a.pairs_skipped}};
  j["ecod_models"] = ecod_models_to_json(a.ecod);
  j["pair_models"] = pairs_to_json(a.pairs);
  return j;
}

std::string content_id(const ModelArtifact& a) {
  std::string body = artifact_body_json(a).dump();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(body)));
  return std::string(buf);
}

}  // namespace

TrainConfig train_config_from_json_text(const std::string& text) {
  try {
    return config_from_json(ordered_json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad train config: ") + e.what());
  }
}

TrainConfig read_train_config_file(const std::string& path) {
  return train_config_from_json_text(read_text_file(path, "train config"));
}

std::string group_config_hash(const PairGroupConfig& groups) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(groups_to_json(groups).dump())));
  return std::string(buf);
}

ModelArtifact train_model(const HistoryMatrix& h, const TrainConfig& cfg,
                          const std::string& timestamp,
                          const std::string& parent_id) {
  ModelArtifact a;
  a.parent_id = parent_id;
  a.trained_at = timestamp;
  a.config = cfg;
  a.case_ids = h.case_ids();
  a.periods = h.periods();

  a.ecod = fit_ecod_models(h, cfg.ecod);

  std::vector<KeyPair> candidates =
      candidate_pairs_from_groups(h.variables(), cfg.groups);
  a.pairs_prefilter = static_cast<int>(candidates.size());
  if (!candidates.empty()) {
    PenalizedKendallMatrix m = penalized_matrix(h, candidates);
    std::vector<CandidatePair> forest =
        max_weight_spanning_tree(m, candidates);
    a.pairs_forest = static_cast<int>(forest.size());
    std::vector<CandidatePair> kept =
        threshold_filter(std::move(forest), cfg.k_threshold);
    a.pairs_kept = static_cast<int>(kept.size());
    PairFitResult fit =
        fit_pair_models(h, kept, cfg.pair_fit, cfg.mvs, cfg.seed);
    a.pairs = std::move(fit.models);
    a.pairs_skipped = static_cast<int>(fit.skipped.size());
  }

  a.id = content_id(a);
  return a;
}

std::string artifact_to_json_text(const ModelArtifact& a) {
  ordered_json body = artifact_body_json(a);
  ordered_json j;
  j["format"] = body["format"];
  j["format_version"] = body["format_version"];
  j["id"] = content_id(a);
  for (auto it = body.begin(); it != body.end(); ++it)
    if (it.key() != "format" && it.key() != "format_version")
      j[it.key()] = it.value();
  return j.dump(2) + "\n";
}

ModelArtifact artifact_from_json_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("bad model file: ") + e.what());
  }
  try {
    if (j.value("format", std::string()) != ModelArtifact::kFormat)
      throw ArtifactError("not a model file (missing or wrong format tag)");
    if (j.value("format_version", -1) != ModelArtifact::kFormatVersion)
      throw ArtifactError("unsupported model format version " +
                          j.value("format_version", ordered_json()).dump());
    ModelArtifact a;
    a.id = j.value("id", std::string());
    a.parent_id = j.value("parent_id", std::string());
    a.trained_at = j.value("trained_at", std::string());
    a.config = config_from_json(j.at("config"));
    for (const auto& w : j.value("window", ordered_json::array())) {
      if (!w.is_array() || w.size() != 2)
        throw ArtifactError("window entries must be [case_id, period] pairs");
      a.case_ids.push_back(w[0].get<std::string>());
      a.periods.push_back(Period::parse(w[1].get<std::string>()));
    }
    a.ecod = ecod_models_from_json(j.at("ecod_models"));
    a.pairs = pairs_from_json(j.at("pair_models"));
    if (j.contains("summary")) {
      const auto& s = j["summary"];
      a.pairs_prefilter = s.value("pairs_prefilter", 0);
      a.pairs_forest = s.value("pairs_forest", 0);
      a.pairs_kept = s.value("pairs_kept", 0);
      a.pairs_skipped = s.value("pairs_skipped", 0);
    }
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("bad model file: ") + e.what());
  }
}

void save_artifact(const ModelArtifact& a, const std::string& path) {
  write_text_file(path, artifact_to_json_text(a));
}

ModelArtifact load_artifact(const std::string& path) {
  return artifact_from_json_text(read_text_file(path, "model file"));
}

int DetectOutcome::aa_count() const {
  int n = 0;
  for (const auto& f : univariate)
    if (f.kind == FindingKind::AA) ++n;
  return n;
}

int DetectOutcome::significant_count() const {
  int n = 0;
  for (const auto& f : bivariate)
    if (f.label == RegionLabel::Significant) ++n;
  return n;
}

DetectOutcome detect_case(const ModelArtifact& a, const PlanCase& c,
                          double mvs_level) {
  DetectOutcome o;
  o.case_id = c.case_id;
  o.mvs_level = mvs_level;
  o.univariate = detect_univariate(a.ecod, c, a.config.ecod);
  o.bivariate = detect_bivariate(a.pairs, c, mvs_level);
  return o;
}

void write_reports(const ModelArtifact& a, const DetectOutcome& outcome,
                   const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  std::string meta = "# model=" + a.id + " case=" + outcome.case_id +
                     " seed=" + std::to_string(a.config.seed) +
                     " mvs_level=" + format_double(outcome.mvs_level) + "\n";

  std::ostringstream uni;
  uni << meta
      << "variable_key,observed,score,kind,n_train,historical_min,"
         "historical_max\n";
  for (const auto& f : outcome.univariate)
    uni << f.variable.str() << ',' << format_double(f.observed) << ','
        << format_double(f.score) << ',' << finding_kind_name(f.kind) << ','
        << f.n_train << ',' << format_double(f.historical_min) << ','
        << format_double(f.historical_max) << '\n';
  write_text_file((std::filesystem::path(out_dir) / "univariate.csv").string(),
                  uni.str());

  std::ostringstream biv;
  biv << meta
      << "x_var,y_var,x_value,y_value,linreg_score,mvs_score,linreg_flag,"
         "mvs_flag,label\n";
  for (const auto& f : outcome.bivariate)
    biv << f.x_var.str() << ',' << f.y_var.str() << ','
        << format_double(f.x_value) << ',' << format_double(f.y_value) << ','
        << format_double(f.linreg_score) << ',' << format_double(f.mvs_score)
        << ',' << (f.linreg_flagged ? "true" : "false") << ','
        << (f.mvs_flagged ? "true" : "false") << ','
        << region_label_name(f.label) << '\n';
  write_text_file((std::filesystem::path(out_dir) / "bivariate.csv").string(),
                  biv.str());

  int aa = outcome.aa_count();
  int sig = outcome.significant_count();
  int dis = 0, suez = 0;
  for (const auto& f : outcome.bivariate) {
    if (f.label == RegionLabel::Disproportionate) ++dis;
    if (f.label == RegionLabel::SuezType) ++suez;
  }
  std::ostringstream sum;
  sum << "model=" << a.id << '\n'
      << "trained_at=" << a.trained_at << '\n'
      << "case=" << outcome.case_id << '\n'
      << "seed=" << a.config.seed << '\n'
      << "mvs_level=" << format_double(outcome.mvs_level) << '\n'
      << "univariate_findings=" << outcome.univariate.size() << '\n'
      << "univariate_aa=" << aa << '\n'
      << "univariate_a=" << outcome.univariate.size() - aa << '\n'
      << "bivariate_findings=" << outcome.bivariate.size() << '\n'
      << "significant=" << sig << '\n'
      << "disproportionate=" << dis << '\n'
      << "suez_type=" << suez << '\n';
  write_text_file((std::filesystem::path(out_dir) / "summary.txt").string(),
                  sum.str());
}

}  // namespace anomdet
