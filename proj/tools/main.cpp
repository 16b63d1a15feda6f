// anomdet command line: train / detect / retrain / synth.
//
// Exit codes: 0 success, 1 any load/parse/processing failure, 2 when
// `detect --fail-on-findings` found an out-of-support value or a Significant
// pair deviation.

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "anomdet/artifact.hpp"
#include "anomdet/plan_store.hpp"
#include "anomdet/synth.hpp"

namespace {

std::string now_utc_iso() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void print_train_summary(const anomdet::ModelArtifact& a,
                         const std::string& out) {
  std::cout << "model=" << a.id << '\n';
  if (!a.parent_id.empty()) std::cout << "parent=" << a.parent_id << '\n';
  std::cout << "cases=" << a.case_ids.size()
            << " variables=" << a.ecod.keys().size()
            << " eligible=" << a.ecod.eligible_count()
            << " pairs=" << a.pairs.size() << '\n'
            << "wrote " << out << '\n';
}

int run_train(const std::string& history_dir, const std::string& config_path,
              const std::string& out_path, const std::uint64_t* seed_override,
              const std::string& timestamp) {
  anomdet::TrainConfig cfg = anomdet::read_train_config_file(config_path);
  if (seed_override) cfg.seed = *seed_override;
  anomdet::HistoryMatrix h = anomdet::ingest_tables(cfg.ingest, history_dir);
  anomdet::ModelArtifact a = anomdet::train_model(h, cfg, timestamp);
  anomdet::save_artifact(a, out_path);
  print_train_summary(a, out_path);
  return 0;
}

int run_retrain(const std::string& model_path, const std::string& history_dir,
                const std::string& out_path, const std::string& timestamp) {
  anomdet::ModelArtifact old = anomdet::load_artifact(model_path);
  anomdet::HistoryMatrix h =
      anomdet::ingest_tables(old.config.ingest, history_dir);
  anomdet::ModelArtifact a =
      anomdet::train_model(h, old.config, timestamp, old.id);
  anomdet::save_artifact(a, out_path);
  print_train_summary(a, out_path);
  return 0;
}

int run_detect(const std::string& model_path, const std::string& case_path,
               const std::string& out_dir, double mvs_level,
               bool fail_on_findings) {
  anomdet::ModelArtifact a = anomdet::load_artifact(model_path);
  anomdet::PlanCase c = anomdet::read_case_file(case_path);
  anomdet::DetectOutcome o = anomdet::detect_case(a, c, mvs_level);
  anomdet::write_reports(a, o, out_dir);
  int aa = o.aa_count();
  std::cout << "model=" << a.id << " case=" << o.case_id << '\n'
            << "univariate=" << o.univariate.size() << " (aa=" << aa << ")"
            << " bivariate=" << o.bivariate.size() << '\n'
            << "wrote " << out_dir << '\n';
  if (fail_on_findings && (aa > 0 || o.significant_count() > 0)) {
    std::cout << "critical findings present\n";
    return 2;
  }
  return 0;
}

int run_synth(const std::string& scenario_path, const std::string& out_dir,
              const std::string& inject_path,
              const std::uint64_t* seed_override) {
  namespace fs = std::filesystem;
  anomdet::ScenarioConfig sc = anomdet::read_scenario_file(scenario_path);
  if (seed_override) sc.seed = *seed_override;
  anomdet::HistoryMatrix h = anomdet::generate_history(sc);

  fs::create_directories(fs::path(out_dir) / "cases");
  for (int i = 0; i < h.n_cases(); ++i) {
    anomdet::PlanCase c = h.case_at(i);
    anomdet::write_case_file(
        c, (fs::path(out_dir) / "cases" / (c.case_id + ".csv")).string());
  }
  anomdet::export_history(h, (fs::path(out_dir) / "history.csv").string());
  std::cout << "generated " << h.n_cases() << " cases\n";

  if (!inject_path.empty()) {
    std::vector<anomdet::InjectionSpec> specs =
        anomdet::read_injection_file(inject_path);
    fs::create_directories(fs::path(out_dir) / "injected");
    std::vector<anomdet::GroundTruth> gt;
    for (std::size_t j = 0; j < specs.size(); ++j) {
      anomdet::PlanCase base =
          h.case_at(static_cast<int>(j % h.n_cases()));
      char id[16];
      std::snprintf(id, sizeof id, "I%05d", static_cast<int>(j));
      base.case_id = id;
      auto [injected, truth] = anomdet::inject(h, std::move(base), specs[j]);
      anomdet::write_case_file(
          injected,
          (fs::path(out_dir) / "injected" / (injected.case_id + ".csv"))
              .string());
      gt.push_back(std::move(truth));
    }
    anomdet::write_ground_truth(
        gt, (fs::path(out_dir) / "ground_truth.json").string());
    std::cout << "injected " << specs.size() << " cases\n";
  }
  std::cout << "wrote " << out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anomaly detection for LP planning data"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "fit a model from a history");
  std::string t_history, t_config, t_out;
  std::uint64_t t_seed = 0;
  std::string t_timestamp = now_utc_iso();
  train->add_option("--history", t_history, "directory with history tables")
      ->required();
  train->add_option("--config", t_config, "train config JSON")->required();
  train->add_option("--out", t_out, "output model path")->required();
  auto* t_seed_opt =
      train->add_option("--seed", t_seed, "override the config seed");
  train->add_option("--timestamp", t_timestamp,
                    "training timestamp (default: current UTC time)");

  // detect
  auto* detect = app.add_subcommand("detect", "score one case against a model");
  std::string d_model, d_case, d_out;
  double d_level = 0.01;
  bool d_fail = false;
  detect->add_option("--model", d_model, "trained model path")->required();
  detect->add_option("--case", d_case, "case file to score")->required();
  detect->add_option("--out", d_out, "report output directory")->required();
  detect->add_option("--mvs-level", d_level,
                     "calibrated density level to flag at (default 0.01)");
  detect->add_flag("--fail-on-findings", d_fail,
                   "exit 2 when critical findings are present");

  // retrain
  auto* retrain =
      app.add_subcommand("retrain", "refit with the config of an existing model");
  std::string r_model, r_history, r_out;
  std::string r_timestamp = now_utc_iso();
  retrain->add_option("--model", r_model, "previous model path")->required();
  retrain->add_option("--history", r_history, "directory with history tables")
      ->required();
  retrain->add_option("--out", r_out, "output model path")->required();
  retrain->add_option("--timestamp", r_timestamp,
                      "training timestamp (default: current UTC time)");

  // synth
  auto* synth =
      app.add_subcommand("synth", "generate planning data from a scenario");
  std::string s_scenario, s_out, s_inject;
  std::uint64_t s_seed = 0;
  synth->add_option("--scenario", s_scenario, "scenario JSON")->required();
  synth->add_option("--out", s_out, "output directory")->required();
  synth->add_option("--inject", s_inject,
                    "injection spec JSON; writes perturbed cases + ground truth");
  auto* s_seed_opt =
      synth->add_option("--seed", s_seed, "override the scenario seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (train->parsed())
      return run_train(t_history, t_config, t_out,
                       t_seed_opt->count() ? &t_seed : nullptr, t_timestamp);
    if (detect->parsed())
      return run_detect(d_model, d_case, d_out, d_level, d_fail);
    if (retrain->parsed())
      return run_retrain(r_model, r_history, r_out, r_timestamp);
    if (synth->parsed())
      return run_synth(s_scenario, s_out, s_inject,
                       s_seed_opt->count() ? &s_seed : nullptr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
