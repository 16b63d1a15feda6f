#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "anomdet/bivariate.hpp"
#include "anomdet/ecod.hpp"
#include "anomdet/pair_select.hpp"
#include "anomdet/plan_store.hpp"

namespace anomdet {

struct ArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything training needs besides the history itself. A full copy rides
// along inside the artifact so retraining never depends on the original
// config file still existing.
struct TrainConfig {
  std::uint64_t seed = 0;
  EcodConfig ecod;
  MvsConfig mvs;
  double k_threshold = 0.4;  // minimum |penalized tau| to keep a tree edge
  PairFitConfig pair_fit;
  PairGroupConfig groups;
  IngestConfig ingest;
};

TrainConfig train_config_from_json_text(const std::string& text);
TrainConfig read_train_config_file(const std::string& path);

std::string group_config_hash(const PairGroupConfig& groups);

// A trained model: self-contained, versioned, reloadable. Detection needs
// nothing but this object.
struct ModelArtifact {
  static constexpr const char* kFormat = "anomdet-model";
  static constexpr int kFormatVersion = 1;

  std::string id;         // content hash, assigned at save/train time
  std::string parent_id;  // lineage for retrains, empty for a fresh train
  std::string trained_at; // caller-supplied timestamp string

  TrainConfig config;
  std::vector<std::string> case_ids;  // training window, in case order
  std::vector<Period> periods;

  EcodModelSet ecod;
  std::vector<PairModel> pairs;

  // Selection funnel, for the training summary.
  int pairs_prefilter = 0;
  int pairs_forest = 0;
  int pairs_kept = 0;
  int pairs_skipped = 0;
};

// Fits the univariate models, selects and fits the pairs, and stamps
// provenance. Same history + config + timestamp => identical artifact.
ModelArtifact train_model(const HistoryMatrix& h, const TrainConfig& cfg,
                          const std::string& timestamp,
                          const std::string& parent_id = "");

std::string artifact_to_json_text(const ModelArtifact& a);
ModelArtifact artifact_from_json_text(const std::string& text);
void save_artifact(const ModelArtifact& a, const std::string& path);
ModelArtifact load_artifact(const std::string& path);  // hard version check

struct DetectOutcome {
  std::string case_id;
  double mvs_level = 0.0;
  std::vector<UnivariateFinding> univariate;
  std::vector<BivariateFinding> bivariate;

  int aa_count() const;
  int significant_count() const;
};

DetectOutcome detect_case(const ModelArtifact& a, const PlanCase& c,
                          double mvs_level);

// Writes univariate.csv, bivariate.csv and summary.txt under out_dir.
// Output is byte-deterministic for a given artifact and case.
void write_reports(const ModelArtifact& a, const DetectOutcome& outcome,
                   const std::string& out_dir);

}  // namespace anomdet
