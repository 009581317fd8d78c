#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "oodbench/dataset.hpp"

namespace oodbench::pipe {

struct ModelSpec {
  std::string id;
  std::string kind = "linear_ae";  // linear_ae | pca | identity
  int latent_dim = 16;
  int epochs = 100;
  int batch_size = 8;
  double learning_rate = 1e-2;
  double lr_decay = 0.5;
  int lr_decay_every = 100;
  std::string loss = "l2";
};

struct EnsembleMember {
  std::string model;
  std::string metric;
};

struct RunConfig {
  data::PhantomConfig phantom;
  double train_fraction = 2.0 / 3.0;
  std::vector<ModelSpec> models;
  std::vector<std::string> metric_set;
  std::vector<EnsembleMember> ensemble;
  std::string member_policy = "optimal";
  std::vector<std::string> families;
  bool circ_set = true;
  double calib_percentile = 99.5;
  double alpha = 0.01;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 0;
};

/// Strict parse: unknown keys anywhere are configuration errors, as are
/// duplicate model ids and ensemble references to undefined ids.
RunConfig parse_run_config(const nlohmann::ordered_json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::ordered_json config_to_json(const RunConfig& cfg);

/// Built-in preset covering the full benchmark: four latent sizes, all six
/// metrics, the four-member ensemble, every severity family, and the
/// homogeneous-circle set.
RunConfig paper_suite_config();

/// Which severity-grid setting a corpus slot gets: settings stepped in order
/// across the corpus, covering the whole grid span.
std::size_t setting_for_slice(std::size_t slice_idx, std::size_t n_slices,
                              std::size_t n_settings);

/// Stages communicate only through files under cfg.out_dir, so each CLI
/// subcommand can run in isolation. Every stage is deterministic in
/// (config contents, seed).
void stage_generate_data(const RunConfig& cfg);
void stage_generate_artifacts(const RunConfig& cfg);
void stage_train(const RunConfig& cfg);
void stage_score(const RunConfig& cfg);
void stage_evaluate(const RunConfig& cfg);
void stage_report(const RunConfig& cfg);

/// All six stages in order.
void run_experiment(const RunConfig& cfg);

struct ScoreRow {
  std::string slice_id, dataset, family, params;
  double severity = 0.0;  // NaN when not applicable
  std::vector<double> member_scores;
  double score = 0.0;
};

struct ScoresTable {
  std::vector<std::string> member_names;
  std::vector<ScoreRow> rows;
};

ScoresTable read_scores_csv(const std::filesystem::path& path);

}  // namespace oodbench::pipe
