#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "oodbench/common.hpp"
#include "oodbench/io.hpp"
#include "oodbench/pipeline.hpp"
#include "oodbench/svg.hpp"

using namespace oodbench;
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ordered_json base_config_json() {
  return ordered_json{
      {"models", {{{"id", "m"}, {"latent_dim", 2}}}},
      {"metrics", {"abs_error", "ssim"}},
      {"ensemble", {{{"model", "m"}, {"metric", "ssim"}}}},
      {"circ_set", false},
  };
}

}  // namespace

TEST_CASE("slice-to-setting assignment covers the grid in order") {
  const std::size_t n = 80, k = 10;
  std::size_t prev = 0;
  std::vector<int> seen(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = pipe::setting_for_slice(i, n, k);
    CHECK(s < k);
    CHECK(s >= prev);
    prev = s;
    ++seen[s];
  }
  CHECK(pipe::setting_for_slice(0, n, k) == 0);
  CHECK(pipe::setting_for_slice(n - 1, n, k) == k - 1);
  for (int c : seen) CHECK(c == 8);

  // More settings than slices: still starts at 0 and stays in range.
  CHECK(pipe::setting_for_slice(0, 2, 10) == 0);
  CHECK(pipe::setting_for_slice(1, 2, 10) == 5);

  CHECK_THROWS_AS(pipe::setting_for_slice(0, 0, 5), ConfigError);
  CHECK_THROWS_AS(pipe::setting_for_slice(0, 5, 0), ConfigError);
  CHECK_THROWS_AS(pipe::setting_for_slice(5, 5, 3), ConfigError);
}

TEST_CASE("run config parsing is strict") {
  CHECK_NOTHROW(pipe::parse_run_config(base_config_json()));

  SUBCASE("unknown top-level key") {
    ordered_json j = base_config_json();
    j["typo_key"] = 1;
    CHECK_THROWS_AS(pipe::parse_run_config(j), ConfigError);
  }
  SUBCASE("unknown model key") {
    ordered_json j = base_config_json();
    j["models"][0]["latent"] = 4;
    CHECK_THROWS_AS(pipe::parse_run_config(j), ConfigError);
  }
  SUBCASE("duplicate model id") {
    ordered_json j = base_config_json();
    j["models"].push_back({{"id", "m"}});
    CHECK_THROWS_AS(pipe::parse_run_config(j), ConfigError);
  }
  SUBCASE("ensemble references undefined model") {
    ordered_json j = base_config_json();
    j["ensemble"][0]["model"] = "ghost";
    CHECK_THROWS_AS(pipe::parse_run_config(j), ConfigError);
  }
  SUBCASE("ensemble metric outside the metric set") {
    ordered_json j = base_config_json();
    j["ensemble"][0]["metric"] = "perceptual";
    CHECK_THROWS_AS(pipe::parse_run_config(j), ConfigError);
  }
  SUBCASE("bad member policy") {
    ordered_json j = base_config_json();
    j["member_policy"] = "latest";
    CHECK_THROWS_AS(pipe::parse_run_config(j), ConfigError);
  }
  SUBCASE("unknown metric name") {
    ordered_json j = base_config_json();
    j["metrics"].push_back("psnr");
    CHECK_THROWS_AS(pipe::parse_run_config(j), ConfigError);
  }
  SUBCASE("unknown family name") {
    ordered_json j = base_config_json();
    j["families"] = {"vortex"};
    CHECK_THROWS_AS(pipe::parse_run_config(j), ConfigError);
  }
  SUBCASE("bad model kind") {
    ordered_json j = base_config_json();
    j["models"][0]["kind"] = "vae";
    CHECK_THROWS_AS(pipe::parse_run_config(j), ConfigError);
  }
  SUBCASE("mistyped field") {
    ordered_json j = base_config_json();
    j["seed"] = "not-a-number";
    CHECK_THROWS_AS(pipe::parse_run_config(j), ConfigError);
  }
  SUBCASE("train fraction bounds") {
    ordered_json j = base_config_json();
    j["train_fraction"] = 1.0;
    CHECK_THROWS_AS(pipe::parse_run_config(j), ConfigError);
  }
  SUBCASE("artifact sets need an ensemble") {
    ordered_json j = base_config_json();
    j["ensemble"] = ordered_json::array();
    j["circ_set"] = true;
    CHECK_THROWS_AS(pipe::parse_run_config(j), ConfigError);
  }
}

TEST_CASE("config serialization round-trips") {
  const pipe::RunConfig preset = pipe::paper_suite_config();
  const ordered_json j = pipe::config_to_json(preset);
  const pipe::RunConfig back = pipe::parse_run_config(j);
  CHECK(pipe::config_to_json(back) == j);
  CHECK(back.models.size() == 4);
  CHECK(back.ensemble.size() == 4);
  CHECK(back.families.size() == 10);
  CHECK(back.metric_set.size() == 6);
  CHECK(back.member_policy == "optimal");
  CHECK(back.circ_set);

  const fs::path p = fs::temp_directory_path() / "oodbench_cfg_test.json";
  io::write_json_file(j, p);
  const pipe::RunConfig loaded = pipe::load_run_config(p);
  CHECK(pipe::config_to_json(loaded) == j);
  fs::remove(p);
}

TEST_CASE("scores csv round-trips including missing severity") {
  const fs::path p = fs::temp_directory_path() / "oodbench_scores_test.csv";
  svg::write_csv(p,
                 {"slice_id", "dataset", "family", "params", "severity", "m_ssim",
                  "m_abs_error", "score"},
                 {{"s000", "val", "none", "", "", "0.125", "0.25", "0.1875"},
                  {"s001", "blur", "blur", "sigma=0.25", "0.5", "0.5", "0.75", "0.625"}});
  const pipe::ScoresTable t = pipe::read_scores_csv(p);
  REQUIRE(t.member_names == std::vector<std::string>{"m_ssim", "m_abs_error"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0].slice_id == "s000");
  CHECK(t.rows[0].dataset == "val");
  CHECK(std::isnan(t.rows[0].severity));
  CHECK(t.rows[0].member_scores == std::vector<double>{0.125, 0.25});
  CHECK(t.rows[0].score == 0.1875);
  CHECK(t.rows[1].params == "sigma=0.25");
  CHECK(t.rows[1].severity == 0.5);
  fs::remove(p);
}

TEST_CASE("stages demand their inputs") {
  const fs::path root = fs::temp_directory_path() / "oodbench_missing_inputs";
  fs::remove_all(root);
  pipe::RunConfig cfg;
  cfg.out_dir = root;
  cfg.models = {{}};
  cfg.models[0].id = "m";
  CHECK_THROWS_AS(pipe::stage_train(cfg), DataError);
  CHECK_THROWS_AS(pipe::stage_score(cfg), DataError);
  CHECK_THROWS_AS(pipe::stage_evaluate(cfg), DataError);
  CHECK_THROWS_AS(pipe::stage_report(cfg), DataError);
  fs::remove_all(root);
}

TEST_CASE("micro experiment produces the full artifact tree") {
  const fs::path root = fs::temp_directory_path() / "oodbench_micro_run";
  fs::remove_all(root);

  pipe::RunConfig cfg;
  cfg.phantom.size = 32;
  cfg.phantom.seed = 11;
  cfg.phantom.n_subjects = 6;
  cfg.phantom.slices_per_subject = 1;
  pipe::ModelSpec m;
  m.id = "m2";
  m.latent_dim = 2;
  m.epochs = 5;
  m.batch_size = 2;
  m.learning_rate = 5e-3;
  m.lr_decay_every = 3;
  cfg.models = {m};
  cfg.metric_set = {"abs_error", "ssim"};
  cfg.ensemble = {{"m2", "ssim"}, {"m2", "abs_error"}};
  cfg.families = {"blur"};
  cfg.circ_set = true;
  cfg.out_dir = root;
  cfg.seed = 3;

  pipe::run_experiment(cfg);

  for (const char* rel :
       {"config.json", "manifest.json", "data/train/manifest.json",
        "data/val/manifest.json", "artifacts/circ/manifest.json",
        "artifacts/blur/manifest.json", "models/m2_final.json", "models/m2_best.json",
        "models/m2_history.json", "scores/scores.csv", "scores/recon_mae.csv",
        "scores/calibration.json", "scores/maps/circ/000_ensemble.f32",
        "scores/maps/circ/000_m2_final_ssim.f32",
        "scores/maps/circ/001_m2_optimal_abs_error.f32", "results/results.json",
        "report/latent_sweep.svg", "report/latent_sweep.csv", "report/metric_auprc.svg",
        "report/ensemble_pr.svg", "report/family_scores.svg", "report/severity_blur.svg",
        "report/severity_rho.svg"}) {
    INFO(rel);
    CHECK(fs::is_regular_file(root / rel));
  }
  // Circles are local so masks exist; blur is global so they must not.
  CHECK(fs::is_directory(root / "artifacts/circ/masks"));
  CHECK_FALSE(fs::exists(root / "artifacts/blur/masks"));
  CHECK_FALSE(fs::exists(root / "scores/maps/blur"));

  // 6 subjects at 2/3 train fraction: 4 train, 2 val, and both artifact sets
  // mirror the validation slices.
  const pipe::ScoresTable t = pipe::read_scores_csv(root / "scores/scores.csv");
  REQUIRE(t.member_names == std::vector<std::string>{"m2_ssim", "m2_abs_error"});
  REQUIRE(t.rows.size() == 6);
  int n_val = 0, n_circ = 0, n_blur = 0;
  for (const pipe::ScoreRow& r : t.rows) {
    REQUIRE(r.member_scores.size() == 2);
    if (r.dataset == "val") {
      ++n_val;
      CHECK(std::isnan(r.severity));
      CHECK(r.params.empty());
    } else if (r.dataset == "circ") {
      ++n_circ;
      CHECK(r.severity >= 0.0);
      CHECK(r.severity < 1.0);
      CHECK(r.params.find("radius=") != std::string::npos);
    } else if (r.dataset == "blur") {
      ++n_blur;
      CHECK(r.params.find("sigma=") != std::string::npos);
    }
  }
  CHECK(n_val == 2);
  CHECK(n_circ == 2);
  CHECK(n_blur == 2);

  const std::vector<double> map = io::read_f32_blob(root / "scores/maps/circ/000_ensemble.f32");
  CHECK(map.size() == 32u * 32u);

  const ordered_json results = io::read_json_file(root / "results/results.json");
  REQUIRE(results.at("latent_sweep").size() == 1);
  CHECK(results.at("latent_sweep")[0].at("model") == "m2");
  CHECK(results.at("latent_sweep")[0].at("mw_val_greater").at("method") == "exact");
  REQUIRE(results.at("checkpoint_selection").size() == 1);
  const double auprc = results.at("ensemble").at("auprc").get<double>();
  CHECK(auprc >= 0.0);
  CHECK(auprc <= 1.0);
  CHECK(results.at("ensemble").at("pr_curves").contains("ensemble"));
  CHECK(results.at("ensemble").at("pr_curves").contains("abs_error_m2"));
  // 1 model x 2 policies x 2 metrics.
  CHECK(results.at("metric_auprc").size() == 4);
  const ordered_json& blur = results.at("families").at("blur");
  CHECK(blur.at("count") == 2);
  CHECK(blur.at("wilcoxon_artifact_greater").at("method") == "exact");
  REQUIRE(blur.at("spearman").contains("sigma"));
  CHECK(blur.at("spearman").at("sigma").at("n") == 2);
  CHECK_FALSE(blur.contains("auprc"));  // global family, no pixel ground truth

  const ordered_json manifest = io::read_json_file(root / "manifest.json");
  CHECK(manifest.at("model_seeds").contains("m2"));
  CHECK(manifest.at("threshold_count") == 51);

  // Scoring and evaluation are deterministic given the stored models.
  const std::string scores_bytes = slurp(root / "scores/scores.csv");
  const std::string results_bytes = slurp(root / "results/results.json");
  pipe::stage_score(cfg);
  pipe::stage_evaluate(cfg);
  CHECK(slurp(root / "scores/scores.csv") == scores_bytes);
  CHECK(slurp(root / "results/results.json") == results_bytes);

  fs::remove_all(root);
}

TEST_CASE("identity model scores clean validation slices at zero") {
  const fs::path root = fs::temp_directory_path() / "oodbench_identity_run";
  fs::remove_all(root);

  pipe::RunConfig cfg;
  cfg.phantom.size = 32;
  cfg.phantom.seed = 5;
  cfg.phantom.n_subjects = 3;
  cfg.phantom.slices_per_subject = 1;
  pipe::ModelSpec m;
  m.id = "copy";
  m.kind = "identity";
  cfg.models = {m};
  cfg.metric_set = {"abs_error"};
  cfg.ensemble = {{"copy", "abs_error"}};
  cfg.member_policy = "final";
  cfg.circ_set = false;
  cfg.out_dir = root;

  pipe::run_experiment(cfg);
  const pipe::ScoresTable t = pipe::read_scores_csv(root / "scores/scores.csv");
  REQUIRE(t.rows.size() == 1);  // one val slice, no artifact sets
  CHECK(t.rows[0].dataset == "val");
  CHECK(t.rows[0].score == 0.0);
  CHECK(t.rows[0].member_scores == std::vector<double>{0.0});
  // No training happened and nothing references model files.
  CHECK_FALSE(fs::exists(root / "models/copy_final.json"));
  const ordered_json results = io::read_json_file(root / "results/results.json");
  CHECK(results.at("latent_sweep").empty());

  fs::remove_all(root);
}
