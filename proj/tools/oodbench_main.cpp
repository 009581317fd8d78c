#include <cstdlib>
#include <iostream>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "oodbench/common.hpp"
#include "oodbench/pipeline.hpp"

namespace {

using oodbench::pipe::RunConfig;

struct StageCmd {
  const char* name;
  const char* help;
  void (*run)(const RunConfig&);
};

constexpr StageCmd kStages[] = {
    {"generate-data", "Render the phantom corpus and write the train/val split",
     oodbench::pipe::stage_generate_data},
    {"generate-artifacts", "Corrupt the validation slices with every configured family",
     oodbench::pipe::stage_generate_artifacts},
    {"train", "Fit the configured reconstructors", oodbench::pipe::stage_train},
    {"score", "Reconstruct, compute metric maps, and write slice scores",
     oodbench::pipe::stage_score},
    {"evaluate", "Aggregate scores into statistics and results.json",
     oodbench::pipe::stage_evaluate},
    {"report", "Render SVG figures and companion CSV tables",
     oodbench::pipe::stage_report},
    {"paper-suite", "Run every stage of the full benchmark",
     oodbench::pipe::run_experiment},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reconstruction-based out-of-distribution detection benchmark"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--config", config_path, "Run configuration JSON (defaults to the built-in suite)")
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory (overrides the config)");
  app.add_option("--seed", seed, "Root seed (overrides the config)");
  app.add_option("--threads", threads, "Worker thread cap, 0 keeps the OpenMP default");

  const StageCmd* chosen = nullptr;
  for (const StageCmd& s : kStages) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->callback([&chosen, &s] { chosen = &s; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif
    RunConfig cfg = config_path.empty() ? oodbench::pipe::paper_suite_config()
                                        : oodbench::pipe::load_run_config(config_path);
    if (app.count("--out") > 0) cfg.out_dir = out_dir;
    if (app.count("--seed") > 0) cfg.seed = seed;
    if (const char* env_out = std::getenv("OODBENCH_OUT"); env_out != nullptr && *env_out)
      cfg.out_dir = env_out;

    std::cout << chosen->name << ": out=" << cfg.out_dir.string() << " seed=" << cfg.seed
              << "\n";
    chosen->run(cfg);
    std::cout << chosen->name << ": ok\n";
    return 0;
  } catch (const oodbench::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const oodbench::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const oodbench::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
