// Command-line front end for the sparse over-complete patch matching
// pipeline. Subcommands mirror the pipeline stages; option precedence is
// command line > config file > defaults. Exit codes: 0 ok, 2 config error,
// 3 data error, 4 numeric error.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "spm/errors.hpp"
#include "spm/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"spm: sparse over-complete patch matching pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::uint64_t seed = 0;
  int k = 0, arch = 0;
  double beta = 0, alpha = 0;
  std::string eigen_mode, out_dir;
  app.add_option("--config", config_path, "key=value config file");
  auto* seed_opt = app.add_option("--seed", seed, "global seed");
  auto* k_opt = app.add_option("--k", k, "dictionary size");
  auto* beta_opt = app.add_option("--beta", beta, "sparsity penalty");
  auto* alpha_opt = app.add_option("--alpha", alpha, "ridge parameter");
  auto* arch_opt =
      app.add_option("--arch", arch, "matcher architecture (1 or 2)")
          ->check(CLI::IsMember({1, 2}));
  auto* mode_opt =
      app.add_option("--eigen-mode", eigen_mode, "smallest|largest")
          ->check(CLI::IsMember({"smallest", "largest"}));
  auto* out_opt = app.add_option("--out", out_dir, "output directory");

  auto* cmd_synth = app.add_subcommand(
      "synth", "materialize the configured synthetic train/test datasets");
  auto* cmd_learn = app.add_subcommand(
      "learn-dict", "sample patches, embed and fit the dictionary");
  auto* cmd_encode =
      app.add_subcommand("encode", "encode a dataset with a dictionary");
  auto* cmd_train =
      app.add_subcommand("train", "train the pair matcher on encoded pairs");
  auto* cmd_eval =
      app.add_subcommand("eval", "score encoded pairs and emit ROC/metrics");
  auto* cmd_pipe =
      app.add_subcommand("pipeline", "run every stage in sequence");

  std::string dict_path, data_bin, data_pairs, codes_path, codes_pairs;
  std::string model_path, history_path, metrics_path, roc_path, roc_dat;
  bool force = false, use_test = false;
  cmd_learn->add_option("--dict-out", dict_path, "dictionary artifact path");
  cmd_encode->add_option("--dict", dict_path, "dictionary artifact");
  cmd_encode->add_option("--data-bin", data_bin, "dataset container (SPMP)");
  cmd_encode->add_option("--data-pairs", data_pairs, "dataset pair CSV");
  cmd_encode->add_option("--codes-out", codes_path, "code file to write");
  cmd_encode->add_option("--pairs-out", codes_pairs,
                         "reindexed pair CSV to write");
  cmd_encode->add_flag("--test-split", use_test,
                       "default paths target the test dataset");
  cmd_train->add_option("--codes", codes_path, "encoded training pairs");
  cmd_train->add_option("--pairs", codes_pairs, "pair CSV for the codes");
  cmd_train->add_option("--model-out", model_path, "checkpoint to write");
  cmd_train->add_option("--history-out", history_path, "training log CSV");
  cmd_eval->add_option("--model", model_path, "model checkpoint");
  cmd_eval->add_option("--codes", codes_path, "encoded test pairs");
  cmd_eval->add_option("--pairs", codes_pairs, "pair CSV for the codes");
  cmd_eval->add_option("--metrics-out", metrics_path, "metrics file");
  cmd_eval->add_option("--roc-out", roc_path, "ROC CSV");
  cmd_eval->add_option("--roc-dat", roc_dat, "gnuplot-style ROC data file");
  cmd_eval->add_flag("--force", force, "ignore config-hash mismatches");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    spm::PipelineConfig cfg;
    if (!config_path.empty()) cfg = spm::parse_config_file(config_path);
    if (seed_opt->count()) cfg.seed = seed;
    if (k_opt->count()) cfg.k = k;
    if (beta_opt->count()) cfg.beta = beta;
    if (alpha_opt->count()) cfg.alpha = alpha;
    if (arch_opt->count()) cfg.arch = arch;
    if (mode_opt->count()) {
      cfg.eigen_mode = eigen_mode == "smallest" ? spm::EigenMode::kSmallest
                                                : spm::EigenMode::kLargest;
    }
    if (out_opt->count()) cfg.out_dir = out_dir;

    const spm::StagePaths paths = spm::stage_paths(cfg);
    if (cmd_synth->parsed()) {
      spm::run_synth(cfg);
    } else if (cmd_learn->parsed()) {
      spm::run_learn_dict(cfg,
                          dict_path.empty() ? paths.dict : dict_path);
    } else if (cmd_encode->parsed()) {
      spm::run_encode(
          cfg, dict_path.empty() ? paths.dict : dict_path,
          data_bin.empty() ? (use_test ? paths.test_bin : paths.train_bin)
                           : data_bin,
          data_pairs.empty()
              ? (use_test ? paths.test_pairs : paths.train_pairs)
              : data_pairs,
          codes_path.empty()
              ? (use_test ? paths.codes_test : paths.codes_train)
              : codes_path,
          codes_pairs.empty()
              ? (use_test ? paths.codes_test_pairs : paths.codes_train_pairs)
              : codes_pairs);
    } else if (cmd_train->parsed()) {
      spm::run_train(cfg,
                     codes_path.empty() ? paths.codes_train : codes_path,
                     codes_pairs.empty() ? paths.codes_train_pairs
                                         : codes_pairs,
                     model_path.empty() ? paths.model : model_path,
                     history_path.empty() ? paths.history : history_path);
    } else if (cmd_eval->parsed()) {
      spm::run_eval(cfg, model_path.empty() ? paths.model : model_path,
                    codes_path.empty() ? paths.codes_test : codes_path,
                    codes_pairs.empty() ? paths.codes_test_pairs : codes_pairs,
                    force, metrics_path.empty() ? paths.metrics : metrics_path,
                    roc_path.empty() ? paths.roc_csv : roc_path, roc_dat);
    } else if (cmd_pipe->parsed()) {
      spm::run_pipeline(cfg);
    }
    return 0;
  } catch (const spm::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const spm::data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const spm::numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
