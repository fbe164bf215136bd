#ifndef SPM_PIPELINE_HPP
#define SPM_PIPELINE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "spm/dictionary.hpp"
#include "spm/embedding.hpp"
#include "spm/evaluation.hpp"
#include "spm/matcher_net.hpp"
#include "spm/patchdata.hpp"

namespace spm {

// Resolved run configuration. Values land here with precedence
// command line > config file > defaults. The config hash covers every
// model-relevant knob (not paths), and every artifact embeds it so that
// mismatched artifacts cannot be wired together silently.
struct PipelineConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  // Sparse-coding model.
  int k = 96;
  double alpha = 0.1;
  double beta = 0.1;
  int dict_samples = 480;
  bool standardize = false;      // per-patch zero-mean before encoding
  bool unit_norm_atoms = false;

  // Neighborhood graph / embedding.
  int p = 5;
  std::optional<double> t;  // empty = AUTO bandwidth
  bool squared_distance = false;
  EigenMode eigen_mode = EigenMode::kSmallest;
  bool drop_trivial = true;

  // Matcher network.
  int arch = 2;                    // 1, 2, or 0 = custom hidden list
  std::vector<int> hidden;         // used when arch == 0
  Activation activation = Activation::kRelu;
  TrainConfig train;               // seed field ignored; derived per stage

  // Synthetic data source (used when no explicit dataset paths are given).
  int synth_prototypes = 40;
  int synth_pairs_per_class = 50;
  int synth_test_prototypes = 25;
  int synth_test_pairs_per_class = 20;
  int synth_side = 8;
  double synth_noise = 0.05;
  int synth_shift = 1;

  // Photo-tour source: directory of patch sheets plus info/match files.
  std::string train_sheet_dir, train_info, train_matches;
  std::string test_sheet_dir, test_info, test_matches;
  int patch_side = 64;
  int grid = 16;

  // Pre-built dataset containers (SPMP + pairs CSV); take precedence over
  // both generators above.
  std::string train_bin, train_pairs;
  std::string test_bin, test_pairs;

  Architecture architecture() const;
  std::string canonical_model_keys() const;
  std::uint64_t config_hash() const;
};

// key=value text, '#' comments; unknown keys are config errors.
PipelineConfig parse_config_file(const std::string& path);
void apply_config_line(PipelineConfig& cfg, const std::string& key,
                       const std::string& value);

// Artifact locations inside cfg.out_dir.
struct StagePaths {
  std::string train_bin, train_pairs, test_bin, test_pairs;
  std::string dict;
  std::string codes_train, codes_train_pairs;
  std::string codes_test, codes_test_pairs;
  std::string model, history;
  std::string metrics, roc_csv, roc_dat;
};
StagePaths stage_paths(const PipelineConfig& cfg);

// Loads a photo-tour style dataset: every sheet image in the directory in
// lexicographic order, trimmed to the info file's patch count.
PatchDataset load_photo_tour(const std::string& sheet_dir,
                             const std::string& info_path,
                             const std::string& match_path, int patch_side,
                             int grid);

// Materializes the configured train/test datasets (synthetic or photo-tour)
// as SPMP + pairs CSV under out_dir.
void run_synth(const PipelineConfig& cfg);

// Samples dict_samples patches from the training set, builds the heat-kernel
// graph, embeds, ridge-fits and writes the dictionary artifact.
void run_learn_dict(const PipelineConfig& cfg, const std::string& dict_path);

// Encodes every patch referenced by the pair list; codes are stored for the
// sorted unique referenced patches and the sidecar pair CSV is reindexed
// accordingly.
EncodeReport run_encode(const PipelineConfig& cfg,
                        const std::string& dict_path,
                        const std::string& data_bin,
                        const std::string& data_pairs,
                        const std::string& codes_path,
                        const std::string& codes_pairs_path);

void run_train(const PipelineConfig& cfg, const std::string& codes_path,
               const std::string& codes_pairs_path,
               const std::string& model_path,
               const std::string& history_path);

EvalResult run_eval(const PipelineConfig& cfg, const std::string& model_path,
                    const std::string& codes_path,
                    const std::string& codes_pairs_path, bool force,
                    const std::string& metrics_path,
                    const std::string& roc_csv_path,
                    const std::string& roc_dat_path = "");

// synth (when configured) -> learn-dict -> encode train -> train ->
// encode test -> eval.
EvalResult run_pipeline(const PipelineConfig& cfg);

std::vector<PairSample> make_pair_samples(const CodeFile& codes,
                                          const std::vector<PairLabel>& pairs);

}  // namespace spm

#endif
