#include "spm/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <sstream>

#include "spm/errors.hpp"
#include "spm/io_util.hpp"
#include "spm/rng.hpp"

namespace fs = std::filesystem;

namespace spm {

namespace {

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "0" || value == "false") return false;
  if (value == "1" || value == "true") return true;
  throw config_error("config: " + key + " expects 0/1, got '" + value + "'");
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw config_error("config: " + key + " expects an integer, got '" +
                       value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw config_error("config: " + key + " expects a number, got '" + value +
                       "'");
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Architecture PipelineConfig::architecture() const {
  Architecture a;
  switch (arch) {
    case 1:
      a = Architecture::arch1();
      break;
    case 2:
      a = Architecture::arch2();
      break;
    case 0:
      if (hidden.empty()) {
        throw config_error("config: arch=0 (custom) needs a hidden list");
      }
      a.hidden_sizes = hidden;
      break;
    default:
      throw config_error("config: arch must be 1, 2 or 0 (custom)");
  }
  a.activation = activation;
  return a;
}

std::string PipelineConfig::canonical_model_keys() const {
  // Sorted key=value lines over everything that shapes the artifacts;
  // dataset and output paths deliberately excluded so the cross-dataset
  // protocol (encode test data with the training dictionary) hashes equal.
  std::map<std::string, std::string> kv;
  kv["activation"] = activation == Activation::kRelu ? "relu" : "tanh";
  kv["alpha"] = fmt(alpha);
  kv["arch"] = std::to_string(arch);
  if (arch == 0) {
    std::string h;
    for (int v : hidden) h += std::to_string(v) + ";";
    kv["hidden"] = h;
  }
  kv["batch_size"] = std::to_string(train.batch_size);
  kv["beta"] = fmt(beta);
  kv["dict_samples"] = std::to_string(dict_samples);
  kv["drop_trivial"] = drop_trivial ? "1" : "0";
  kv["eigen_mode"] =
      eigen_mode == EigenMode::kSmallest ? "smallest" : "largest";
  kv["epochs"] = std::to_string(train.epochs);
  kv["adam_beta1"] = fmt(train.adam_beta1);
  kv["adam_beta2"] = fmt(train.adam_beta2);
  kv["adam_eps"] = fmt(train.adam_eps);
  kv["k"] = std::to_string(k);
  kv["learning_rate"] = fmt(train.learning_rate);
  kv["p"] = std::to_string(p);
  kv["seed"] = std::to_string(seed);
  kv["squared_distance"] = squared_distance ? "1" : "0";
  kv["standardize"] = standardize ? "1" : "0";
  kv["synth_noise"] = fmt(synth_noise);
  kv["synth_pairs_per_class"] = std::to_string(synth_pairs_per_class);
  kv["synth_prototypes"] = std::to_string(synth_prototypes);
  kv["synth_shift"] = std::to_string(synth_shift);
  kv["synth_side"] = std::to_string(synth_side);
  kv["synth_test_pairs_per_class"] =
      std::to_string(synth_test_pairs_per_class);
  kv["synth_test_prototypes"] = std::to_string(synth_test_prototypes);
  kv["t"] = t ? fmt(*t) : "auto";
  kv["unit_norm_atoms"] = unit_norm_atoms ? "1" : "0";
  kv["val_fraction"] = fmt(train.validation_fraction);
  std::string out;
  for (const auto& [key, value] : kv) out += key + "=" + value + "\n";
  return out;
}

std::uint64_t PipelineConfig::config_hash() const {
  return fnv1a64(canonical_model_keys());
}

void apply_config_line(PipelineConfig& cfg, const std::string& key,
                       const std::string& value) {
  if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
  } else if (key == "out") {
    cfg.out_dir = value;
  } else if (key == "k") {
    cfg.k = parse_int(key, value);
  } else if (key == "alpha") {
    cfg.alpha = parse_double(key, value);
  } else if (key == "beta") {
    cfg.beta = parse_double(key, value);
  } else if (key == "dict_samples") {
    cfg.dict_samples = parse_int(key, value);
  } else if (key == "standardize") {
    cfg.standardize = parse_bool(key, value);
  } else if (key == "unit_norm_atoms") {
    cfg.unit_norm_atoms = parse_bool(key, value);
  } else if (key == "p") {
    cfg.p = parse_int(key, value);
  } else if (key == "t") {
    if (value == "auto") {
      cfg.t.reset();
    } else {
      cfg.t = parse_double(key, value);
    }
  } else if (key == "squared_distance") {
    cfg.squared_distance = parse_bool(key, value);
  } else if (key == "eigen_mode") {
    if (value == "smallest") {
      cfg.eigen_mode = EigenMode::kSmallest;
    } else if (value == "largest") {
      cfg.eigen_mode = EigenMode::kLargest;
    } else {
      throw config_error("config: eigen_mode must be smallest|largest");
    }
  } else if (key == "drop_trivial") {
    cfg.drop_trivial = parse_bool(key, value);
  } else if (key == "arch") {
    cfg.arch = parse_int(key, value);
  } else if (key == "hidden") {
    cfg.hidden.clear();
    for (const auto& tok : split(value, ',')) {
      if (!tok.empty()) cfg.hidden.push_back(parse_int(key, tok));
    }
    cfg.arch = 0;
  } else if (key == "activation") {
    if (value == "relu") {
      cfg.activation = Activation::kRelu;
    } else if (value == "tanh") {
      cfg.activation = Activation::kTanh;
    } else {
      throw config_error("config: activation must be relu|tanh");
    }
  } else if (key == "batch_size") {
    cfg.train.batch_size = parse_int(key, value);
  } else if (key == "epochs") {
    cfg.train.epochs = parse_int(key, value);
  } else if (key == "learning_rate") {
    cfg.train.learning_rate = parse_double(key, value);
  } else if (key == "adam_beta1") {
    cfg.train.adam_beta1 = parse_double(key, value);
  } else if (key == "adam_beta2") {
    cfg.train.adam_beta2 = parse_double(key, value);
  } else if (key == "adam_eps") {
    cfg.train.adam_eps = parse_double(key, value);
  } else if (key == "val_fraction") {
    cfg.train.validation_fraction = parse_double(key, value);
  } else if (key == "synth_prototypes") {
    cfg.synth_prototypes = parse_int(key, value);
  } else if (key == "synth_pairs_per_class") {
    cfg.synth_pairs_per_class = parse_int(key, value);
  } else if (key == "synth_test_prototypes") {
    cfg.synth_test_prototypes = parse_int(key, value);
  } else if (key == "synth_test_pairs_per_class") {
    cfg.synth_test_pairs_per_class = parse_int(key, value);
  } else if (key == "synth_side") {
    cfg.synth_side = parse_int(key, value);
  } else if (key == "synth_noise") {
    cfg.synth_noise = parse_double(key, value);
  } else if (key == "synth_shift") {
    cfg.synth_shift = parse_int(key, value);
  } else if (key == "train_sheet_dir") {
    cfg.train_sheet_dir = value;
  } else if (key == "train_info") {
    cfg.train_info = value;
  } else if (key == "train_matches") {
    cfg.train_matches = value;
  } else if (key == "test_sheet_dir") {
    cfg.test_sheet_dir = value;
  } else if (key == "test_info") {
    cfg.test_info = value;
  } else if (key == "test_matches") {
    cfg.test_matches = value;
  } else if (key == "patch_side") {
    cfg.patch_side = parse_int(key, value);
  } else if (key == "grid") {
    cfg.grid = parse_int(key, value);
  } else if (key == "train_bin") {
    cfg.train_bin = value;
  } else if (key == "train_pairs") {
    cfg.train_pairs = value;
  } else if (key == "test_bin") {
    cfg.test_bin = value;
  } else if (key == "test_pairs") {
    cfg.test_pairs = value;
  } else {
    throw config_error("config: unknown key '" + key + "'");
  }
}

PipelineConfig parse_config_file(const std::string& path) {
  PipelineConfig cfg;
  const std::string text = read_text_file(path);
  std::istringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw config_error(path + ":" + std::to_string(lineno) +
                         ": expected key=value");
    }
    try {
      apply_config_line(cfg, trim(line.substr(0, eq)),
                        trim(line.substr(eq + 1)));
    } catch (const config_error& e) {
      throw config_error(path + ":" + std::to_string(lineno) + ": " +
                         e.what());
    }
  }
  return cfg;
}

StagePaths stage_paths(const PipelineConfig& cfg) {
  const std::string d = cfg.out_dir + "/";
  StagePaths p;
  p.train_bin = cfg.train_bin.empty() ? d + "train.spmp" : cfg.train_bin;
  p.train_pairs =
      cfg.train_pairs.empty() ? d + "train_pairs.csv" : cfg.train_pairs;
  p.test_bin = cfg.test_bin.empty() ? d + "test.spmp" : cfg.test_bin;
  p.test_pairs =
      cfg.test_pairs.empty() ? d + "test_pairs.csv" : cfg.test_pairs;
  p.dict = d + "dict.spmd";
  p.codes_train = d + "codes_train.spmc";
  p.codes_train_pairs = d + "codes_train_pairs.csv";
  p.codes_test = d + "codes_test.spmc";
  p.codes_test_pairs = d + "codes_test_pairs.csv";
  p.model = d + "model.spmn";
  p.history = d + "history.csv";
  p.metrics = d + "metrics.json";
  p.roc_csv = d + "roc.csv";
  p.roc_dat = d + "roc.dat";
  return p;
}

PatchDataset load_photo_tour(const std::string& sheet_dir,
                             const std::string& info_path,
                             const std::string& match_path, int patch_side,
                             int grid) {
  std::vector<std::string> sheets;
  if (!fs::is_directory(sheet_dir)) {
    throw data_error("sheet directory not found: " + sheet_dir);
  }
  for (const auto& entry : fs::directory_iterator(sheet_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".bmp" || ext == ".pgm") {
      sheets.push_back(entry.path().string());
    }
  }
  std::sort(sheets.begin(), sheets.end());
  if (sheets.empty()) {
    throw data_error("no .bmp/.pgm patch sheets in " + sheet_dir);
  }

  // Sheets load in parallel, results merge in path order.
  std::vector<std::vector<Patch>> per_sheet(sheets.size());
  std::optional<std::string> failure;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < sheets.size(); ++i) {
    try {
      per_sheet[i] = load_patch_sheet(sheets[i], patch_side, grid);
    } catch (const std::exception& e) {
#pragma omp critical
      if (!failure) failure = e.what();
    }
  }
  if (failure) throw data_error(*failure);

  PatchDataset ds;
  ds.name = fs::path(sheet_dir).filename().string();
  for (auto& sheet : per_sheet) {
    for (auto& patch : sheet) ds.patches.push_back(std::move(patch));
  }
  const auto point_ids = load_point_ids(info_path);
  if (point_ids.size() > ds.patches.size()) {
    throw data_error("info file lists more patches than the sheets hold");
  }
  ds.patches.resize(point_ids.size());  // last sheet is padded
  ds.pairs = load_match_file(match_path, point_ids);
  ds.validate();
  return ds;
}

namespace {

// With reuse_container the stage prefers a previously materialized SPMP
// container in the output directory; the synth stage itself always
// regenerates so that a dirty output directory cannot leak stale data.
PatchDataset resolve_dataset(const PipelineConfig& cfg, bool train_split,
                             bool reuse_container) {
  const StagePaths paths = stage_paths(cfg);
  const std::string& bin = train_split ? paths.train_bin : paths.test_bin;
  const std::string& prs = train_split ? paths.train_pairs : paths.test_pairs;
  const std::string& sheet_dir =
      train_split ? cfg.train_sheet_dir : cfg.test_sheet_dir;
  if (!sheet_dir.empty()) {
    return load_photo_tour(sheet_dir,
                           train_split ? cfg.train_info : cfg.test_info,
                           train_split ? cfg.train_matches : cfg.test_matches,
                           cfg.patch_side, cfg.grid);
  }
  if (reuse_container && fs::exists(bin)) {
    return load_dataset(bin, prs);
  }
  SynthSpec spec;
  spec.seed = stage_seed(cfg.seed, train_split ? "synth-train" : "synth-test");
  spec.n_prototypes =
      train_split ? cfg.synth_prototypes : cfg.synth_test_prototypes;
  spec.pairs_per_class =
      train_split ? cfg.synth_pairs_per_class : cfg.synth_test_pairs_per_class;
  spec.side = cfg.synth_side;
  spec.noise_sigma = cfg.synth_noise;
  spec.shift_max = cfg.synth_shift;
  return synth_dataset(spec);
}

}  // namespace

void run_synth(const PipelineConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const StagePaths paths = stage_paths(cfg);
  for (bool train_split : {true, false}) {
    PatchDataset ds = resolve_dataset(cfg, train_split, false);
    save_dataset(ds, train_split ? paths.train_bin : paths.test_bin,
                 train_split ? paths.train_pairs : paths.test_pairs);
    std::cout << (train_split ? "train" : "test") << " dataset: "
              << ds.patches.size() << " patches, " << ds.pairs.size()
              << " pairs (" << ds.match_fraction() * 100 << "% matching)\n";
  }
}

void run_learn_dict(const PipelineConfig& cfg, const std::string& dict_path) {
  fs::create_directories(cfg.out_dir);
  const PatchDataset ds = resolve_dataset(cfg, true, true);
  const auto n_patches = static_cast<int>(ds.patches.size());
  if (cfg.dict_samples <= cfg.k) {
    throw config_error(
        "learn-dict: the sample count must exceed the dictionary size "
        "(need dict_samples > k, got dict_samples = " +
        std::to_string(cfg.dict_samples) + ", k = " + std::to_string(cfg.k) +
        ")");
  }
  if (cfg.dict_samples > n_patches) {
    throw config_error("learn-dict: dict_samples = " +
                       std::to_string(cfg.dict_samples) +
                       " exceeds the dataset's " +
                       std::to_string(n_patches) + " patches");
  }

  Rng rng(stage_seed(cfg.seed, "dict-sample"));
  std::vector<int> all(n_patches);
  std::iota(all.begin(), all.end(), 0);
  rng.shuffle(all);
  all.resize(static_cast<std::size_t>(cfg.dict_samples));
  std::sort(all.begin(), all.end());
  std::vector<Patch> sample;
  sample.reserve(all.size());
  for (int idx : all) sample.push_back(ds.patches[static_cast<std::size_t>(idx)]);

  const Eigen::MatrixXd x = patches_to_matrix(sample, cfg.standardize);
  KnnParams knn;
  knn.p = cfg.p;
  knn.t = cfg.t;
  knn.squared_distance = cfg.squared_distance;
  const AffinityGraph g = knn_graph(x, knn);
  const Embedding emb = embed(g, cfg.k, cfg.eigen_mode, cfg.drop_trivial);

  DictionaryFitOptions fit_opts;
  fit_opts.unit_norm_atoms = cfg.unit_norm_atoms;
  Dictionary dict = fit_dictionary(x, emb.y, cfg.alpha, fit_opts);
  dict.meta["dataset"] = ds.name;
  dict.meta["seed"] = std::to_string(cfg.seed);
  dict.meta["p"] = std::to_string(cfg.p);
  dict.meta["t"] = fmt(g.t);
  dict.meta["eigen_mode"] =
      cfg.eigen_mode == EigenMode::kSmallest ? "smallest" : "largest";
  dict.meta["n"] = std::to_string(cfg.dict_samples);
  dict.meta["config_hash"] = std::to_string(cfg.config_hash());
  save_dictionary(dict, dict_path);

  const char* kind = dict.k() > dict.m()   ? "over-complete"
                     : dict.k() == dict.m() ? "complete"
                                            : "under-complete";
  std::cout << "dictionary: m=" << dict.m() << " k=" << dict.k() << " ("
            << kind << "), fitted on n=" << cfg.dict_samples
            << " patches, alpha=" << cfg.alpha << "\n";
}

std::vector<PairSample> make_pair_samples(const CodeFile& codes,
                                          const std::vector<PairLabel>& pairs) {
  std::vector<PairSample> samples;
  samples.reserve(pairs.size());
  const auto n = static_cast<std::int64_t>(codes.codes.size());
  for (const auto& p : pairs) {
    if (p.idx_a < 0 || p.idx_a >= n || p.idx_b < 0 || p.idx_b >= n) {
      throw data_error("pair references a code index out of range");
    }
    samples.push_back({codes.codes[static_cast<std::size_t>(p.idx_a)],
                       codes.codes[static_cast<std::size_t>(p.idx_b)],
                       p.label});
  }
  return samples;
}

EncodeReport run_encode(const PipelineConfig& cfg,
                        const std::string& dict_path,
                        const std::string& data_bin,
                        const std::string& data_pairs,
                        const std::string& codes_path,
                        const std::string& codes_pairs_path) {
  fs::create_directories(cfg.out_dir);
  const Dictionary dict = load_dictionary(dict_path);
  const PatchDataset ds = load_dataset(data_bin, data_pairs);
  if (!ds.patches.empty() && ds.patches.front().dim() != dict.m()) {
    throw config_error("encode: dataset patch dimension " +
                       std::to_string(ds.patches.front().dim()) +
                       " does not match dictionary m = " +
                       std::to_string(dict.m()));
  }

  // Unique referenced patches, ascending; the pair list is reindexed into
  // this code order.
  std::vector<std::int64_t> referenced;
  referenced.reserve(2 * ds.pairs.size());
  for (const auto& p : ds.pairs) {
    referenced.push_back(p.idx_a);
    referenced.push_back(p.idx_b);
  }
  std::sort(referenced.begin(), referenced.end());
  referenced.erase(std::unique(referenced.begin(), referenced.end()),
                   referenced.end());

  std::vector<Patch> used;
  used.reserve(referenced.size());
  for (auto idx : referenced) {
    used.push_back(ds.patches[static_cast<std::size_t>(idx)]);
  }
  const Eigen::MatrixXd x = patches_to_matrix(used, cfg.standardize);
  auto [codes, report] = encode_batch(dict, x, cfg.beta);
  save_codes(codes, dict.k(), cfg.beta, cfg.config_hash(), codes_path);

  std::vector<PairLabel> remapped = ds.pairs;
  auto position = [&](std::int64_t idx) {
    return static_cast<std::int64_t>(
        std::lower_bound(referenced.begin(), referenced.end(), idx) -
        referenced.begin());
  };
  for (auto& p : remapped) {
    p.idx_a = position(p.idx_a);
    p.idx_b = position(p.idx_b);
  }
  save_pair_csv(remapped, codes_pairs_path);

  std::cout << "encoded " << report.n << " patches: mean |support| = "
            << report.mean_support << ", mean reconstruction error = "
            << report.mean_reconstruction_error << " (" << report.seconds
            << " s)\n";
  return report;
}

void run_train(const PipelineConfig& cfg, const std::string& codes_path,
               const std::string& codes_pairs_path,
               const std::string& model_path,
               const std::string& history_path) {
  fs::create_directories(cfg.out_dir);
  const CodeFile codes = load_codes(codes_path);
  const auto pairs = load_pair_csv(codes_pairs_path);
  const auto samples = make_pair_samples(codes, pairs);

  TrainConfig tc = cfg.train;
  tc.seed = stage_seed(cfg.seed, "train");
  auto [params, history] = train(samples, cfg.architecture(), tc);
  save_model(params, tc, cfg.config_hash(), model_path);
  write_text_file(history_path, history.to_csv());

  if (!history.val_accuracy.empty()) {
    const double best =
        *std::max_element(history.val_accuracy.begin(),
                          history.val_accuracy.end());
    std::cout << "trained " << history.val_accuracy.size()
              << " epochs, best validation accuracy " << best << "\n";
  }
}

EvalResult run_eval(const PipelineConfig& cfg, const std::string& model_path,
                    const std::string& codes_path,
                    const std::string& codes_pairs_path, bool force,
                    const std::string& metrics_path,
                    const std::string& roc_csv_path,
                    const std::string& roc_dat_path) {
  fs::create_directories(cfg.out_dir);
  const ModelFile model = load_model(model_path);
  const CodeFile codes = load_codes(codes_path);
  if (2 * codes.k != model.params.input_dim) {
    throw config_error(
        "eval: model input_dim " + std::to_string(model.params.input_dim) +
        " does not match twice the code length k = " + std::to_string(codes.k));
  }
  if (model.config_hash != codes.config_hash) {
    if (!force) {
      throw config_error(
          "eval: model and code artifacts were produced under different "
          "configs (hash mismatch); pass --force to override");
    }
    std::cerr << "eval: config hash mismatch overridden by --force\n";
  }
  const auto pairs = load_pair_csv(codes_pairs_path);
  const auto samples = make_pair_samples(codes, pairs);
  const EvalResult result = evaluate_model(model.params, samples);

  write_text_file(metrics_path, metrics_to_json(result));
  write_text_file(roc_csv_path, roc_to_csv(result.curve));
  if (!roc_dat_path.empty()) {
    write_text_file(roc_dat_path, roc_to_gnuplot(result.curve));
  }
  std::cout << "eval: error@95 = " << result.error95 << ", accuracy = "
            << result.accuracy << " over " << samples.size() << " pairs\n";
  return result;
}

EvalResult run_pipeline(const PipelineConfig& cfg) {
  const StagePaths paths = stage_paths(cfg);
  if (!cfg.train_sheet_dir.empty()) {
    // Materialize photo-tour data as containers so later stages reload
    // uniformly.
    fs::create_directories(cfg.out_dir);
    save_dataset(resolve_dataset(cfg, true, false), paths.train_bin,
                 paths.train_pairs);
    save_dataset(resolve_dataset(cfg, false, false), paths.test_bin,
                 paths.test_pairs);
  } else if (cfg.train_bin.empty()) {
    run_synth(cfg);
  }
  run_learn_dict(cfg, paths.dict);
  run_encode(cfg, paths.dict, paths.train_bin, paths.train_pairs,
             paths.codes_train, paths.codes_train_pairs);
  run_train(cfg, paths.codes_train, paths.codes_train_pairs, paths.model,
            paths.history);
  run_encode(cfg, paths.dict, paths.test_bin, paths.test_pairs,
             paths.codes_test, paths.codes_test_pairs);
  return run_eval(cfg, paths.model, paths.codes_test, paths.codes_test_pairs,
                  false, paths.metrics, paths.roc_csv);
}

}  // namespace spm
