#ifndef SPM_MATCHER_NET_HPP
#define SPM_MATCHER_NET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spm/sparse_coder.hpp"

namespace spm {

// One labeled training/eval unit: the two codes of a patch pair.
struct PairSample {
  SparseCode code_a;
  SparseCode code_b;
  int label = 0;
};

enum class Activation { kRelu, kTanh };

// Fully-connected matcher over concatenated codes. Two stock layouts:
// arch1 = hidden [500, 80, 4], arch2 = hidden [1000]; both end in a single
// sigmoid unit.
struct Architecture {
  std::vector<int> hidden_sizes;
  Activation activation = Activation::kRelu;

  static Architecture arch1() { return {{500, 80, 4}, Activation::kRelu}; }
  static Architecture arch2() { return {{1000}, Activation::kRelu}; }
};

struct NetworkParams {
  std::vector<Eigen::MatrixXd> weights;  // layer l: (out x in)
  std::vector<Eigen::VectorXd> biases;
  Activation activation = Activation::kRelu;
  int input_dim = 0;
  std::uint64_t seed = 0;

  int n_layers() const { return static_cast<int>(weights.size()); }
  std::vector<int> hidden_sizes() const;
};

// Gradients mirror the parameter shapes.
struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

struct AdamState {
  std::vector<Eigen::MatrixXd> m_w, v_w;
  std::vector<Eigen::VectorXd> m_b, v_b;

  static AdamState zeros_like(const NetworkParams& p);
};

struct TrainConfig {
  int batch_size = 64;
  int epochs = 50;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double validation_fraction = 0.2;  // 1:4 validation:training
  std::uint64_t seed = 0;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> train_accuracy;
  std::vector<double> val_accuracy;

  std::string to_csv() const;  // epoch,train_loss,train_acc,val_acc
};

// Fan-in-scaled uniform weights, zero biases, deterministic in the seed.
NetworkParams init_network(const Architecture& arch, int input_dim,
                           std::uint64_t seed);

// Seeded per-class shuffle; the leading fraction of each class validates,
// so class ratios in both partitions match the dataset to within one
// sample. Returns (train indices, validation indices).
std::pair<std::vector<int>, std::vector<int>> stratified_split(
    const std::vector<int>& labels, double val_fraction, std::uint64_t seed);

// batch is (B x input_dim); returns B sigmoid outputs, strictly in (0,1).
Eigen::VectorXd forward(const NetworkParams& p, const Eigen::MatrixXd& batch);

// Mean binary cross-entropy; predictions clamped to [1e-12, 1 - 1e-12]
// before the logs.
double bce_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& labels);

// Gradients of the mean BCE over the batch w.r.t. every parameter.
Gradients backward(const NetworkParams& p, const Eigen::MatrixXd& batch,
                   const Eigen::VectorXd& labels);

// Standard Adam with bias correction; step_index starts at 1.
void adam_step(NetworkParams& p, const Gradients& g, AdamState& state,
               const TrainConfig& cfg, int step_index);

// Seed-deterministic stratified split, seeded per-epoch shuffling,
// best-validation-accuracy checkpointing.
std::pair<NetworkParams, TrainHistory> train(
    const std::vector<PairSample>& samples, const Architecture& arch,
    const TrainConfig& cfg);

// Densifies the two codes, concatenates a-then-b and forwards.
double predict_pair(const NetworkParams& p, const SparseCode& code_a,
                    const SparseCode& code_b);

// Checkpoint format: magic "SPMN", version u32, input_dim u32, activation
// u8, hidden-layer count + sizes, per-layer row-major f64 weights and
// biases, training-config echo, config hash u64, trailing CRC32.
void save_model(const NetworkParams& p, const TrainConfig& cfg,
                std::uint64_t config_hash, const std::string& path);
struct ModelFile {
  NetworkParams params;
  TrainConfig train_config;
  std::uint64_t config_hash = 0;
};
ModelFile load_model(const std::string& path);

}  // namespace spm

#endif
