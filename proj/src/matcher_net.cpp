#include "spm/matcher_net.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spm/errors.hpp"
#include "spm/io_util.hpp"
#include "spm/rng.hpp"

namespace spm {

namespace {

constexpr std::uint32_t kModelVersion = 1;
constexpr double kClamp = 1e-12;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::kRelu) return z.cwiseMax(0.0);
  return z.array().tanh().matrix();
}

Eigen::MatrixXd activate_grad(const Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::kRelu) {
    return (z.array() > 0.0).cast<double>().matrix();
  }
  return (1.0 - z.array().tanh().square()).matrix();
}

// Hidden pre-activations plus the final sigmoid output.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> pre;  // z_l = a_{l-1} W_l' + 1 b_l'
  Eigen::VectorXd output;
};

ForwardTrace forward_trace(const NetworkParams& p,
                           const Eigen::MatrixXd& batch) {
  if (batch.cols() != p.input_dim) {
    throw config_error("forward: batch width " + std::to_string(batch.cols()) +
                       " does not match input_dim " +
                       std::to_string(p.input_dim));
  }
  ForwardTrace t;
  Eigen::MatrixXd a = batch;
  const int n_layers = p.n_layers();
  for (int l = 0; l < n_layers; ++l) {
    if (p.weights[l].cols() != a.cols()) {
      throw config_error("forward: shape mismatch entering layer " +
                         std::to_string(l));
    }
    Eigen::MatrixXd z = a * p.weights[l].transpose();
    z.rowwise() += p.biases[l].transpose();
    t.pre.push_back(z);
    if (l + 1 < n_layers) a = activate(z, p.activation);
  }
  const auto& zout = t.pre.back();
  t.output.resize(zout.rows());
  for (Eigen::Index i = 0; i < zout.rows(); ++i) {
    t.output[i] = sigmoid(zout(i, 0));
  }
  return t;
}

}  // namespace

std::vector<int> NetworkParams::hidden_sizes() const {
  std::vector<int> sizes;
  for (int l = 0; l + 1 < n_layers(); ++l) {
    sizes.push_back(static_cast<int>(weights[l].rows()));
  }
  return sizes;
}

AdamState AdamState::zeros_like(const NetworkParams& p) {
  AdamState s;
  for (int l = 0; l < p.n_layers(); ++l) {
    s.m_w.push_back(Eigen::MatrixXd::Zero(p.weights[l].rows(),
                                          p.weights[l].cols()));
    s.v_w.push_back(Eigen::MatrixXd::Zero(p.weights[l].rows(),
                                          p.weights[l].cols()));
    s.m_b.push_back(Eigen::VectorXd::Zero(p.biases[l].size()));
    s.v_b.push_back(Eigen::VectorXd::Zero(p.biases[l].size()));
  }
  return s;
}

std::string TrainHistory::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,train_loss,train_acc,val_acc\n";
  for (std::size_t e = 0; e < train_loss.size(); ++e) {
    out << e + 1 << ',' << train_loss[e] << ',' << train_accuracy[e] << ','
        << val_accuracy[e] << '\n';
  }
  return out.str();
}

NetworkParams init_network(const Architecture& arch, int input_dim,
                           std::uint64_t seed) {
  if (input_dim < 1) throw config_error("init_network: input_dim must be >= 1");
  for (int h : arch.hidden_sizes) {
    if (h < 1) throw config_error("init_network: hidden sizes must be >= 1");
  }
  NetworkParams p;
  p.activation = arch.activation;
  p.input_dim = input_dim;
  p.seed = seed;
  Rng rng(seed);
  int fan_in = input_dim;
  std::vector<int> outs = arch.hidden_sizes;
  outs.push_back(1);
  for (int out : outs) {
    const double bound = std::sqrt(1.0 / fan_in);
    Eigen::MatrixXd w(out, fan_in);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        w(i, j) = rng.uniform(-bound, bound);
      }
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(out));
    fan_in = out;
  }
  return p;
}

Eigen::VectorXd forward(const NetworkParams& p, const Eigen::MatrixXd& batch) {
  return forward_trace(p, batch).output;
}

double bce_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& labels) {
  if (pred.size() != labels.size() || pred.size() == 0) {
    throw config_error("bce_loss: prediction/label length mismatch");
  }
  double sum = 0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double y = labels[i];
    const double q = std::clamp(pred[i], kClamp, 1.0 - kClamp);
    sum += y * std::log(q) + (1.0 - y) * std::log(1.0 - q);
  }
  return -sum / static_cast<double>(pred.size());
}

Gradients backward(const NetworkParams& p, const Eigen::MatrixXd& batch,
                   const Eigen::VectorXd& labels) {
  if (labels.size() != batch.rows()) {
    throw config_error("backward: label count does not match batch rows");
  }
  const ForwardTrace trace = forward_trace(p, batch);
  const int n_layers = p.n_layers();
  const auto n = static_cast<double>(batch.rows());

  Gradients g;
  g.weights.resize(n_layers);
  g.biases.resize(n_layers);

  // Sigmoid + BCE collapse: dE/dz_out = (prediction - label) / N.
  Eigen::MatrixXd delta(batch.rows(), 1);
  for (Eigen::Index i = 0; i < batch.rows(); ++i) {
    delta(i, 0) = (trace.output[i] - labels[i]) / n;
  }

  for (int l = n_layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd& a_prev =
        l == 0 ? batch : activate(trace.pre[l - 1], p.activation);
    g.weights[l] = delta.transpose() * a_prev;
    g.biases[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      delta = (delta * p.weights[l])
                  .cwiseProduct(activate_grad(trace.pre[l - 1], p.activation));
    }
  }
  return g;
}

void adam_step(NetworkParams& p, const Gradients& g, AdamState& state,
               const TrainConfig& cfg, int step_index) {
  if (step_index < 1) throw config_error("adam_step: step_index starts at 1");
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double corr1 = 1.0 - std::pow(b1, step_index);
  const double corr2 = 1.0 - std::pow(b2, step_index);
  for (int l = 0; l < p.n_layers(); ++l) {
    state.m_w[l] = b1 * state.m_w[l] + (1 - b1) * g.weights[l];
    state.v_w[l] =
        b2 * state.v_w[l] + (1 - b2) * g.weights[l].cwiseProduct(g.weights[l]);
    p.weights[l].array() -=
        cfg.learning_rate * (state.m_w[l].array() / corr1) /
        ((state.v_w[l].array() / corr2).sqrt() + cfg.adam_eps);

    state.m_b[l] = b1 * state.m_b[l] + (1 - b1) * g.biases[l];
    state.v_b[l] =
        b2 * state.v_b[l] + (1 - b2) * g.biases[l].cwiseProduct(g.biases[l]);
    p.biases[l].array() -= cfg.learning_rate * (state.m_b[l].array() / corr1) /
                           ((state.v_b[l].array() / corr2).sqrt() + cfg.adam_eps);
  }
}

namespace {

Eigen::MatrixXd densify_batch(const std::vector<PairSample>& samples,
                              const std::vector<int>& idx, int lo, int hi,
                              int input_dim) {
  Eigen::MatrixXd batch = Eigen::MatrixXd::Zero(hi - lo, input_dim);
  const int k = input_dim / 2;
  for (int r = lo; r < hi; ++r) {
    const PairSample& s = samples[static_cast<std::size_t>(idx[r])];
    for (int t = 0; t < s.code_a.nnz(); ++t) {
      batch(r - lo, s.code_a.support[t]) = s.code_a.coeffs[t];
    }
    for (int t = 0; t < s.code_b.nnz(); ++t) {
      batch(r - lo, k + s.code_b.support[t]) = s.code_b.coeffs[t];
    }
  }
  return batch;
}

Eigen::VectorXd batch_labels(const std::vector<PairSample>& samples,
                             const std::vector<int>& idx, int lo, int hi) {
  Eigen::VectorXd y(hi - lo);
  for (int r = lo; r < hi; ++r) {
    y[r - lo] = samples[static_cast<std::size_t>(idx[r])].label;
  }
  return y;
}

// Loss and 0.5-threshold accuracy over an index set, evaluated in batches
// so full-scale code sets never densify all at once.
std::pair<double, double> evaluate_split(const NetworkParams& p,
                                         const std::vector<PairSample>& samples,
                                         const std::vector<int>& idx,
                                         int batch_size) {
  double loss_sum = 0;
  Eigen::Index correct = 0;
  const int n = static_cast<int>(idx.size());
  for (int lo = 0; lo < n; lo += batch_size) {
    const int hi = std::min(n, lo + batch_size);
    const Eigen::MatrixXd batch =
        densify_batch(samples, idx, lo, hi, p.input_dim);
    const Eigen::VectorXd y = batch_labels(samples, idx, lo, hi);
    const Eigen::VectorXd out = forward(p, batch);
    loss_sum += bce_loss(out, y) * (hi - lo);
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      correct += ((out[i] >= 0.5 ? 1.0 : 0.0) == y[i]) ? 1 : 0;
    }
  }
  if (n == 0) return {0.0, 0.0};
  return {loss_sum / n, static_cast<double>(correct) / n};
}

}  // namespace

std::pair<std::vector<int>, std::vector<int>> stratified_split(
    const std::vector<int>& labels, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0 && val_fraction < 1)) {
    throw config_error("split: validation fraction must lie in (0,1)");
  }
  std::vector<int> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] == 1 ? pos : neg).push_back(static_cast<int>(i));
  }
  Rng rng(seed);
  rng.shuffle(pos);
  rng.shuffle(neg);
  std::vector<int> train_idx, val_idx;
  auto take = [&](std::vector<int>& cls) {
    const auto n_val = static_cast<std::size_t>(
        std::llround(val_fraction * static_cast<double>(cls.size())));
    for (std::size_t i = 0; i < cls.size(); ++i) {
      (i < n_val ? val_idx : train_idx).push_back(cls[i]);
    }
  };
  take(pos);
  take(neg);
  return {std::move(train_idx), std::move(val_idx)};
}

std::pair<NetworkParams, TrainHistory> train(
    const std::vector<PairSample>& samples, const Architecture& arch,
    const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw config_error("train: batch_size must be >= 1");
  if (!(cfg.learning_rate > 0)) throw config_error("train: lr must be > 0");
  if (samples.empty()) throw config_error("train: empty dataset");

  const int k = samples.front().code_a.k;
  std::vector<int> labels;
  labels.reserve(samples.size());
  std::size_t n_pos = 0;
  for (const auto& s : samples) {
    if (s.code_a.k != k || s.code_b.k != k) {
      throw config_error("train: inconsistent code lengths in dataset");
    }
    labels.push_back(s.label);
    n_pos += s.label == 1 ? 1u : 0u;
  }
  if (n_pos < 2 || samples.size() - n_pos < 2) {
    throw config_error(
        "train: need at least two samples of each class, got " +
        std::to_string(n_pos) + " matching / " +
        std::to_string(samples.size() - n_pos) + " non-matching");
  }

  auto [train_idx, val_idx] = stratified_split(
      labels, cfg.validation_fraction, stage_seed(cfg.seed, "train-split"));
  if (train_idx.empty() || val_idx.empty()) {
    throw config_error("train: split left an empty partition");
  }

  NetworkParams params =
      init_network(arch, 2 * k, stage_seed(cfg.seed, "train-init"));
  AdamState adam = AdamState::zeros_like(params);
  TrainHistory history;
  NetworkParams best = params;
  double best_val = -1;

  Rng shuffle_rng(stage_seed(cfg.seed, "train-shuffle"));
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(train_idx);
    const int n_train = static_cast<int>(train_idx.size());
    for (int lo = 0; lo < n_train; lo += cfg.batch_size) {
      const int hi = std::min(n_train, lo + cfg.batch_size);
      const Eigen::MatrixXd batch =
          densify_batch(samples, train_idx, lo, hi, params.input_dim);
      const Eigen::VectorXd y = batch_labels(samples, train_idx, lo, hi);
      const Gradients g = backward(params, batch, y);
      adam_step(params, g, adam, cfg, ++step);
    }
    const auto [train_loss, train_acc] =
        evaluate_split(params, samples, train_idx, cfg.batch_size);
    const auto [val_loss, val_acc] =
        evaluate_split(params, samples, val_idx, cfg.batch_size);
    (void)val_loss;
    history.train_loss.push_back(train_loss);
    history.train_accuracy.push_back(train_acc);
    history.val_accuracy.push_back(val_acc);
    if (val_acc > best_val) {
      best_val = val_acc;
      best = params;
    }
  }
  if (cfg.epochs == 0) best = params;
  return {std::move(best), std::move(history)};
}

double predict_pair(const NetworkParams& p, const SparseCode& code_a,
                    const SparseCode& code_b) {
  if (code_a.k != code_b.k || 2 * code_a.k != p.input_dim) {
    throw config_error("predict_pair: code lengths " +
                       std::to_string(code_a.k) + "/" +
                       std::to_string(code_b.k) +
                       " do not match network input_dim " +
                       std::to_string(p.input_dim));
  }
  Eigen::MatrixXd row = Eigen::MatrixXd::Zero(1, p.input_dim);
  for (int t = 0; t < code_a.nnz(); ++t) {
    row(0, code_a.support[t]) = code_a.coeffs[t];
  }
  for (int t = 0; t < code_b.nnz(); ++t) {
    row(0, code_a.k + code_b.support[t]) = code_b.coeffs[t];
  }
  return forward(p, row)[0];
}

void save_model(const NetworkParams& p, const TrainConfig& cfg,
                std::uint64_t config_hash, const std::string& path) {
  BinaryWriter w;
  w.bytes("SPMN", 4);
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(p.input_dim));
  w.u8(p.activation == Activation::kRelu ? 0 : 1);
  w.u64(p.seed);
  const auto hidden = p.hidden_sizes();
  w.u32(static_cast<std::uint32_t>(hidden.size()));
  for (int h : hidden) w.u32(static_cast<std::uint32_t>(h));
  for (int l = 0; l < p.n_layers(); ++l) {
    const auto& wm = p.weights[l];
    for (Eigen::Index i = 0; i < wm.rows(); ++i) {
      for (Eigen::Index j = 0; j < wm.cols(); ++j) w.f64(wm(i, j));
    }
    for (Eigen::Index i = 0; i < p.biases[l].size(); ++i) {
      w.f64(p.biases[l][i]);
    }
  }
  w.u32(static_cast<std::uint32_t>(cfg.batch_size));
  w.u32(static_cast<std::uint32_t>(cfg.epochs));
  w.f64(cfg.learning_rate);
  w.f64(cfg.adam_beta1);
  w.f64(cfg.adam_beta2);
  w.f64(cfg.adam_eps);
  w.f64(cfg.validation_fraction);
  w.u64(cfg.seed);
  w.u64(config_hash);
  w.commit(path);
}

ModelFile load_model(const std::string& path) {
  BinaryReader r(path, "SPMN");
  const std::uint32_t version = r.u32();
  if (version != kModelVersion) {
    throw data_error("unsupported model version " + std::to_string(version) +
                     " in " + path);
  }
  ModelFile f;
  f.params.input_dim = static_cast<int>(r.u32());
  f.params.activation = r.u8() == 0 ? Activation::kRelu : Activation::kTanh;
  f.params.seed = r.u64();
  const std::uint32_t n_hidden = r.u32();
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i < n_hidden; ++i) {
    sizes.push_back(static_cast<int>(r.u32()));
  }
  sizes.push_back(1);
  int fan_in = f.params.input_dim;
  for (int out : sizes) {
    Eigen::MatrixXd wm(out, fan_in);
    for (Eigen::Index i = 0; i < wm.rows(); ++i) {
      for (Eigen::Index j = 0; j < wm.cols(); ++j) wm(i, j) = r.f64();
    }
    Eigen::VectorXd bv(out);
    for (int i = 0; i < out; ++i) bv[i] = r.f64();
    f.params.weights.push_back(std::move(wm));
    f.params.biases.push_back(std::move(bv));
    fan_in = out;
  }
  f.train_config.batch_size = static_cast<int>(r.u32());
  f.train_config.epochs = static_cast<int>(r.u32());
  f.train_config.learning_rate = r.f64();
  f.train_config.adam_beta1 = r.f64();
  f.train_config.adam_beta2 = r.f64();
  f.train_config.adam_eps = r.f64();
  f.train_config.validation_fraction = r.f64();
  f.train_config.seed = r.u64();
  f.config_hash = r.u64();
  return f;
}

}  // namespace spm
