#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "reference/reference.hpp"
#include "spm/errors.hpp"
#include "spm/io_util.hpp"
#include "spm/matcher_net.hpp"
#include "spm/rng.hpp"

namespace fs = std::filesystem;
using namespace spm;

namespace {

std::string temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "spm_net_tests";
  fs::create_directories(dir);
  return (dir / name).string();
}

Eigen::MatrixXd random_batch(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

void zero_params(NetworkParams& p) {
  for (auto& w : p.weights) w.setZero();
  for (auto& b : p.biases) b.setZero();
}

SparseCode one_hot(int k, int idx, double value) {
  SparseCode c;
  c.k = k;
  c.beta = 0.1;
  c.support = {idx};
  c.coeffs = {value};
  return c;
}

double max_rel_error(const Gradients& a, const Gradients& b) {
  double worst = 0;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    for (Eigen::Index i = 0; i < a.weights[l].size(); ++i) {
      const double ga = a.weights[l].reshaped()[i];
      const double gb = b.weights[l].reshaped()[i];
      worst = std::max(worst, std::abs(ga - gb) /
                                  std::max({std::abs(ga), std::abs(gb), 1e-8}));
    }
    for (Eigen::Index i = 0; i < a.biases[l].size(); ++i) {
      worst = std::max(worst,
                       std::abs(a.biases[l][i] - b.biases[l][i]) /
                           std::max({std::abs(a.biases[l][i]),
                                     std::abs(b.biases[l][i]), 1e-8}));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("initialization is deterministic with the documented shapes") {
  const Architecture arch = Architecture::arch2();
  const NetworkParams a = init_network(arch, 2 * 7000, 99);
  const NetworkParams b = init_network(arch, 2 * 7000, 99);
  REQUIRE(a.n_layers() == 2);
  CHECK(a.weights[0].rows() == 1000);
  CHECK(a.weights[0].cols() == 14000);
  CHECK(a.weights[1].rows() == 1);
  CHECK(a.weights[1].cols() == 1000);
  for (int l = 0; l < a.n_layers(); ++l) {
    CHECK(a.weights[l] == b.weights[l]);
    CHECK(a.biases[l].isZero(0.0));
  }
  const NetworkParams c = init_network(arch, 2 * 7000, 100);
  CHECK(a.weights[0] != c.weights[0]);

  const NetworkParams a1 = init_network(Architecture::arch1(), 16, 1);
  REQUIRE(a1.n_layers() == 4);
  CHECK(a1.hidden_sizes() == std::vector<int>{500, 80, 4});
}

TEST_CASE("zero network outputs one half everywhere") {
  NetworkParams p = init_network(Architecture::arch2(), 6, 0);
  zero_params(p);
  Rng rng(1);
  const Eigen::MatrixXd batch = random_batch(rng, 5, 6);
  const Eigen::VectorXd out = forward(p, batch);
  for (Eigen::Index i = 0; i < out.size(); ++i) CHECK(out[i] == 0.5);
}

TEST_CASE("single-layer network is an exact sigmoid") {
  Architecture arch;
  arch.hidden_sizes = {};  // input -> single sigmoid unit
  NetworkParams p = init_network(arch, 3, 7);
  p.weights[0] << 0.5, -1.0, 2.0;
  p.biases[0][0] = 0.25;
  Eigen::MatrixXd batch(1, 3);
  batch << 1.0, 2.0, 3.0;
  const double z = 0.5 * 1.0 - 1.0 * 2.0 + 2.0 * 3.0 + 0.25;
  CHECK(forward(p, batch)[0] ==
        doctest::Approx(1.0 / (1.0 + std::exp(-z))).epsilon(1e-15));
}

TEST_CASE("batch forward equals row-by-row forward") {
  Rng rng(3);
  const NetworkParams p = init_network(Architecture::arch1(), 10, 5);
  const Eigen::MatrixXd batch = random_batch(rng, 9, 10);
  const Eigen::VectorXd all = forward(p, batch);
  for (Eigen::Index i = 0; i < batch.rows(); ++i) {
    const Eigen::VectorXd one = forward(p, batch.row(i));
    CHECK(std::abs(all[i] - one[0]) <= 1e-12);
  }
}

TEST_CASE("forward never mutates parameters and rejects bad shapes") {
  Rng rng(4);
  const NetworkParams p = init_network(Architecture::arch2(), 8, 2);
  const NetworkParams snapshot = p;
  forward(p, random_batch(rng, 3, 8));
  for (int l = 0; l < p.n_layers(); ++l) {
    CHECK(p.weights[l] == snapshot.weights[l]);
    CHECK(p.biases[l] == snapshot.biases[l]);
  }
  CHECK_THROWS_AS(forward(p, random_batch(rng, 3, 9)), config_error);
}

TEST_CASE("bce loss exact values") {
  Eigen::VectorXd pred(2), labels(2);
  pred << 0.5, 0.5;
  labels << 0, 1;
  CHECK(bce_loss(pred, labels) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));

  Eigen::VectorXd one_pred(1), one_label(1);
  one_pred << 0.9;
  one_label << 1;
  CHECK(bce_loss(one_pred, one_label) ==
        doctest::Approx(-std::log(0.9)).epsilon(1e-12));

  // Perfect predictions after clamping; also the upper bound -ln(1e-12).
  Eigen::VectorXd exact(2);
  exact << 0.0, 1.0;
  CHECK(bce_loss(exact, labels) <= -std::log(1e-12) + 1e-9);
  Eigen::VectorXd match(2);
  match << 1e-12, 1.0 - 1e-12;
  CHECK(bce_loss(match, labels) == doctest::Approx(0.0).epsilon(1e-9));
  Eigen::VectorXd wrong(1), y1(1);
  wrong << 0.0;
  y1 << 1;
  CHECK(bce_loss(wrong, y1) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("output-layer delta is prediction minus label") {
  NetworkParams p = init_network(Architecture::arch2(), 4, 0);
  zero_params(p);
  Rng rng(5);
  const Eigen::MatrixXd batch = random_batch(rng, 6, 4);
  const Eigen::VectorXd labels = Eigen::VectorXd::Zero(6);
  const Gradients g = backward(p, batch, labels);
  // Outputs are all 0.5, labels 0: mean bias gradient 0.5 at the output.
  CHECK(g.biases.back()[0] == doctest::Approx(0.5).epsilon(1e-12));

  // Single sample: the raw delta itself.
  Eigen::MatrixXd one = random_batch(rng, 1, 4);
  Eigen::VectorXd y1(1);
  y1 << 1;
  const Gradients g1 = backward(p, one, y1);
  CHECK(g1.biases.back()[0] == doctest::Approx(0.5 - 1.0).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(6);
  SUBCASE("4-3-1 relu net") {
    Architecture arch;
    arch.hidden_sizes = {3};
    const NetworkParams p = init_network(arch, 4, 8);
    const Eigen::MatrixXd batch = random_batch(rng, 7, 4);
    Eigen::VectorXd labels(7);
    for (int i = 0; i < 7; ++i) labels[i] = static_cast<double>(i % 2);
    const Gradients analytic = backward(p, batch, labels);
    const Gradients fd =
        reference::finite_difference_gradients(p, batch, labels);
    CHECK(max_rel_error(analytic, fd) <= 1e-5);
  }
  SUBCASE("tanh variant") {
    Architecture arch;
    arch.hidden_sizes = {5, 3};
    arch.activation = Activation::kTanh;
    const NetworkParams p = init_network(arch, 6, 9);
    const Eigen::MatrixXd batch = random_batch(rng, 5, 6);
    Eigen::VectorXd labels(5);
    for (int i = 0; i < 5; ++i) labels[i] = static_cast<double>(i % 2);
    const Gradients analytic = backward(p, batch, labels);
    const Gradients fd =
        reference::finite_difference_gradients(p, batch, labels);
    CHECK(max_rel_error(analytic, fd) <= 1e-5);
  }
}

TEST_CASE("duplicated batch leaves the mean gradient unchanged") {
  Rng rng(7);
  Architecture arch;
  arch.hidden_sizes = {4};
  const NetworkParams p = init_network(arch, 5, 3);
  const Eigen::MatrixXd batch = random_batch(rng, 4, 5);
  Eigen::VectorXd labels(4);
  labels << 1, 0, 1, 0;
  Eigen::MatrixXd doubled(8, 5);
  doubled << batch, batch;
  Eigen::VectorXd doubled_labels(8);
  doubled_labels << labels, labels;
  const Gradients g1 = backward(p, batch, labels);
  const Gradients g2 = backward(p, doubled, doubled_labels);
  CHECK(max_rel_error(g1, g2) <= 1e-12);
}

TEST_CASE("adam updates") {
  Architecture arch;
  arch.hidden_sizes = {};
  TrainConfig cfg;
  cfg.learning_rate = 0.01;

  SUBCASE("zero gradient leaves parameters untouched") {
    NetworkParams p = init_network(arch, 2, 4);
    const NetworkParams before = p;
    AdamState state = AdamState::zeros_like(p);
    Gradients g;
    g.weights = {Eigen::MatrixXd::Zero(1, 2)};
    g.biases = {Eigen::VectorXd::Zero(1)};
    adam_step(p, g, state, cfg, 1);
    CHECK(p.weights[0] == before.weights[0]);
    CHECK(p.biases[0] == before.biases[0]);
  }

  SUBCASE("first step is the sign-scaled learning rate") {
    NetworkParams p = init_network(arch, 1, 4);
    zero_params(p);
    AdamState state = AdamState::zeros_like(p);
    Gradients g;
    g.weights = {Eigen::MatrixXd::Constant(1, 1, 0.37)};
    g.biases = {Eigen::VectorXd::Zero(1)};
    adam_step(p, g, state, cfg, 1);
    const double expect = -cfg.learning_rate * 0.37 / (0.37 + cfg.adam_eps);
    CHECK(p.weights[0](0, 0) == doctest::Approx(expect).epsilon(1e-12));
  }

  SUBCASE("step index must start at one") {
    NetworkParams p = init_network(arch, 1, 4);
    AdamState state = AdamState::zeros_like(p);
    Gradients g;
    g.weights = {Eigen::MatrixXd::Zero(1, 1)};
    g.biases = {Eigen::VectorXd::Zero(1)};
    CHECK_THROWS_AS(adam_step(p, g, state, cfg, 0), config_error);
  }
}

TEST_CASE("stratified split preserves the class ratio within one sample") {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 40 + static_cast<int>(rng.bounded(200));
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      labels.push_back(rng.uniform01() < 0.35 ? 1 : 0);
    }
    const double frac = 0.2;
    const auto [train_idx, val_idx] = stratified_split(labels, frac, trial);
    CHECK(train_idx.size() + val_idx.size() == labels.size());
    int pos_total = 0, pos_val = 0;
    for (int l : labels) pos_total += l;
    for (int i : val_idx) pos_val += labels[static_cast<std::size_t>(i)];
    const double want = frac * pos_total;
    CHECK(std::abs(pos_val - want) <= 1.0);
    // No index lost or duplicated.
    std::vector<char> seen(labels.size(), 0);
    for (int i : train_idx) seen[static_cast<std::size_t>(i)] += 1;
    for (int i : val_idx) seen[static_cast<std::size_t>(i)] += 1;
    for (char s : seen) CHECK(s == 1);
  }
}

namespace {

// Linearly separable fixture: matching pairs carry positive one-hot codes,
// non-matching pairs negative ones.
std::vector<PairSample> separable_pairs(int n, int k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PairSample> samples;
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    const int ia = static_cast<int>(rng.bounded(k));
    const int ib = static_cast<int>(rng.bounded(k));
    const double sign = label == 1 ? 1.0 : -1.0;
    samples.push_back({one_hot(k, ia, sign * (0.5 + rng.uniform01())),
                       one_hot(k, ib, sign * (0.5 + rng.uniform01())), label});
  }
  return samples;
}

}  // namespace

TEST_CASE("training learns a separable toy problem") {
  const auto samples = separable_pairs(200, 4, 77);
  Architecture arch;
  arch.hidden_sizes = {8};
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 16;
  cfg.learning_rate = 5e-3;
  cfg.seed = 5;
  const auto [params, history] = train(samples, arch, cfg);
  REQUIRE(history.train_loss.size() == 50);
  CHECK(history.train_loss.back() < 0.1 * history.train_loss.front());
  CHECK(history.val_accuracy.back() > 0.9);

  // A matching pair from the trained model scores above one half.
  for (const auto& s : samples) {
    if (s.label == 1) {
      CHECK(predict_pair(params, s.code_a, s.code_b) > 0.5);
      break;
    }
  }

  SUBCASE("same seed reproduces the whole history") {
    const auto [params2, history2] = train(samples, arch, cfg);
    CHECK(history2.train_loss == history.train_loss);
    CHECK(history2.train_accuracy == history.train_accuracy);
    CHECK(history2.val_accuracy == history.val_accuracy);
    for (int l = 0; l < params.n_layers(); ++l) {
      CHECK(params2.weights[l] == params.weights[l]);
    }
  }
}

TEST_CASE("zero epochs returns the initial network and empty history") {
  const auto samples = separable_pairs(40, 4, 3);
  Architecture arch;
  arch.hidden_sizes = {5};
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 9;
  const auto [params, history] = train(samples, arch, cfg);
  CHECK(history.train_loss.empty());
  const NetworkParams fresh =
      init_network(arch, 8, stage_seed(cfg.seed, "train-init"));
  for (int l = 0; l < params.n_layers(); ++l) {
    CHECK(params.weights[l] == fresh.weights[l]);
  }
}

TEST_CASE("single-class training data is refused") {
  std::vector<PairSample> samples;
  for (int i = 0; i < 10; ++i) {
    samples.push_back({one_hot(4, 0, 1.0), one_hot(4, 1, 1.0), 1});
  }
  Architecture arch;
  arch.hidden_sizes = {3};
  CHECK_THROWS_AS(train(samples, arch, TrainConfig{}), config_error);
}

TEST_CASE("predict_pair semantics") {
  NetworkParams p = init_network(Architecture::arch2(), 8, 1);

  SUBCASE("zero network scores any pair at one half") {
    zero_params(p);
    CHECK(predict_pair(p, one_hot(4, 0, 1.0), one_hot(4, 2, -1.0)) == 0.5);
  }

  SUBCASE("concatenation is ordered, so swapping arguments may change it") {
    const SparseCode a = one_hot(4, 0, 1.0);
    const SparseCode b = one_hot(4, 3, -2.0);
    CHECK(predict_pair(p, a, b) != predict_pair(p, b, a));
  }

  SUBCASE("length mismatches are shape errors") {
    CHECK_THROWS_AS(predict_pair(p, one_hot(4, 0, 1.0), one_hot(5, 0, 1.0)),
                    config_error);
    CHECK_THROWS_AS(predict_pair(p, one_hot(6, 0, 1.0), one_hot(6, 0, 1.0)),
                    config_error);
  }
}

TEST_CASE("model checkpoint round trip") {
  const auto samples = separable_pairs(60, 3, 21);
  Architecture arch;
  arch.hidden_sizes = {4};
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 2;
  const auto [params, history] = train(samples, arch, cfg);
  const std::string path = temp_path("model.spmn");
  save_model(params, cfg, 0xabcdull, path);
  const ModelFile back = load_model(path);
  CHECK(back.config_hash == 0xabcdull);
  CHECK(back.params.input_dim == params.input_dim);
  CHECK(back.params.activation == params.activation);
  REQUIRE(back.params.n_layers() == params.n_layers());
  for (int l = 0; l < params.n_layers(); ++l) {
    CHECK(back.params.weights[l] == params.weights[l]);  // bit-exact
    CHECK(back.params.biases[l] == params.biases[l]);
  }
  CHECK(back.train_config.epochs == cfg.epochs);
  CHECK(back.train_config.learning_rate == cfg.learning_rate);

  SUBCASE("corrupted checkpoint is rejected") {
    std::string data = read_text_file(path);
    data[40] ^= 0x10;
    write_text_file(path, data);
    CHECK_THROWS_AS(load_model(path), data_error);
  }
}

TEST_CASE("history csv format") {
  TrainHistory h;
  h.train_loss = {0.5, 0.25};
  h.train_accuracy = {0.75, 0.875};
  h.val_accuracy = {0.5, 0.75};
  const std::string csv = h.to_csv();
  CHECK(csv.find("epoch,train_loss,train_acc,val_acc\n") == 0);
  CHECK(csv.find("1,0.5,0.75,0.5\n") != std::string::npos);
  CHECK(csv.find("2,0.25,0.875,0.75\n") != std::string::npos);
}
