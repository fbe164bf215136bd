// Serial reference implementations vs the OpenMP kernels on the three
// data-parallel hot spots: neighbor-graph construction, batch sparse
// encoding and pair scoring.
//
//   ./spm_bench                     # all comparisons
//   ./spm_bench --benchmark_filter=encode

#include <benchmark/benchmark.h>

#include "reference/reference.hpp"
#include "spm/graph.hpp"
#include "spm/matcher_net.hpp"
#include "spm/rng.hpp"
#include "spm/sparse_coder.hpp"

namespace {

Eigen::MatrixXd random_matrix(std::uint64_t seed, int rows, int cols) {
  spm::Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  }
  return m;
}

void bm_knn_serial(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd x = random_matrix(1, 64, n);
  spm::KnnParams params;
  params.p = 5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(spm::reference::knn_graph_bruteforce(x, params));
  }
}

void bm_knn_parallel(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd x = random_matrix(1, 64, n);
  spm::KnnParams params;
  params.p = 5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(spm::knn_graph(x, params));
  }
}

spm::Dictionary bench_dictionary(int m, int k) {
  spm::Dictionary d;
  d.b = random_matrix(2, m, k);
  return d;
}

void bm_encode_serial(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const spm::Dictionary d = bench_dictionary(64, 96);
  const Eigen::MatrixXd x = random_matrix(3, 64, n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        spm::reference::encode_batch_serial(d, x, 0.1));
  }
}

void bm_encode_parallel(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const spm::Dictionary d = bench_dictionary(64, 96);
  const Eigen::MatrixXd x = random_matrix(3, 64, n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(spm::encode_batch(d, x, 0.1));
  }
}

std::vector<spm::PairSample> bench_pairs(int n, int k) {
  spm::Rng rng(4);
  std::vector<spm::PairSample> pairs;
  for (int i = 0; i < n; ++i) {
    spm::SparseCode a, b;
    a.k = b.k = k;
    for (int t = 0; t < 8; ++t) {
      a.support.push_back(t * 3 % k);
      a.coeffs.push_back(rng.normal());
      b.support.push_back(t * 5 % k);
      b.coeffs.push_back(rng.normal());
    }
    std::sort(a.support.begin(), a.support.end());
    std::sort(b.support.begin(), b.support.end());
    pairs.push_back({a, b, i % 2});
  }
  return pairs;
}

void bm_score_serial(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const auto pairs = bench_pairs(n, 96);
  const spm::NetworkParams p =
      spm::init_network(spm::Architecture{{200}, spm::Activation::kRelu},
                        192, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(spm::reference::score_pairs_serial(p, pairs));
  }
}

void bm_score_parallel(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  auto pairs = bench_pairs(n, 96);
  const spm::NetworkParams p =
      spm::init_network(spm::Architecture{{200}, spm::Activation::kRelu},
                        192, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(spm::evaluate_model(p, pairs));
  }
}

}  // namespace

BENCHMARK(bm_knn_serial)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_knn_parallel)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_encode_serial)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_encode_parallel)
    ->Arg(128)
    ->Arg(512)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(bm_score_serial)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_score_parallel)->Arg(2048)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
