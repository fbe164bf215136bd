#ifndef SPM_SPARSE_CODER_HPP
#define SPM_SPARSE_CODER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spm/dictionary.hpp"

namespace spm {

// Solution of  min_c |x - B c|^2 + beta |c|_1  stored by support.
struct SparseCode {
  int k = 0;                  // code length (dictionary atoms)
  std::vector<int> support;   // sorted indices of nonzero coefficients
  std::vector<double> coeffs;  // values matching support
  double beta = 0;

  Eigen::VectorXd to_dense() const;
  int nnz() const { return static_cast<int>(support.size()); }
};

struct EncodeReport {
  double mean_reconstruction_error = 0;  // mean |x - B c|_2
  double mean_support = 0;
  double seconds = 0;
  int n = 0;
};

// Solves the lasso with the least-angle-regression homotopy (the lasso
// variant: active coefficients may leave the set when they cross zero),
// stopping where the equi-correlation level reaches beta/2. The returned
// code satisfies the stationarity conditions of the objective above:
//   on the support   2 b_j'(x - B c) = beta * sign(c_j),
//   off the support |2 b_j'(x - B c)| <= beta (+ small slack).
// Equi-correlation ties break toward the lowest column index; all-zero
// dictionary columns are skipped with a warning.
SparseCode lars_lasso(const Dictionary& d, const Eigen::VectorXd& x,
                      double beta);

// Encodes every column of x. Columns are independent, so the loop is
// parallel; the result order always matches the input order and each code
// equals the one a direct lars_lasso call produces.
std::pair<std::vector<SparseCode>, EncodeReport> encode_batch(
    const Dictionary& d, const Eigen::MatrixXd& x, double beta);

// Code container: magic "SPMC", version u32, k u32, beta f64, n u32,
// config hash u64, then per code (u32 nnz, nnz x (u32 index, f64 value)),
// trailing CRC32.
void save_codes(const std::vector<SparseCode>& codes, int k, double beta,
                std::uint64_t config_hash, const std::string& path);
struct CodeFile {
  std::vector<SparseCode> codes;
  int k = 0;
  double beta = 0;
  std::uint64_t config_hash = 0;
};
CodeFile load_codes(const std::string& path);

}  // namespace spm

#endif
