#ifndef SPM_DICTIONARY_HPP
#define SPM_DICTIONARY_HPP

#include <map>
#include <string>

#include <Eigen/Core>

namespace spm {

// Over-complete basis fit against a spectral embedding target:
//   B = (X X' + alpha I)^{-1} X Y,
// the closed-form minimizer of |Y - X'B|^2 + alpha |B|^2.
struct Dictionary {
  Eigen::MatrixXd b;  // m x k, one basis atom per column
  double alpha = 0;
  // Provenance: dataset name, seed, graph parameters, eigen mode, n, ...
  std::map<std::string, std::string> meta;

  int m() const { return static_cast<int>(b.rows()); }
  int k() const { return static_cast<int>(b.cols()); }
  bool over_complete() const { return k() > m(); }
};

struct DictionaryFitOptions {
  // Rescales atoms to unit L2 norm after the fit. Off by default; turning
  // it on is a different model, not a cosmetic change, since codes scale
  // inversely.
  bool unit_norm_atoms = false;
};

// x is m x n (one data point per column), y is n x k with rows aligned to
// the columns of x. alpha = 0 is accepted only when X X' is nonsingular.
// Solved with a symmetric positive-definite factorization; the inverse is
// never formed.
Dictionary fit_dictionary(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                          double alpha,
                          const DictionaryFitOptions& opts = {});

// Artifact format: magic "SPMD", version u32, m u32, k u32, alpha f64,
// meta block (u32 count, then length-prefixed key/value strings), B
// row-major f64, trailing CRC32.
void save_dictionary(const Dictionary& d, const std::string& path);
Dictionary load_dictionary(const std::string& path);

}  // namespace spm

#endif
