#ifndef SPM_EMBEDDING_HPP
#define SPM_EMBEDDING_HPP

#include <Eigen/Core>

#include "spm/graph.hpp"

namespace spm {

enum class EigenMode { kSmallest, kLargest };

// Flat embedding from the generalized eigenproblem L y = lambda D y.
// Rows index data points. Columns are D-normalized (y' D y = 1), ordered by
// eigenvalue (ascending for kSmallest, descending for kLargest), and carry a
// fixed sign convention: the first nonzero component of each column is
// positive. Repeated solves on the same graph are identical.
struct Embedding {
  Eigen::MatrixXd y;           // n x k
  Eigen::VectorXd eigenvalues;  // length k
  EigenMode mode = EigenMode::kSmallest;
};

struct EigenSolveOptions {
  // Above this size the solver switches from a dense factorization to
  // subspace iteration on the D-normalized operator.
  Eigen::Index dense_limit = 5000;
  int max_iterations = 10000;
  double residual_tol = 1e-8;  // on |L y - lambda D y|_inf / |y|_inf
};

Embedding solve_generalized_eigen(const LaplacianPair& lp, int k,
                                  EigenMode mode,
                                  const EigenSolveOptions& opts = {});

// Convenience wrapper: builds the Laplacian pair from the graph. With
// drop_trivial the solve runs for k+1 pairs and discards the constant
// (zero-eigenvalue) one.
Embedding embed(const AffinityGraph& g, int k, EigenMode mode,
                bool drop_trivial, const EigenSolveOptions& opts = {});

}  // namespace spm

#endif
