#ifndef SPM_GRAPH_HPP
#define SPM_GRAPH_HPP

#include <optional>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace spm {

// p-nearest-neighbor affinity graph with heat-kernel edge weights
//   w_ij = exp(-dist(x_i, x_j) / t)
// for pairs where either point is among the other's p nearest neighbors
// (OR symmetrization). dist is the plain Euclidean norm by default; the
// squared variant is available behind a flag since both conventions appear
// in the literature.
struct AffinityGraph {
  Eigen::SparseMatrix<double> w;  // symmetric, zero diagonal
  Eigen::VectorXd degrees;        // row sums of w
  int p = 0;
  double t = 0;  // resolved bandwidth (same units as the distance used)
  bool squared_distance = false;

  Eigen::Index size() const { return w.rows(); }
  void validate() const;
};

struct LaplacianPair {
  Eigen::SparseMatrix<double> l;  // L = D - W
  Eigen::SparseMatrix<double> d;  // diagonal degree matrix
};

struct KnnParams {
  int p = 5;
  // Bandwidth; empty selects the data-driven default (mean retained
  // neighbor distance).
  std::optional<double> t;
  bool squared_distance = false;
};

// Builds the graph over the columns of x (one data point per column).
// Exact neighbor search, parallel over query points; neighbor-distance ties
// break toward the lower column index. Requires n >= p + 1.
AffinityGraph knn_graph(const Eigen::MatrixXd& x, const KnnParams& params);

LaplacianPair laplacian(const AffinityGraph& g);

// Debug dump: one "i,j,w" line per stored upper-triangular edge.
std::string graph_to_csv(const AffinityGraph& g);

}  // namespace spm

#endif
