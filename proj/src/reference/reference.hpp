#ifndef SPM_REFERENCE_HPP
#define SPM_REFERENCE_HPP

#include <vector>

#include <Eigen/Core>

#include "spm/dictionary.hpp"
#include "spm/evaluation.hpp"
#include "spm/graph.hpp"
#include "spm/matcher_net.hpp"
#include "spm/sparse_coder.hpp"

// Independent reference implementations. Everything here is deliberately
// naive and serial: these are the oracles the optimized library is tested
// against, and the serial baselines the benchmarks compare with. Nothing in
// the main library calls into this namespace.
namespace spm::reference {

// O(n^2) all-pairs neighbor construction with a full sort per point.
AffinityGraph knn_graph_bruteforce(const Eigen::MatrixXd& x,
                                   const KnnParams& params);

// Dense solve of the pencil (L, D) on another algebraic route than the
// library's (Eigen's generalized solver on the pencil directly). Returns
// all n eigenvalues ascending with D-normalized eigenvectors.
void dense_pencil_solve(const Eigen::MatrixXd& l, const Eigen::VectorXd& d,
                        Eigen::VectorXd& eigenvalues,
                        Eigen::MatrixXd& eigenvectors);

// Coordinate-descent lasso for  min_c |x - B c|^2 + beta |c|_1, iterated
// to a max-coefficient-change tolerance.
Eigen::VectorXd lasso_coordinate_descent(const Eigen::MatrixXd& b,
                                         const Eigen::VectorXd& x, double beta,
                                         double tol = 1e-12,
                                         int max_iter = 200000);

double lasso_objective(const Eigen::MatrixXd& b, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& c, double beta);

// Exhaustive search over supports of size <= max_support with per-support
// sign enumeration and stationary solves; exact on instances whose lasso
// solution is that sparse.
double lasso_best_objective_bruteforce(const Eigen::MatrixXd& b,
                                       const Eigen::VectorXd& x, double beta,
                                       int max_support);

// Plain serial loop over columns; the parallel encode_batch must match it
// code-for-code.
std::vector<SparseCode> encode_batch_serial(const Dictionary& d,
                                            const Eigen::MatrixXd& x,
                                            double beta);

// Gradient descent on |Y - X'B|^2 + alpha |B|^2 run to convergence.
Eigen::MatrixXd ridge_fit_gradient_descent(const Eigen::MatrixXd& x,
                                           const Eigen::MatrixXd& y,
                                           double alpha, double tol = 1e-12,
                                           int max_iter = 2000000);

double ridge_objective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                       const Eigen::MatrixXd& b, double alpha);

// Central finite differences of the mean BCE loss through the network.
Gradients finite_difference_gradients(const NetworkParams& params,
                                      const Eigen::MatrixXd& batch,
                                      const Eigen::VectorXd& labels,
                                      double h = 1e-5);

// Threshold-by-threshold O(n^2) ROC sweep.
RocCurve roc_bruteforce(const std::vector<double>& scores,
                        const std::vector<int>& labels);
double error_at_95_bruteforce(const std::vector<double>& scores,
                              const std::vector<int>& labels);

// Serial pair scoring baseline.
std::vector<double> score_pairs_serial(const NetworkParams& params,
                                       const std::vector<PairSample>& pairs);

}  // namespace spm::reference

#endif
