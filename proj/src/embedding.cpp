#include "spm/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/QR>

#include "spm/errors.hpp"
#include "spm/rng.hpp"

namespace spm {

namespace {

// Largest-first selection indices into an ascending spectrum.
std::vector<Eigen::Index> select_indices(Eigen::Index n, int k,
                                         EigenMode mode) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    idx[static_cast<std::size_t>(c)] =
        mode == EigenMode::kSmallest ? c : n - 1 - c;
  }
  return idx;
}

void fix_signs(Eigen::MatrixXd& y) {
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    const double scale = y.col(c).cwiseAbs().maxCoeff();
    if (scale == 0.0) continue;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      if (std::abs(y(i, c)) > 1e-12 * scale) {
        if (y(i, c) < 0) y.col(c) = -y.col(c);
        break;
      }
    }
  }
}

double column_residual(const Eigen::SparseMatrix<double>& l,
                       const Eigen::VectorXd& d, const Eigen::VectorXd& y,
                       double lambda) {
  const Eigen::VectorXd r = l * y - lambda * d.cwiseProduct(y);
  const double scale = y.cwiseAbs().maxCoeff();
  return scale > 0 ? r.cwiseAbs().maxCoeff() / scale
                   : r.cwiseAbs().maxCoeff();
}

// Subspace iteration with Rayleigh-Ritz on the symmetric D-normalized
// operator C = D^{-1/2} L D^{-1/2}. kSmallest runs on sigma*I - C with
// sigma = 2, an upper bound on the spectrum of the normalized Laplacian,
// which maps the smallest eigenvalues to the dominant ones.
void iterative_spectrum(const Eigen::SparseMatrix<double>& c, int k,
                        EigenMode mode, const EigenSolveOptions& opts,
                        const Eigen::SparseMatrix<double>& l,
                        const Eigen::VectorXd& dvec,
                        const Eigen::VectorXd& dinv_sqrt,
                        Eigen::VectorXd& out_vals, Eigen::MatrixXd& out_vecs) {
  const Eigen::Index n = c.rows();
  const double sigma = 2.0;
  const bool flip = mode == EigenMode::kSmallest;
  const int block = static_cast<int>(
      std::min<Eigen::Index>(n, k + std::min<Eigen::Index>(10, n - k)));

  Rng rng(0x5eedf00du);
  Eigen::MatrixXd z(n, block);
  for (Eigen::Index j = 0; j < block; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) z(i, j) = rng.normal();
  }

  Eigen::VectorXd ritz_vals;
  Eigen::MatrixXd ritz_vecs;
  double worst = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    Eigen::MatrixXd cz = c * z;
    if (flip) cz = sigma * z - cz;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(cz);
    z = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);

    // Rayleigh-Ritz in the current subspace, every few power steps.
    if (iter % 4 != 3 && iter + 1 != opts.max_iterations) continue;
    const Eigen::MatrixXd h = z.transpose() * (c * z);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        0.5 * (h + h.transpose()));
    const Eigen::MatrixXd u = z * es.eigenvectors();

    const auto idx = select_indices(block, k, mode);
    ritz_vals.resize(k);
    ritz_vecs.resize(n, k);
    worst = 0;
    for (int col = 0; col < k; ++col) {
      const Eigen::Index s = idx[static_cast<std::size_t>(col)];
      ritz_vals[col] = es.eigenvalues()[s];
      ritz_vecs.col(col) = u.col(s).normalized();
      // Contract residual is measured on the original pencil.
      const Eigen::VectorXd y = dinv_sqrt.cwiseProduct(ritz_vecs.col(col));
      worst = std::max(worst, column_residual(l, dvec, y, ritz_vals[col]));
    }
    if (worst <= opts.residual_tol) break;
  }
  if (worst > opts.residual_tol) {
    std::ostringstream msg;
    msg << "generalized eigensolver did not converge: residual " << worst
        << " > " << opts.residual_tol << " after " << opts.max_iterations
        << " iterations";
    throw numeric_error(msg.str());
  }
  out_vals = ritz_vals;
  out_vecs = ritz_vecs;
}

}  // namespace

Embedding solve_generalized_eigen(const LaplacianPair& lp, int k,
                                  EigenMode mode,
                                  const EigenSolveOptions& opts) {
  const Eigen::Index n = lp.l.rows();
  if (k < 1 || k > n) {
    throw config_error("eigensolver: need 1 <= k <= n, got k = " +
                       std::to_string(k) + ", n = " + std::to_string(n));
  }
  Eigen::VectorXd dvec(n);
  for (Eigen::Index i = 0; i < n; ++i) dvec[i] = lp.d.coeff(i, i);
  if ((dvec.array() <= 0).any()) {
    throw config_error(
        "graph has an isolated node (zero degree); increase the neighbor "
        "count p so every point gains an edge");
  }
  const Eigen::VectorXd dinv_sqrt = dvec.cwiseSqrt().cwiseInverse();

  // Symmetric D-normalized operator C = D^{-1/2} L D^{-1/2}.
  Eigen::SparseMatrix<double> c = lp.l;
  for (Eigen::Index j = 0; j < c.outerSize(); ++j) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(c, j); it; ++it) {
      it.valueRef() *= dinv_sqrt[it.row()] * dinv_sqrt[it.col()];
    }
  }

  Eigen::VectorXd vals;  // selected eigenvalues, mode order
  Eigen::MatrixXd vecs;  // matching unit eigenvectors of C
  if (n <= opts.dense_limit) {
    const Eigen::MatrixXd dense_c(c);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_c);
    if (es.info() != Eigen::Success) {
      throw numeric_error("dense symmetric eigensolver failed");
    }
    const auto idx = select_indices(n, k, mode);
    vals.resize(k);
    vecs.resize(n, k);
    for (int col = 0; col < k; ++col) {
      const Eigen::Index s = idx[static_cast<std::size_t>(col)];
      vals[col] = es.eigenvalues()[s];
      vecs.col(col) = es.eigenvectors().col(s);
    }
  } else {
    iterative_spectrum(c, k, mode, opts, lp.l, dvec, dinv_sqrt, vals, vecs);
  }

  Embedding emb;
  emb.mode = mode;
  emb.eigenvalues = vals;
  emb.y = dinv_sqrt.asDiagonal() * vecs;  // y' D y = u' u = 1
  fix_signs(emb.y);

  double worst = 0;
  for (int col = 0; col < k; ++col) {
    worst = std::max(worst,
                     column_residual(lp.l, dvec, emb.y.col(col), vals[col]));
  }
  if (worst > opts.residual_tol) {
    std::ostringstream msg;
    msg << "eigenpair residual " << worst << " exceeds tolerance "
        << opts.residual_tol;
    throw numeric_error(msg.str());
  }
  return emb;
}

Embedding embed(const AffinityGraph& g, int k, EigenMode mode,
                bool drop_trivial, const EigenSolveOptions& opts) {
  const Eigen::Index n = g.size();
  const int solve_k = drop_trivial ? k + 1 : k;
  if (solve_k > n) {
    throw config_error(
        "embedding: k" + std::string(drop_trivial ? "+1 (trivial drop)" : "") +
        " exceeds the number of graph nodes n = " + std::to_string(n));
  }
  const LaplacianPair lp = laplacian(g);
  Embedding full = solve_generalized_eigen(lp, solve_k, mode, opts);
  if (!drop_trivial) return full;

  // Discard the constant eigenvector (eigenvalue 0). If none of the
  // selected pairs is trivial (kLargest away from the bottom of the
  // spectrum), drop the last one in mode order instead.
  Eigen::Index drop = solve_k - 1;
  double best = 1e-8;
  for (Eigen::Index c = 0; c < solve_k; ++c) {
    if (std::abs(full.eigenvalues[c]) <= best) {
      best = std::abs(full.eigenvalues[c]);
      drop = c;
    }
  }
  Embedding out;
  out.mode = mode;
  out.eigenvalues.resize(k);
  out.y.resize(n, k);
  Eigen::Index w = 0;
  for (Eigen::Index c = 0; c < solve_k; ++c) {
    if (c == drop) continue;
    out.eigenvalues[w] = full.eigenvalues[c];
    out.y.col(w) = full.y.col(c);
    ++w;
  }
  return out;
}

}  // namespace spm
