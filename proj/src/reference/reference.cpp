#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <Eigen/Dense>

#include "spm/errors.hpp"

namespace spm::reference {

AffinityGraph knn_graph_bruteforce(const Eigen::MatrixXd& x,
                                   const KnnParams& params) {
  const Eigen::Index n = x.cols();
  const int p = params.p;
  if (n <= p) throw config_error("knn_graph_bruteforce: n <= p");

  Eigen::MatrixXd dist(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      dist(i, j) = (x.col(i) - x.col(j)).norm();
    }
  }

  // Directed neighbor relation, full sort with (distance, index) keys.
  std::vector<std::set<Eigen::Index>> nbr(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<std::pair<double, Eigen::Index>> order;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) order.emplace_back(dist(i, j) * dist(i, j), j);
    }
    std::sort(order.begin(), order.end());
    for (int r = 0; r < p; ++r) nbr[i].insert(order[r].second);
  }

  std::vector<std::pair<Eigen::Index, Eigen::Index>> edges;
  double dist_sum = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (nbr[i].count(j) || nbr[j].count(i)) {
        edges.emplace_back(i, j);
        dist_sum += params.squared_distance ? dist(i, j) * dist(i, j)
                                            : dist(i, j);
      }
    }
  }
  double t = params.t ? *params.t
                      : (edges.empty() ? 1.0
                                       : dist_sum /
                                             static_cast<double>(edges.size()));
  if (t <= 0) t = 1.0;

  AffinityGraph g;
  g.p = p;
  g.t = t;
  g.squared_distance = params.squared_distance;
  g.w.resize(n, n);
  std::vector<Eigen::Triplet<double>> trips;
  for (auto [i, j] : edges) {
    const double d = params.squared_distance ? dist(i, j) * dist(i, j)
                                             : dist(i, j);
    const double w = std::exp(-d / t);
    trips.emplace_back(i, j, w);
    trips.emplace_back(j, i, w);
  }
  g.w.setFromTriplets(trips.begin(), trips.end());
  g.degrees = Eigen::VectorXd::Zero(n);
  for (Eigen::Index c = 0; c < g.w.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(g.w, c); it; ++it) {
      g.degrees[it.row()] += it.value();
    }
  }
  return g;
}

void dense_pencil_solve(const Eigen::MatrixXd& l, const Eigen::VectorXd& d,
                        Eigen::VectorXd& eigenvalues,
                        Eigen::MatrixXd& eigenvectors) {
  Eigen::MatrixXd dm = Eigen::MatrixXd::Zero(d.size(), d.size());
  dm.diagonal() = d;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(l, dm);
  if (es.info() != Eigen::Success) {
    throw numeric_error("dense_pencil_solve failed");
  }
  eigenvalues = es.eigenvalues();
  eigenvectors = es.eigenvectors();  // already B-normalized: v' D v = 1
}

Eigen::VectorXd lasso_coordinate_descent(const Eigen::MatrixXd& b,
                                         const Eigen::VectorXd& x, double beta,
                                         double tol, int max_iter) {
  const Eigen::Index k = b.cols();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd residual = x;  // x - B c
  Eigen::VectorXd col_sq(k);
  for (Eigen::Index j = 0; j < k; ++j) col_sq[j] = b.col(j).squaredNorm();

  for (int it = 0; it < max_iter; ++it) {
    double max_change = 0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (col_sq[j] == 0) continue;
      const double old = c[j];
      // Partial residual correlation, then soft threshold at beta/2.
      const double rho = b.col(j).dot(residual) + col_sq[j] * old;
      const double thresh = beta / 2.0;
      double next = 0;
      if (rho > thresh) {
        next = (rho - thresh) / col_sq[j];
      } else if (rho < -thresh) {
        next = (rho + thresh) / col_sq[j];
      }
      if (next != old) {
        residual += (old - next) * b.col(j);
        c[j] = next;
        max_change = std::max(max_change, std::abs(next - old));
      }
    }
    if (max_change < tol) return c;
  }
  throw numeric_error("lasso_coordinate_descent: no convergence");
}

double lasso_objective(const Eigen::MatrixXd& b, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& c, double beta) {
  return (x - b * c).squaredNorm() + beta * c.lpNorm<1>();
}

double lasso_best_objective_bruteforce(const Eigen::MatrixXd& b,
                                       const Eigen::VectorXd& x, double beta,
                                       int max_support) {
  const int k = static_cast<int>(b.cols());
  double best = x.squaredNorm();  // empty support
  std::vector<int> support;

  // Stationary point on a fixed support and sign pattern:
  //   (B_S' B_S) c = B_S' x - (beta/2) s.
  auto try_support = [&](const std::vector<int>& s_idx) {
    const int s = static_cast<int>(s_idx.size());
    Eigen::MatrixXd bs(b.rows(), s);
    for (int i = 0; i < s; ++i) bs.col(i) = b.col(s_idx[i]);
    const Eigen::MatrixXd gram = bs.transpose() * bs;
    for (int mask = 0; mask < (1 << s); ++mask) {
      Eigen::VectorXd sign(s);
      for (int i = 0; i < s; ++i) sign[i] = (mask >> i) & 1 ? -1.0 : 1.0;
      const Eigen::VectorXd rhs = bs.transpose() * x - (beta / 2.0) * sign;
      const Eigen::VectorXd c = gram.ldlt().solve(rhs);
      // Only sign-consistent solutions are true stationary points.
      bool ok = true;
      for (int i = 0; i < s; ++i) {
        if (c[i] * sign[i] < 0) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      best = std::min(best, lasso_objective(bs, x, c, beta));
    }
  };

  for (int a = 0; a < k && max_support >= 1; ++a) {
    try_support({a});
    for (int c2 = a + 1; c2 < k && max_support >= 2; ++c2) {
      try_support({a, c2});
    }
  }
  return best;
}

std::vector<SparseCode> encode_batch_serial(const Dictionary& d,
                                            const Eigen::MatrixXd& x,
                                            double beta) {
  std::vector<SparseCode> codes;
  codes.reserve(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    codes.push_back(lars_lasso(d, x.col(i), beta));
  }
  return codes;
}

Eigen::MatrixXd ridge_fit_gradient_descent(const Eigen::MatrixXd& x,
                                           const Eigen::MatrixXd& y,
                                           double alpha, double tol,
                                           int max_iter) {
  const Eigen::MatrixXd gram = x * x.transpose();
  const Eigen::MatrixXd xy = x * y;
  // Gradient of |Y - X'B|^2 + alpha|B|^2 is 2((G + alpha I)B - XY); a step
  // of 1/(lambda_max(G) + alpha) converges monotonically.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const double lip = 2.0 * (es.eigenvalues().maxCoeff() + alpha);
  const double step = 1.0 / lip;

  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(x.rows(), y.cols());
  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd grad = 2.0 * (gram * b + alpha * b - xy);
    b -= step * grad;
    if (grad.cwiseAbs().maxCoeff() < tol) return b;
  }
  throw numeric_error("ridge_fit_gradient_descent: no convergence");
}

double ridge_objective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                       const Eigen::MatrixXd& b, double alpha) {
  return (y - x.transpose() * b).squaredNorm() + alpha * b.squaredNorm();
}

Gradients finite_difference_gradients(const NetworkParams& params,
                                      const Eigen::MatrixXd& batch,
                                      const Eigen::VectorXd& labels,
                                      double h) {
  NetworkParams p = params;
  Gradients g;
  g.weights.resize(p.n_layers());
  g.biases.resize(p.n_layers());
  auto loss_at = [&]() {
    return bce_loss(forward(p, batch), labels);
  };
  for (int l = 0; l < p.n_layers(); ++l) {
    g.weights[l].resizeLike(p.weights[l]);
    for (Eigen::Index i = 0; i < p.weights[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < p.weights[l].cols(); ++j) {
        const double saved = p.weights[l](i, j);
        p.weights[l](i, j) = saved + h;
        const double up = loss_at();
        p.weights[l](i, j) = saved - h;
        const double down = loss_at();
        p.weights[l](i, j) = saved;
        g.weights[l](i, j) = (up - down) / (2 * h);
      }
    }
    g.biases[l].resizeLike(p.biases[l]);
    for (Eigen::Index i = 0; i < p.biases[l].size(); ++i) {
      const double saved = p.biases[l][i];
      p.biases[l][i] = saved + h;
      const double up = loss_at();
      p.biases[l][i] = saved - h;
      const double down = loss_at();
      p.biases[l][i] = saved;
      g.biases[l][i] = (up - down) / (2 * h);
    }
  }
  return g;
}

RocCurve roc_bruteforce(const std::vector<double>& scores,
                        const std::vector<int>& labels) {
  RocCurve curve;
  for (int l : labels) (l == 1 ? curve.n_pos : curve.n_neg) += 1;
  if (curve.n_pos == 0 || curve.n_neg == 0) {
    throw config_error("roc_bruteforce: both classes required");
  }

  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  thresholds.insert(thresholds.begin(),
                    std::numeric_limits<double>::infinity());

  for (double th : thresholds) {
    std::int64_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= th) {
        (labels[i] == 1 ? tp : fp) += 1;
      }
    }
    curve.points.push_back({th, static_cast<double>(tp) / curve.n_pos,
                            static_cast<double>(fp) / curve.n_neg});
  }
  return curve;
}

double error_at_95_bruteforce(const std::vector<double>& scores,
                              const std::vector<int>& labels) {
  const RocCurve curve = roc_bruteforce(scores, labels);
  // Minimum-FPR threshold reaching TPR >= 0.95, linearly interpolated
  // against the preceding sweep point when the crossing is strict.
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    if (curve.points[i].tpr >= 0.95) {
      if (curve.points[i].tpr == 0.95 || i == 0) return curve.points[i].fpr;
      const auto& lo = curve.points[i - 1];
      const auto& hi = curve.points[i];
      return lo.fpr + (0.95 - lo.tpr) / (hi.tpr - lo.tpr) * (hi.fpr - lo.fpr);
    }
  }
  return 1.0;
}

std::vector<double> score_pairs_serial(const NetworkParams& params,
                                       const std::vector<PairSample>& pairs) {
  std::vector<double> scores;
  scores.reserve(pairs.size());
  for (const auto& pr : pairs) {
    scores.push_back(predict_pair(params, pr.code_a, pr.code_b));
  }
  return scores;
}

}  // namespace spm::reference
