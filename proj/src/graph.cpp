#include "spm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "spm/errors.hpp"

namespace spm {

void AffinityGraph::validate() const {
  const Eigen::Index n = w.rows();
  if (w.cols() != n || degrees.size() != n) {
    throw config_error("affinity graph shape mismatch");
  }
  for (Eigen::Index j = 0; j < w.outerSize(); ++j) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(w, j); it; ++it) {
      if (it.row() == it.col()) {
        throw numeric_error("affinity graph stores a diagonal entry");
      }
      if (!(it.value() > 0.0 && it.value() <= 1.0)) {
        throw numeric_error("affinity weight outside (0,1]");
      }
    }
  }
}

AffinityGraph knn_graph(const Eigen::MatrixXd& x, const KnnParams& params) {
  const Eigen::Index n = x.cols();
  const int p = params.p;
  if (p < 1) throw config_error("knn_graph: p must be >= 1");
  if (n <= p) {
    throw config_error("knn_graph: need n >= p + 1 points, got n = " +
                       std::to_string(n) + ", p = " + std::to_string(p));
  }
  if (params.t && !(*params.t > 0)) {
    throw config_error("knn_graph: bandwidth t must be positive");
  }

  // p nearest neighbors per point, exact search, ties broken by lower
  // index. Distances are formed by direct subtraction so that tie handling
  // is bit-identical to a naive all-pairs construction.
  std::vector<std::vector<Eigen::Index>> nbrs(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<std::pair<double, Eigen::Index>> cand;
    cand.reserve(n - 1);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      cand.emplace_back((x.col(j) - x.col(i)).squaredNorm(), j);
    }
    std::partial_sort(cand.begin(), cand.begin() + p, cand.end());
    nbrs[i].reserve(p);
    for (int r = 0; r < p; ++r) nbrs[i].push_back(cand[r].second);
  }

  // OR-symmetrized edge set with per-edge Euclidean distance.
  std::vector<Eigen::Triplet<double>> edges;  // upper triangle, dist payload
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j : nbrs[i]) {
      const Eigen::Index a = std::min(i, j);
      const Eigen::Index b = std::max(i, j);
      edges.emplace_back(a, b, 0.0);
    }
  }
  std::sort(edges.begin(), edges.end(), [](const auto& l, const auto& r) {
    return std::pair(l.row(), l.col()) < std::pair(r.row(), r.col());
  });
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const auto& l, const auto& r) {
                            return l.row() == r.row() && l.col() == r.col();
                          }),
              edges.end());

  double dist_sum = 0.0;
  std::vector<double> dist(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double d = (x.col(edges[e].row()) - x.col(edges[e].col())).norm();
    dist[e] = params.squared_distance ? d * d : d;
    dist_sum += dist[e];
  }

  double t;
  if (params.t) {
    t = *params.t;
  } else {
    // Data-driven default keeps weights away from 0/1 saturation; identical
    // points everywhere would give t = 0, where any bandwidth acts the same.
    t = edges.empty() ? 1.0 : dist_sum / static_cast<double>(edges.size());
    if (t <= 0.0) t = 1.0;
  }

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double w = std::exp(-dist[e] / t);
    trips.emplace_back(edges[e].row(), edges[e].col(), w);
    trips.emplace_back(edges[e].col(), edges[e].row(), w);
  }

  AffinityGraph g;
  g.p = p;
  g.t = t;
  g.squared_distance = params.squared_distance;
  g.w.resize(n, n);
  g.w.setFromTriplets(trips.begin(), trips.end());
  g.degrees = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < g.w.outerSize(); ++j) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(g.w, j); it; ++it) {
      g.degrees[it.row()] += it.value();
    }
  }
  return g;
}

LaplacianPair laplacian(const AffinityGraph& g) {
  const Eigen::Index n = g.size();
  LaplacianPair lp;
  lp.d.resize(n, n);
  lp.d.reserve(Eigen::VectorXi::Constant(n, 1));
  for (Eigen::Index i = 0; i < n; ++i) lp.d.insert(i, i) = g.degrees[i];
  lp.d.makeCompressed();

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(g.w.nonZeros() + n);
  for (Eigen::Index i = 0; i < n; ++i) trips.emplace_back(i, i, g.degrees[i]);
  for (Eigen::Index j = 0; j < g.w.outerSize(); ++j) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(g.w, j); it; ++it) {
      trips.emplace_back(it.row(), it.col(), -it.value());
    }
  }
  lp.l.resize(n, n);
  lp.l.setFromTriplets(trips.begin(), trips.end());
  return lp;
}

std::string graph_to_csv(const AffinityGraph& g) {
  std::ostringstream out;
  out << "i,j,w\n";
  out.precision(17);
  for (Eigen::Index j = 0; j < g.w.outerSize(); ++j) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(g.w, j); it; ++it) {
      if (it.row() < it.col()) {
        out << it.row() << ',' << it.col() << ',' << it.value() << '\n';
      }
    }
  }
  return out.str();
}

}  // namespace spm
