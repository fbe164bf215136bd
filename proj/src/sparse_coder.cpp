#include "spm/sparse_coder.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include <Eigen/Cholesky>

#include "spm/errors.hpp"
#include "spm/io_util.hpp"

namespace spm {

namespace {

constexpr std::uint32_t kCodesVersion = 1;
constexpr double kTiny = 1e-12;

// Incrementally maintained Cholesky factor of the active Gram matrix
// B_A' B_A. Appending a column is a triangular solve; removals rebuild,
// which is cheap because drops are rare on the lasso path.
class ActiveCholesky {
 public:
  explicit ActiveCholesky(const Eigen::MatrixXd& b) : b_(b) {}

  int size() const { return static_cast<int>(active_.size()); }
  const std::vector<int>& active() const { return active_; }

  bool try_append(int j) {
    const int s = size();
    Eigen::VectorXd g(s);
    for (int i = 0; i < s; ++i) g[i] = b_.col(active_[i]).dot(b_.col(j));
    const double gjj = b_.col(j).squaredNorm();
    Eigen::VectorXd v(s);
    if (s > 0) {
      v = l_.topLeftCorner(s, s)
              .triangularView<Eigen::Lower>()
              .solve(g);
    }
    const double diag2 = gjj - (s > 0 ? v.squaredNorm() : 0.0);
    if (!(diag2 > gjj * 1e-12)) return false;  // dependent on active set
    if (l_.rows() <= s) {
      Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(2 * s + 4, 2 * s + 4);
      grown.topLeftCorner(s, s) = l_.topLeftCorner(s, s);
      l_.swap(grown);
    }
    l_.block(s, 0, 1, s) = v.transpose();
    l_(s, s) = std::sqrt(diag2);
    active_.push_back(j);
    return true;
  }

  void remove(int position) {
    active_.erase(active_.begin() + position);
    rebuild();
  }

  // Solves (B_A' B_A) out = rhs.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    const int s = size();
    const auto lower = l_.topLeftCorner(s, s).triangularView<Eigen::Lower>();
    Eigen::VectorXd y = lower.solve(rhs);
    return lower.transpose().solve(y);
  }

 private:
  void rebuild() {
    const int s = size();
    Eigen::MatrixXd gram(s, s);
    for (int a = 0; a < s; ++a) {
      for (int b = 0; b <= a; ++b) {
        gram(a, b) = b_.col(active_[a]).dot(b_.col(active_[b]));
        gram(b, a) = gram(a, b);
      }
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) {
      throw numeric_error("lars: active Gram matrix lost positive "
                          "definiteness after a drop");
    }
    l_ = Eigen::MatrixXd::Zero(std::max(s, 4), std::max(s, 4));
    l_.topLeftCorner(s, s) = llt.matrixL();
  }

  const Eigen::MatrixXd& b_;
  std::vector<int> active_;
  Eigen::MatrixXd l_;  // lower-triangular factor in the top-left corner
};

}  // namespace

Eigen::VectorXd SparseCode::to_dense() const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(k);
  for (std::size_t i = 0; i < support.size(); ++i) {
    v[support[i]] = coeffs[i];
  }
  return v;
}

SparseCode lars_lasso(const Dictionary& d, const Eigen::VectorXd& x,
                      double beta) {
  if (!(beta > 0)) throw config_error("lars_lasso: beta must be > 0");
  const Eigen::MatrixXd& b = d.b;
  const int m = d.m();
  const int k = d.k();
  if (x.size() != m) {
    throw config_error("lars_lasso: signal length " +
                       std::to_string(x.size()) + " does not match m = " +
                       std::to_string(m));
  }
  if (!x.allFinite()) throw config_error("lars_lasso: non-finite signal");

  // Stationarity threshold in correlation units. The objective carries no
  // 1/2 factor, so the path stops at beta/2.
  const double lambda_target = beta / 2.0;
  const int max_active = std::min(m, k);

  std::vector<char> blocked(static_cast<std::size_t>(k), 0);
  for (int j = 0; j < k; ++j) {
    if (b.col(j).squaredNorm() == 0.0) {
      blocked[j] = 1;
      std::cerr << "lars_lasso: skipping all-zero dictionary column " << j
                << "\n";
    }
  }

  Eigen::VectorXd c = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd corr = b.transpose() * x;  // b_j'(x - B c) at c = 0

  auto max_inactive = [&](const std::vector<char>& in_active) {
    double best = -1;
    int arg = -1;
    for (int j = 0; j < k; ++j) {
      if (blocked[j] || in_active[j]) continue;
      const double a = std::abs(corr[j]);
      if (a > best + kTiny || (arg == -1 && a > best)) {
        best = a;
        arg = j;
      }
    }
    return std::pair(best, arg);
  };

  std::vector<char> in_active(static_cast<std::size_t>(k), 0);
  auto [cmax, first] = max_inactive(in_active);
  SparseCode out;
  out.k = k;
  out.beta = beta;
  if (first < 0 || cmax <= lambda_target + kTiny) return out;  // c = 0 is KKT

  ActiveCholesky chol(b);
  if (!chol.try_append(first)) {
    throw numeric_error("lars: could not start with column " +
                        std::to_string(first));
  }
  in_active[first] = 1;
  double lambda = cmax;  // common |correlation| of the active set

  const int max_iter = 16 * (k + m) + 64;
  for (int iter = 0; iter < max_iter; ++iter) {
    const auto& active = chol.active();
    const int s = chol.size();

    Eigen::VectorXd sign_a(s);
    for (int i = 0; i < s; ++i) {
      sign_a[i] = corr[active[i]] >= 0 ? 1.0 : -1.0;
    }
    // Direction w moves every active coefficient so the shared correlation
    // level drops at unit rate; a_j tracks the inactive correlations.
    const Eigen::VectorXd w = chol.solve(sign_a);
    Eigen::VectorXd bw = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < s; ++i) bw += w[i] * b.col(active[i]);
    const Eigen::VectorXd a = b.transpose() * bw;

    const double gamma_target = lambda - lambda_target;

    double gamma_join = std::numeric_limits<double>::infinity();
    int join = -1;
    for (int j = 0; j < k; ++j) {
      if (blocked[j] || in_active[j]) continue;
      const double r = corr[j];
      const double den_plus = 1.0 - a[j];
      if (den_plus > kTiny) {
        const double g = (lambda - r) / den_plus;
        if (g > kTiny && g < gamma_join - kTiny) {
          gamma_join = g;
          join = j;
        }
      }
      const double den_minus = 1.0 + a[j];
      if (den_minus > kTiny) {
        const double g = (lambda + r) / den_minus;
        if (g > kTiny && g < gamma_join - kTiny) {
          gamma_join = g;
          join = j;
        }
      }
    }

    double gamma_drop = std::numeric_limits<double>::infinity();
    int drop = -1;
    for (int i = 0; i < s; ++i) {
      if (std::abs(w[i]) <= kTiny) continue;
      const double g = -c[active[i]] / w[i];
      if (g > kTiny && g < gamma_drop) {
        gamma_drop = g;
        drop = i;
      }
    }

    double gamma = gamma_target;
    enum class Step { kFinish, kJoin, kDrop } step = Step::kFinish;
    if (gamma_drop < std::min(gamma, gamma_join)) {
      gamma = gamma_drop;
      step = Step::kDrop;
    } else if (gamma_join < gamma) {
      gamma = gamma_join;
      step = Step::kJoin;
    }
    gamma = std::max(gamma, 0.0);

    for (int i = 0; i < s; ++i) c[active[i]] += gamma * w[i];
    corr -= gamma * a;
    lambda -= gamma;

    if (step == Step::kFinish) break;
    if (step == Step::kDrop) {
      c[active[drop]] = 0.0;  // crossed zero exactly at this breakpoint
      in_active[active[drop]] = 0;
      chol.remove(drop);
    } else {
      if (chol.size() + 1 > max_active) {
        throw numeric_error(
            "lars: active set would exceed min(m, k) = " +
            std::to_string(max_active) + "; numerical drift detected");
      }
      if (chol.try_append(join)) {
        in_active[join] = 1;
      } else {
        blocked[join] = 1;  // linearly dependent on the active set
      }
    }
    if (iter + 1 == max_iter) {
      throw numeric_error("lars: homotopy did not terminate");
    }
  }

  // Polish: re-solve the stationarity equations on the final support,
  //   (B_A' B_A) c_A = B_A' x - (beta/2) sign(c_A),
  // keeping the result only when no coefficient changes sign.
  {
    const auto& active = chol.active();
    const int s = chol.size();
    if (s > 0) {
      Eigen::VectorXd rhs(s);
      for (int i = 0; i < s; ++i) {
        const double sg = c[active[i]] >= 0 ? 1.0 : -1.0;
        rhs[i] = b.col(active[i]).dot(x) - lambda_target * sg;
      }
      const Eigen::VectorXd polished = chol.solve(rhs);
      bool consistent = true;
      for (int i = 0; i < s; ++i) {
        if (polished[i] * (c[active[i]] >= 0 ? 1.0 : -1.0) < 0) {
          consistent = false;
          break;
        }
      }
      if (consistent) {
        for (int i = 0; i < s; ++i) c[active[i]] = polished[i];
      }
    }
  }

  for (int i = 0; i < chol.size(); ++i) {
    const int j = chol.active()[i];
    if (c[j] != 0.0) out.support.push_back(j);
  }
  std::sort(out.support.begin(), out.support.end());
  out.coeffs.reserve(out.support.size());
  for (int j : out.support) out.coeffs.push_back(c[j]);
  return out;
}

std::pair<std::vector<SparseCode>, EncodeReport> encode_batch(
    const Dictionary& d, const Eigen::MatrixXd& x, double beta) {
  if (x.rows() != d.m() && x.cols() != 0) {
    throw config_error("encode_batch: row count " + std::to_string(x.rows()) +
                       " does not match dictionary m = " +
                       std::to_string(d.m()));
  }
  const Eigen::Index n = x.cols();
  std::vector<SparseCode> codes(static_cast<std::size_t>(n));
  std::vector<double> errs(static_cast<std::size_t>(n), 0.0);

  const auto start = std::chrono::steady_clock::now();
  std::optional<std::pair<Eigen::Index, std::string>> failure;
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index i = 0; i < n; ++i) {
    try {
      codes[i] = lars_lasso(d, x.col(i), beta);
      Eigen::VectorXd recon = Eigen::VectorXd::Zero(d.m());
      for (std::size_t t = 0; t < codes[i].support.size(); ++t) {
        recon += codes[i].coeffs[t] * d.b.col(codes[i].support[t]);
      }
      errs[i] = (x.col(i) - recon).norm();
    } catch (const std::exception& e) {
#pragma omp critical
      {
        if (!failure || i < failure->first) {
          failure = {i, e.what()};
        }
      }
    }
  }
  if (failure) {
    throw numeric_error("encode_batch: column " +
                        std::to_string(failure->first) + ": " +
                        failure->second);
  }

  EncodeReport report;
  report.n = static_cast<int>(n);
  report.seconds =
      n == 0 ? 0.0
             : std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             start)
                   .count();
  for (Eigen::Index i = 0; i < n; ++i) {
    report.mean_reconstruction_error += errs[i];
    report.mean_support += codes[i].nnz();
  }
  if (n > 0) {
    report.mean_reconstruction_error /= static_cast<double>(n);
    report.mean_support /= static_cast<double>(n);
  }
  return {std::move(codes), report};
}

void save_codes(const std::vector<SparseCode>& codes, int k, double beta,
                std::uint64_t config_hash, const std::string& path) {
  BinaryWriter w;
  w.bytes("SPMC", 4);
  w.u32(kCodesVersion);
  w.u32(static_cast<std::uint32_t>(k));
  w.f64(beta);
  w.u32(static_cast<std::uint32_t>(codes.size()));
  w.u64(config_hash);
  for (const auto& code : codes) {
    w.u32(static_cast<std::uint32_t>(code.nnz()));
    for (int i = 0; i < code.nnz(); ++i) {
      w.u32(static_cast<std::uint32_t>(code.support[i]));
      w.f64(code.coeffs[i]);
    }
  }
  w.commit(path);
}

CodeFile load_codes(const std::string& path) {
  BinaryReader r(path, "SPMC");
  const std::uint32_t version = r.u32();
  if (version != kCodesVersion) {
    throw data_error("unsupported code-file version " +
                     std::to_string(version) + " in " + path);
  }
  CodeFile f;
  f.k = static_cast<int>(r.u32());
  f.beta = r.f64();
  const std::uint32_t n = r.u32();
  f.config_hash = r.u64();
  f.codes.resize(n);
  for (auto& code : f.codes) {
    code.k = f.k;
    code.beta = f.beta;
    const std::uint32_t nnz = r.u32();
    code.support.resize(nnz);
    code.coeffs.resize(nnz);
    for (std::uint32_t i = 0; i < nnz; ++i) {
      code.support[i] = static_cast<int>(r.u32());
      code.coeffs[i] = r.f64();
      if (code.support[i] >= f.k) {
        throw data_error("code index out of range in " + path);
      }
    }
  }
  return f;
}

}  // namespace spm
