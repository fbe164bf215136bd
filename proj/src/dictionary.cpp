#include "spm/dictionary.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>

#include "spm/errors.hpp"
#include "spm/io_util.hpp"

namespace spm {

namespace {
constexpr std::uint32_t kDictVersion = 1;
}

Dictionary fit_dictionary(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                          double alpha, const DictionaryFitOptions& opts) {
  if (alpha < 0) throw config_error("fit_dictionary: alpha must be >= 0");
  const Eigen::Index n = x.cols();
  if (y.rows() != n) {
    throw config_error(
        "fit_dictionary: embedding rows must align with data columns (" +
        std::to_string(y.rows()) + " vs " + std::to_string(n) + ")");
  }

  Eigen::MatrixXd gram = x * x.transpose();
  gram.diagonal().array() += alpha;

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) {
    throw numeric_error("fit_dictionary: factorization of X X' + alpha I "
                        "failed");
  }
  if (alpha == 0) {
    const Eigen::VectorXd diag = ldlt.vectorD();
    const double dmax = diag.cwiseAbs().maxCoeff();
    if (dmax <= 0 || diag.minCoeff() <= dmax * 1e-13) {
      throw numeric_error(
          "fit_dictionary: X X' is singular; pass alpha > 0 to regularize");
    }
  }

  const Eigen::MatrixXd xy = x * y;
  Dictionary d;
  d.b = ldlt.solve(xy);
  d.alpha = alpha;

  // One refinement pass keeps the normal-equation residual at solver
  // precision even for ill-conditioned Gram matrices.
  d.b += ldlt.solve(xy - gram * d.b);

  const double resid = (gram * d.b - xy).cwiseAbs().maxCoeff();
  if (resid > 1e-8 * (1.0 + xy.cwiseAbs().maxCoeff())) {
    std::ostringstream msg;
    msg << "fit_dictionary: normal-equation residual " << resid
        << " out of tolerance";
    throw numeric_error(msg.str());
  }

  if (opts.unit_norm_atoms) {
    for (Eigen::Index c = 0; c < d.b.cols(); ++c) {
      const double norm = d.b.col(c).norm();
      if (norm > 0) d.b.col(c) /= norm;
    }
    d.meta["unit_norm_atoms"] = "1";
  }
  if (!d.b.allFinite()) {
    throw numeric_error("fit_dictionary: non-finite basis entries");
  }
  return d;
}

void save_dictionary(const Dictionary& d, const std::string& path) {
  BinaryWriter w;
  w.bytes("SPMD", 4);
  w.u32(kDictVersion);
  w.u32(static_cast<std::uint32_t>(d.m()));
  w.u32(static_cast<std::uint32_t>(d.k()));
  w.f64(d.alpha);
  w.u32(static_cast<std::uint32_t>(d.meta.size()));
  for (const auto& [key, value] : d.meta) {
    w.str(key);
    w.str(value);
  }
  for (Eigen::Index i = 0; i < d.b.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.b.cols(); ++j) w.f64(d.b(i, j));
  }
  w.commit(path);
}

Dictionary load_dictionary(const std::string& path) {
  BinaryReader r(path, "SPMD");
  const std::uint32_t version = r.u32();
  if (version != kDictVersion) {
    throw data_error("unsupported dictionary version " +
                     std::to_string(version) + " in " + path);
  }
  const std::uint32_t m = r.u32();
  const std::uint32_t k = r.u32();
  Dictionary d;
  d.alpha = r.f64();
  const std::uint32_t meta_count = r.u32();
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    std::string key = r.str();
    d.meta[key] = r.str();
  }
  d.b.resize(m, k);
  for (std::uint32_t i = 0; i < m; ++i) {
    for (std::uint32_t j = 0; j < k; ++j) d.b(i, j) = r.f64();
  }
  return d;
}

}  // namespace spm
