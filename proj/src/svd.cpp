#include "debacer/svd.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <Eigen/SparseCore>
#include <fmt/format.h>

#include "debacer/errors.hpp"
#include "debacer/rng.hpp"

namespace debacer::features {

namespace {

using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

RowSparse to_eigen(const SparseMatrix& m) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    if (m.rows[r].dim != m.cols)
      throw DataError("DimensionMismatch",
                      fmt::format("row {} has dimension {}, expected {}", r, m.rows[r].dim, m.cols));
    for (const auto& [c, v] : m.rows[r].entries)
      triplets.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
  }
  RowSparse out(static_cast<Eigen::Index>(m.rows.size()), static_cast<Eigen::Index>(m.cols));
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

// Only used for the convergence test, so the Gram route is accurate enough.
Eigen::VectorXd top_singular_values(const Eigen::MatrixXd& b, std::size_t k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b * b.transpose(), Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = eig.eigenvalues().reverse();
  return ev.head(static_cast<Eigen::Index>(k)).cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

SvdProjection fit_truncated_svd(const SparseMatrix& matrix, std::size_t k, std::uint64_t seed,
                                const SvdOptions& options) {
  const std::size_t rows = matrix.n_rows();
  const std::size_t cols = matrix.cols;
  if (k < 1 || k > std::min(rows, cols))
    throw ConfigError("RankTooLarge",
                      fmt::format("k={} must lie in [1, min({}, {})]", k, rows, cols));

  const RowSparse a = to_eigen(matrix);
  const Eigen::Index l = static_cast<Eigen::Index>(std::min(k + options.oversampling, std::min(rows, cols)));
  const Eigen::Index kk = static_cast<Eigen::Index>(k);

  Rng rng(seed, 0x5f3d);
  Eigen::MatrixXd omega(static_cast<Eigen::Index>(cols), l);
  for (Eigen::Index j = 0; j < l; ++j)
    for (Eigen::Index i = 0; i < omega.rows(); ++i) omega(i, j) = rng.normal();

  Eigen::MatrixXd q = orthonormal_basis(a * omega);
  Eigen::VectorXd previous;
  for (std::size_t it = 0; it < options.max_power_iterations; ++it) {
    const Eigen::MatrixXd z = orthonormal_basis(a.transpose() * q);
    q = orthonormal_basis(a * z);
    if (it + 1 < options.min_power_iterations) continue;
    const Eigen::MatrixXd b = (a.transpose() * q).transpose();
    Eigen::VectorXd sv = top_singular_values(b, k);
    if (previous.size() == sv.size()) {
      const double scale = std::max(sv(0), 1e-300);
      if ((sv - previous).cwiseAbs().maxCoeff() <= options.tolerance * scale) break;
    }
    previous = std::move(sv);
  }

  const Eigen::MatrixXd b = (a.transpose() * q).transpose();  // l x V
  Eigen::BDCSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinV);
  SvdProjection out;
  out.singular_values = svd.singularValues().head(kk);
  out.components = svd.matrixV().leftCols(kk).transpose();

  // Sign convention: the largest-magnitude entry of each component is positive.
  for (Eigen::Index r = 0; r < out.components.rows(); ++r) {
    Eigen::Index arg = 0;
    out.components.row(r).cwiseAbs().maxCoeff(&arg);
    if (out.components(r, arg) < 0) out.components.row(r) *= -1.0;
  }
  return out;
}

DenseVector project_svd(const SparseVector& x, const SvdProjection& projection) {
  if (x.dim != projection.dim())
    throw DataError("DimensionMismatch",
                    fmt::format("vector dimension {} vs projection dimension {}", x.dim, projection.dim()));
  DenseVector out(projection.k(), 0.0);
  for (const auto& [i, v] : x.entries) {
    const auto col = projection.components.col(static_cast<Eigen::Index>(i));
    for (std::size_t r = 0; r < out.size(); ++r) out[r] += col(static_cast<Eigen::Index>(r)) * v;
  }
  return out;
}

}  // namespace debacer::features
