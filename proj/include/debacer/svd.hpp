#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "debacer/features.hpp"

namespace debacer::features {

// Top-k right singular basis of a docs x V matrix, used as a linear map
// from sparse count vectors to k dense coordinates. No centering.
struct SvdProjection {
  Eigen::MatrixXd components;       // k x V, orthonormal rows
  Eigen::VectorXd singular_values;  // length k, descending

  std::size_t k() const { return static_cast<std::size_t>(components.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(components.cols()); }
};

struct SvdOptions {
  std::size_t oversampling = 10;
  std::size_t min_power_iterations = 4;
  std::size_t max_power_iterations = 25;
  // Power iterations stop once the top-k singular values move less than this
  // (relative to the largest) between sweeps.
  double tolerance = 1e-10;
};

// Randomized range finder with subspace (power) iterations, followed by an
// exact SVD of the small projected matrix. Deterministic per seed.
// Throws ConfigError("RankTooLarge") unless 1 <= k <= min(rows, cols).
SvdProjection fit_truncated_svd(const SparseMatrix& matrix, std::size_t k, std::uint64_t seed,
                                const SvdOptions& options = {});

// components * x. Throws DataError("DimensionMismatch").
DenseVector project_svd(const SparseVector& x, const SvdProjection& projection);

}  // namespace debacer::features
