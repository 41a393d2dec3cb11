#pragma once

#include <span>
#include <utility>

#include "debacer/linear.hpp"

namespace debacer::models {

// p(s) = 1 / (1 + exp(A s + B)).
struct PlattCalibrator {
  double A = 0.0;
  double B = 0.0;

  double operator()(double s) const;
  bool operator==(const PlattCalibrator&) const = default;
};

// Newton's method with backtracking on the regularized targets
// (N+ + 1)/(N+ + 2) and 1/(N- + 2).
PlattCalibrator fit_platt(std::span<const double> decision, std::span<const int> y);

struct SvmFit {
  LinearModel model;
  PlattCalibrator calibrator;
  SvmTrace trace;  // of the final fit on all rows
};

// Fits the SVM on all rows; the calibrator is fitted on out-of-fold decision
// values from an internal 3-fold split stratified by label.
SvmFit train_linear_svm(const SparseMatrix& x, std::span<const int> y, const SvmParams& params);

}  // namespace debacer::models
