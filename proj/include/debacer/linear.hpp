#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "debacer/features.hpp"

namespace debacer::models {

using features::SparseMatrix;
using features::SparseVector;

enum class Penalty { L1, L2 };
enum class ClassWeight { None, Balanced, BalancedSubsample };

std::string to_string(Penalty p);
std::string to_string(ClassWeight w);
Penalty parse_penalty(const std::string& s);
ClassWeight parse_class_weight(const std::string& s);

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  Penalty penalty = Penalty::L2;
  double C = 1.0;
  ClassWeight class_weight = ClassWeight::None;
  // False when the solver hit its iteration cap; the best iterate is kept.
  bool converged = true;
  std::size_t iterations = 0;

  std::size_t dim() const { return weights.size(); }
  // w.x + b; throws DataError("DimensionMismatch").
  double decision(const SparseVector& x) const;
};

double sigmoid(double z);

// Per-class weights; "balanced" gives class c the weight N / (2 N_c).
// BalancedSubsample is treated like Balanced outside of forests.
std::vector<double> sample_weights(std::span<const int> y, ClassWeight mode);

struct LogRegParams {
  Penalty penalty = Penalty::L2;
  double C = 1.0;
  ClassWeight class_weight = ClassWeight::None;
  double tol = 1e-6;
  std::size_t max_iter = 20000;
  std::uint64_t seed = 0;  // the solvers are deterministic; kept for provenance
};

// Objective, scaled by 1/N:
//   (C/N) sum_i s_i log(1 + exp(-z_i (w.x_i + b))) + R(w)/N
// with z_i = 2 y_i - 1, R = |w|^2/2 (L2) or |w|_1 (L1). The bias is not
// penalized.
class LogisticObjective {
 public:
  LogisticObjective(const SparseMatrix& x, std::span<const int> y, std::vector<double> weights,
                    double C);

  // Smooth part only: data term plus the L2 term when l2 is true.
  double value(std::span<const double> w, double b, bool l2) const;
  double gradient(std::span<const double> w, double b, bool l2, std::vector<double>& grad_w,
                  double& grad_b) const;
  std::size_t dim() const { return x_.cols; }
  std::size_t size() const { return y_.size(); }

 private:
  const SparseMatrix& x_;
  std::span<const int> y_;
  std::vector<double> s_;
  double C_;
};

// L2: full-batch gradient descent with Armijo backtracking (Barzilai-Borwein
// trial steps). L1: accelerated proximal gradient with soft-thresholding and
// backtracking. Converged when the (proximal) gradient norm drops below tol.
LinearModel train_logreg(const SparseMatrix& x, std::span<const int> y, const LogRegParams& params);

// sigmoid(w.x + b)
double predict_proba_linear(const LinearModel& model, const SparseVector& x);

struct SvmParams {
  double C = 1.0;
  double tol = 1e-4;  // relative objective change between epochs
  std::size_t max_epochs = 200;
  std::uint64_t seed = 0;
};

struct SvmTrace {
  // Primal objective of the averaged iterate at the end of each epoch.
  std::vector<double> objective;
};

// Primal hinge loss with lambda = 1/(C N), minimized by stochastic
// subgradient steps eta_t = eta0 / (1 + lambda eta0 t) over a seeded
// per-epoch permutation. The returned model is an average of the iterates:
// after each epoch the average moves towards that epoch's mean iterate by
// the convex-combination weight that minimizes the primal objective, so the
// recorded curve never increases. The bias is an implicit constant feature.
LinearModel train_linear_svm_raw(const SparseMatrix& x, std::span<const int> y,
                                 const SvmParams& params, SvmTrace* trace = nullptr);

double svm_objective(const LinearModel& model, const SparseMatrix& x, std::span<const int> y,
                     double C);

}  // namespace debacer::models
