#include "debacer/calibration.hpp"

#include <cmath>
#include <numeric>

#include "debacer/errors.hpp"
#include "debacer/rng.hpp"

namespace debacer::models {

double PlattCalibrator::operator()(double s) const {
  const double f = A * s + B;
  if (f >= 0) {
    const double e = std::exp(-f);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(f));
}

PlattCalibrator fit_platt(std::span<const double> dec, std::span<const int> y) {
  if (dec.size() != y.size() || dec.empty())
    throw DataError("DimensionMismatch", "decision values and labels differ in length");
  double prior1 = 0, prior0 = 0;
  for (int v : y) (v ? prior1 : prior0) += 1.0;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  std::vector<double> t(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) t[i] = y[i] ? hi : lo;

  const double sigma = 1e-12, min_step = 1e-10, eps = 1e-5;
  double A = 0.0, B = std::log((prior0 + 1.0) / (prior1 + 1.0));
  auto objective = [&](double a, double b) {
    double f = 0.0;
    for (std::size_t i = 0; i < dec.size(); ++i) {
      const double fa = dec[i] * a + b;
      f += fa >= 0 ? t[i] * fa + std::log1p(std::exp(-fa)) : (t[i] - 1.0) * fa + std::log1p(std::exp(fa));
    }
    return f;
  };
  double fval = objective(A, B);
  for (int it = 0; it < 100; ++it) {
    double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < dec.size(); ++i) {
      const double fa = dec[i] * A + B;
      double p, q;
      if (fa >= 0) {
        const double e = std::exp(-fa);
        p = e / (1.0 + e);
        q = 1.0 / (1.0 + e);
      } else {
        const double e = std::exp(fa);
        p = 1.0 / (1.0 + e);
        q = e / (1.0 + e);
      }
      const double d2 = p * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < eps && std::abs(g2) < eps) break;
    const double det = h11 * h22 - h21 * h21;
    const double dA = -(h22 * g1 - h21 * g2) / det;
    const double dB = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * dA + g2 * dB;
    double step = 1.0;
    bool moved = false;
    while (step >= min_step) {
      const double nA = A + step * dA, nB = B + step * dB;
      const double nf = objective(nA, nB);
      if (nf < fval + 1e-4 * step * gd) {
        A = nA;
        B = nB;
        fval = nf;
        moved = true;
        break;
      }
      step /= 2.0;
    }
    if (!moved) break;
  }
  if (!std::isfinite(A) || !std::isfinite(B))
    throw TrainingError("Diverged", "Platt calibration produced non-finite parameters");
  return {A, B};
}

SvmFit train_linear_svm(const SparseMatrix& x, std::span<const int> y, const SvmParams& params) {
  SvmFit fit;
  fit.model = train_linear_svm_raw(x, y, params, &fit.trace);

  // Stratified 3-fold: shuffle each class, deal round-robin.
  constexpr std::size_t kFolds = 3;
  std::vector<std::size_t> fold(y.size());
  Rng rng(params.seed, 0x91a7);
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == cls) idx.push_back(i);
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t k = 0; k < idx.size(); ++k) fold[idx[k]] = k % kFolds;
  }

  std::vector<double> oof(y.size(), 0.0);
  for (std::size_t f = 0; f < kFolds; ++f) {
    SparseMatrix xt;
    xt.cols = x.cols;
    std::vector<int> yt;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (fold[i] != f) {
        xt.rows.push_back(x.rows[i]);
        yt.push_back(y[i]);
      }
    bool has_both = false;
    for (int v : yt) has_both |= v != yt.front();
    if (yt.empty() || !has_both) {
      for (std::size_t i = 0; i < y.size(); ++i)
        if (fold[i] == f) oof[i] = fit.model.decision(x.rows[i]);
      continue;
    }
    SvmParams inner = params;
    inner.seed = mix64(params.seed + 0x100 + f);
    const LinearModel m = train_linear_svm_raw(xt, yt, inner);
    for (std::size_t i = 0; i < y.size(); ++i)
      if (fold[i] == f) oof[i] = m.decision(x.rows[i]);
  }
  fit.calibrator = fit_platt(oof, y);
  return fit;
}

}  // namespace debacer::models
