#include "debacer/linear.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "debacer/errors.hpp"
#include "debacer/rng.hpp"

namespace debacer::models {

std::string to_string(Penalty p) { return p == Penalty::L1 ? "l1" : "l2"; }

std::string to_string(ClassWeight w) {
  switch (w) {
    case ClassWeight::None: return "none";
    case ClassWeight::Balanced: return "balanced";
    case ClassWeight::BalancedSubsample: return "balanced_subsample";
  }
  return "none";
}

Penalty parse_penalty(const std::string& s) {
  if (s == "l1" || s == "L1") return Penalty::L1;
  if (s == "l2" || s == "L2") return Penalty::L2;
  throw ConfigError("InvalidConfig", "penalty '" + s + "' (expected l1 or l2)");
}

ClassWeight parse_class_weight(const std::string& s) {
  if (s == "none" || s == "None" || s.empty()) return ClassWeight::None;
  if (s == "balanced") return ClassWeight::Balanced;
  if (s == "balanced_subsample") return ClassWeight::BalancedSubsample;
  throw ConfigError("InvalidConfig",
                    "class_weight '" + s + "' (expected none, balanced or balanced_subsample)");
}

double LinearModel::decision(const SparseVector& x) const {
  if (x.dim != weights.size())
    throw DataError("DimensionMismatch", "input has dimension " + std::to_string(x.dim) +
                                             ", model expects " + std::to_string(weights.size()));
  return x.dot(weights) + bias;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double predict_proba_linear(const LinearModel& model, const SparseVector& x) {
  return sigmoid(model.decision(x));
}

namespace {

// log(1 + exp(-m)) without overflow.
double logistic_loss(double m) {
  return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

void check_inputs(const SparseMatrix& x, std::span<const int> y) {
  if (x.n_rows() != y.size())
    throw DataError("DimensionMismatch", std::to_string(x.n_rows()) + " rows but " +
                                             std::to_string(y.size()) + " labels");
  if (y.empty()) throw DataError("EmptyCorpus", "no training examples");
  for (int v : y)
    if (v != 0 && v != 1) throw DataError("InvalidLabel", "labels must be 0 or 1");
  for (const auto& r : x.rows)
    if (r.dim != x.cols) throw DataError("DimensionMismatch", "row dimension differs from matrix");
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

std::vector<double> sample_weights(std::span<const int> y, ClassWeight mode) {
  std::vector<double> s(y.size(), 1.0);
  if (mode == ClassWeight::None) return s;
  double n_c[2] = {0.0, 0.0};
  for (int v : y) n_c[v] += 1.0;
  const double n = static_cast<double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) s[i] = n / (2.0 * n_c[y[i]]);
  return s;
}

LogisticObjective::LogisticObjective(const SparseMatrix& x, std::span<const int> y,
                                     std::vector<double> weights, double C)
    : x_(x), y_(y), s_(std::move(weights)), C_(C) {}

double LogisticObjective::value(std::span<const double> w, double b, bool l2) const {
  const double n = static_cast<double>(y_.size());
  double data = 0.0;
  for (std::size_t i = 0; i < y_.size(); ++i) {
    const double z = y_[i] ? 1.0 : -1.0;
    data += s_[i] * logistic_loss(z * (x_.rows[i].dot(w) + b));
  }
  double f = C_ * data / n;
  if (l2) f += 0.5 * norm2(w) / n;
  return f;
}

double LogisticObjective::gradient(std::span<const double> w, double b, bool l2,
                                   std::vector<double>& grad_w, double& grad_b) const {
  const double n = static_cast<double>(y_.size());
  grad_w.assign(w.size(), 0.0);
  grad_b = 0.0;
  double data = 0.0;
  for (std::size_t i = 0; i < y_.size(); ++i) {
    const double m = x_.rows[i].dot(w) + b;
    const double z = y_[i] ? 1.0 : -1.0;
    data += s_[i] * logistic_loss(z * m);
    const double r = C_ * s_[i] * (sigmoid(m) - y_[i]) / n;
    for (const auto& [j, v] : x_.rows[i].entries) grad_w[j] += r * v;
    grad_b += r;
  }
  double f = C_ * data / n;
  if (l2) {
    f += 0.5 * norm2(w) / n;
    for (std::size_t j = 0; j < w.size(); ++j) grad_w[j] += w[j] / n;
  }
  return f;
}

namespace {

// Upper bound on the Lipschitz constant of the smooth part's gradient.
double lipschitz_bound(const SparseMatrix& x, std::span<const double> s, double C, bool l2) {
  const double n = static_cast<double>(x.n_rows());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.n_rows(); ++i) {
    double r = 1.0;
    for (const auto& e : x.rows[i].entries) r += e.second * e.second;
    acc += s[i] * r;
  }
  return 0.25 * C * acc / n + (l2 ? 1.0 / n : 0.0);
}

LinearModel fit_l2(const LogisticObjective& obj, const LogRegParams& p, double lip) {
  const std::size_t d = obj.dim();
  std::vector<double> w(d, 0.0), g, w_new(d), g_new;
  double b = 0.0, gb = 0.0, gb_new = 0.0;
  double f = obj.gradient(w, b, true, g, gb);
  double step = 1.0 / lip;
  LinearModel m;
  m.converged = false;
  std::size_t it = 0;
  for (; it < p.max_iter; ++it) {
    const double gnorm2 = norm2(g) + gb * gb;
    if (std::sqrt(gnorm2) < p.tol) {
      m.converged = true;
      break;
    }
    double t = step;
    double f_new = 0.0;
    double b_new = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t j = 0; j < d; ++j) w_new[j] = w[j] - t * g[j];
      b_new = b - t * gb;
      f_new = obj.value(w_new, b_new, true);
      if (f_new <= f - 1e-4 * t * gnorm2) break;
      t *= 0.5;
    }
    if (!(f_new <= f)) break;  // no descent possible in floating point
    f_new = obj.gradient(w_new, b_new, true, g_new, gb_new);
    // Barzilai-Borwein trial step for the next iteration.
    double ss = (b_new - b) * (b_new - b), sy = (b_new - b) * (gb_new - gb);
    for (std::size_t j = 0; j < d; ++j) {
      const double sj = w_new[j] - w[j];
      ss += sj * sj;
      sy += sj * (g_new[j] - g[j]);
    }
    step = sy > 0 ? std::clamp(ss / sy, 1e-3 / lip, 1e12) : std::min(2.0 * t, 1e12);
    std::swap(w, w_new);
    std::swap(g, g_new);
    b = b_new;
    gb = gb_new;
    f = f_new;
  }
  m.weights = std::move(w);
  m.bias = b;
  m.iterations = it;
  return m;
}

LinearModel fit_l1(const LogisticObjective& obj, const LogRegParams& p, double lip) {
  const std::size_t d = obj.dim();
  const double lam = 1.0 / static_cast<double>(obj.size());
  auto composite = [&](std::span<const double> w, double b) {
    double l1 = 0.0;
    for (double v : w) l1 += std::abs(v);
    return obj.value(w, b, false) + lam * l1;
  };
  auto soft = [](double v, double k) {
    if (v > k) return v - k;
    if (v < -k) return v + k;
    return 0.0;
  };

  std::vector<double> x(d, 0.0), y(d, 0.0), x_new(d), g;
  double xb = 0.0, yb = 0.0, xb_new = 0.0, gb = 0.0;
  double fx = composite(x, xb);
  double L = std::max(lip * 1e-3, 1e-12);
  double tk = 1.0;
  LinearModel m;
  m.converged = false;
  std::size_t it = 0;
  for (; it < p.max_iter; ++it) {
    const double fy = obj.gradient(y, yb, false, g, gb);
    double gap2 = 0.0;
    for (int bt = 0; bt < 100; ++bt) {
      for (std::size_t j = 0; j < d; ++j) x_new[j] = soft(y[j] - g[j] / L, lam / L);
      xb_new = yb - gb / L;
      double lin = (xb_new - yb) * gb;
      gap2 = (xb_new - yb) * (xb_new - yb);
      for (std::size_t j = 0; j < d; ++j) {
        const double dj = x_new[j] - y[j];
        lin += g[j] * dj;
        gap2 += dj * dj;
      }
      if (obj.value(x_new, xb_new, false) <= fy + lin + 0.5 * L * gap2 + 1e-15 * std::abs(fy)) break;
      L *= 2.0;
    }
    // Gradient mapping norm at y.
    const bool done = L * std::sqrt(gap2) < p.tol;
    const double f_new = composite(x_new, xb_new);
    if (f_new > fx) {
      // Restart momentum from the last accepted point.
      y = x;
      yb = xb;
      tk = 1.0;
      if (done) {
        m.converged = true;
        break;
      }
      continue;
    }
    const double tk1 = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    const double beta = (tk - 1.0) / tk1;
    for (std::size_t j = 0; j < d; ++j) y[j] = x_new[j] + beta * (x_new[j] - x[j]);
    yb = xb_new + beta * (xb_new - xb);
    std::swap(x, x_new);
    xb = xb_new;
    fx = f_new;
    tk = tk1;
    if (done) {
      m.converged = true;
      break;
    }
  }
  m.weights = std::move(x);
  m.bias = xb;
  m.iterations = it;
  return m;
}

}  // namespace

LinearModel train_logreg(const SparseMatrix& x, std::span<const int> y, const LogRegParams& p) {
  check_inputs(x, y);
  if (!(p.C > 0) || !std::isfinite(p.C)) throw ConfigError("InvalidConfig", "C must be positive");
  if (!(p.tol > 0)) throw ConfigError("InvalidConfig", "tol must be positive");
  const auto s = sample_weights(y, p.class_weight);
  LogisticObjective obj(x, y, s, p.C);
  const double lip = lipschitz_bound(x, s, p.C, p.penalty == Penalty::L2);
  LinearModel m = p.penalty == Penalty::L2 ? fit_l2(obj, p, lip) : fit_l1(obj, p, lip);
  m.penalty = p.penalty;
  m.C = p.C;
  m.class_weight = p.class_weight;
  for (double v : m.weights)
    if (!std::isfinite(v)) throw TrainingError("Diverged", "non-finite logistic regression weight");
  if (!std::isfinite(m.bias)) throw TrainingError("Diverged", "non-finite logistic regression bias");
  return m;
}

double svm_objective(const LinearModel& model, const SparseMatrix& x, std::span<const int> y,
                     double C) {
  const double n = static_cast<double>(y.size());
  const double lambda = 1.0 / (C * n);
  double hinge = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double z = y[i] ? 1.0 : -1.0;
    hinge += std::max(0.0, 1.0 - z * model.decision(x.rows[i]));
  }
  return 0.5 * lambda * (norm2(model.weights) + model.bias * model.bias) + hinge / n;
}

LinearModel train_linear_svm_raw(const SparseMatrix& x, std::span<const int> y,
                                 const SvmParams& p, SvmTrace* trace) {
  check_inputs(x, y);
  if (!(p.C > 0) || !std::isfinite(p.C)) throw ConfigError("InvalidConfig", "C must be positive");
  if (p.max_epochs == 0) throw ConfigError("InvalidConfig", "max_epochs must be positive");
  const std::size_t n = y.size();
  const std::size_t d = x.cols;
  const double lambda = 1.0 / (p.C * static_cast<double>(n));

  double max_sq = 1.0;
  for (const auto& r : x.rows) {
    double s = 1.0;
    for (const auto& e : r.entries) s += e.second * e.second;
    max_sq = std::max(max_sq, s);
  }
  const double eta0 = 1.0 / max_sq;

  // Current iterate w = alpha * u; index d holds the bias. Within an epoch
  // the running mean of the iterates is a * (v + c * u), so each step costs
  // time proportional to the row's nonzeros.
  std::vector<double> u(d + 1, 0.0), v(d + 1, 0.0);
  double alpha = 1.0, a = 1.0, c = 0.0;
  std::size_t t = 0;

  auto to_model = [&](const std::vector<double>& full) {
    LinearModel m;
    m.weights.assign(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(d));
    m.bias = full[d];
    m.C = p.C;
    return m;
  };
  auto objective = [&](const std::vector<double>& full) {
    return svm_objective(to_model(full), x, y, p.C);
  };

  // Reported average. Each epoch it moves towards that epoch's mean iterate
  // by the step in [0, 1] that minimizes the primal objective, so the
  // recorded curve cannot increase.
  std::vector<double> avg(d + 1, 0.0), epoch_mean(d + 1), dir(d + 1);
  double avg_obj = objective(avg);
  std::vector<double> base_margin(n), dir_margin(n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(p.seed, 0x5f3);
  bool converged = false;
  std::size_t epoch = 0;
  for (; epoch < p.max_epochs && !converged; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    std::size_t local = 0;
    for (std::size_t i : order) {
      ++t;
      ++local;
      const double eta = eta0 / (1.0 + lambda * eta0 * static_cast<double>(t));
      const double z = y[i] ? 1.0 : -1.0;
      const auto& row = x.rows[i].entries;
      double dot = u[d];
      for (const auto& [j, val] : row) dot += u[j] * val;
      const double margin = z * alpha * dot;
      alpha *= 1.0 - eta * lambda;
      if (margin < 1.0) {
        const double delta = eta * z / alpha;
        for (const auto& [j, val] : row) {
          u[j] += delta * val;
          v[j] -= c * delta * val;
        }
        u[d] += delta;
        v[d] -= c * delta;
      }
      if (local == 1) {
        std::fill(v.begin(), v.end(), 0.0);
        a = 1.0;
        c = alpha;
      } else {
        const double rho = 1.0 / static_cast<double>(local);
        const double a_new = (1.0 - rho) * a;
        c += rho * alpha / a_new;
        a = a_new;
      }
      if (alpha < 1e-9 || std::abs(c) > 1e150) {
        for (std::size_t j = 0; j <= d; ++j) {
          v[j] += c * u[j];
          u[j] *= alpha;
        }
        c = 0.0;
        alpha = 1.0;
      }
    }
    for (std::size_t j = 0; j <= d; ++j) {
      epoch_mean[j] = a * (v[j] + c * u[j]);
      dir[j] = epoch_mean[j] - avg[j];
    }

    // P(theta) = lambda/2 |avg + theta dir|^2 + mean hinge; convex in theta.
    double aa = 0, ad = 0, dd = 0;
    for (std::size_t j = 0; j <= d; ++j) {
      aa += avg[j] * avg[j];
      ad += avg[j] * dir[j];
      dd += dir[j] * dir[j];
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double z = y[i] ? 1.0 : -1.0;
      double ma = avg[d], md = dir[d];
      for (const auto& [j, val] : x.rows[i].entries) {
        ma += avg[j] * val;
        md += dir[j] * val;
      }
      base_margin[i] = z * ma;
      dir_margin[i] = z * md;
    }
    auto along = [&](double th) {
      double h = 0;
      for (std::size_t i = 0; i < n; ++i) h += std::max(0.0, 1.0 - base_margin[i] - th * dir_margin[i]);
      return 0.5 * lambda * (aa + 2 * th * ad + th * th * dd) + h / static_cast<double>(n);
    };
    double lo = 0.0, hi = 1.0;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = along(x1), f2 = along(x2);
    for (int it = 0; it < 80; ++it) {
      if (f1 <= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - g * (hi - lo);
        f1 = along(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + g * (hi - lo);
        f2 = along(x2);
      }
    }
    double theta = 0.5 * (lo + hi);
    if (along(1.0) <= along(theta)) theta = 1.0;

    std::vector<double> candidate(d + 1);
    for (std::size_t j = 0; j <= d; ++j) candidate[j] = avg[j] + theta * dir[j];
    const double cand_obj = objective(candidate);
    const double prev = avg_obj;
    if (cand_obj <= avg_obj) {
      avg.swap(candidate);
      avg_obj = cand_obj;
    }
    if (trace) trace->objective.push_back(avg_obj);
    if (epoch + 1 >= 5 && prev - avg_obj <= p.tol * std::max(avg_obj, 1e-12)) converged = true;
  }

  LinearModel m = to_model(avg);
  m.penalty = Penalty::L2;
  m.converged = converged;
  m.iterations = epoch;
  for (double w : m.weights)
    if (!std::isfinite(w)) throw TrainingError("Diverged", "non-finite SVM weight");
  return m;
}

}  // namespace debacer::models
