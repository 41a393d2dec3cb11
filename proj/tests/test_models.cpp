#include <doctest.h>

#include <cmath>

#include "debacer/calibration.hpp"
#include "debacer/corpus.hpp"
#include "debacer/forest.hpp"
#include "debacer/linear.hpp"
#include "debacer/pipeline.hpp"
#include "debacer/rng.hpp"
#include "debacer/synth.hpp"
#include "helpers.hpp"

using namespace debacer::models;
using debacer::Rng;
namespace features = debacer::features;
using testutil::error_code_of;

namespace {

SparseMatrix dense_rows(const std::vector<std::vector<double>>& rows) {
  SparseMatrix m;
  m.cols = rows.empty() ? 0 : rows[0].size();
  for (const auto& r : rows) m.rows.push_back(SparseVector::from_dense(r));
  return m;
}

struct Moderator {
  std::vector<std::string> texts;
  std::vector<int> labels;
};

Moderator moderator_set(std::uint64_t seed, double noise) {
  const auto synth = debacer::corpus::generate_synthetic(debacer::corpus::annotated_set_config(seed, noise));
  Moderator m;
  for (const auto& [key, label] : synth.truth.labels) {
    m.texts.push_back(synth.corpus.find_speech(key)->text);
    m.labels.push_back(label);
  }
  return m;
}

double recall(const std::vector<int>& y, const std::vector<int>& pred) {
  double tp = 0, pos = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    pos += y[i];
    tp += y[i] && pred[i];
  }
  return tp / pos;
}

}  // namespace

TEST_CASE("predict_proba_linear") {
  LinearModel zero;
  zero.weights.assign(3, 0.0);
  SparseVector x = SparseVector::from_dense(std::vector<double>{1.0, -2.0, 5.0});
  CHECK(predict_proba_linear(zero, x) == 0.5);

  LinearModel big = zero;
  big.weights = {1e3, 0, 0};
  CHECK(predict_proba_linear(big, x) == doctest::Approx(1.0));
  big.weights = {-1e3, 0, 0};
  CHECK(predict_proba_linear(big, x) >= 0.0);

  Rng rng(3);
  for (int t = 0; t < 1000; ++t) {
    LinearModel m;
    std::vector<double> xv(4);
    m.weights.resize(4);
    for (int i = 0; i < 4; ++i) {
      m.weights[i] = rng.normal() * 3;
      xv[i] = rng.normal();
    }
    m.bias = rng.normal();
    const double z = m.weights[0] * xv[0] + m.weights[1] * xv[1] + m.weights[2] * xv[2] +
                     m.weights[3] * xv[3] + m.bias;
    CHECK(std::abs(predict_proba_linear(m, SparseVector::from_dense(xv)) - 1.0 / (1.0 + std::exp(-z))) < 1e-12);
  }
  SparseVector wrong;
  wrong.dim = 2;
  CHECK(error_code_of([&] { predict_proba_linear(zero, wrong); }) == "DimensionMismatch");
}

TEST_CASE("logistic gradient matches central finite differences") {
  Rng rng(2024);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 5 + rng.below(20), d = 1 + rng.below(8);
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    std::vector<int> y(n);
    for (auto& r : rows)
      for (auto& v : r) v = rng.uniform() < 0.7 ? rng.normal() * 2 : 0.0;
    for (auto& v : y) v = static_cast<int>(rng.below(2));
    y[0] = 0;
    y[1] = 1;
    const auto x = dense_rows(rows);
    const double C = std::exp(rng.normal() * 2);
    const bool l2 = rng.below(2) == 0;
    const auto s = sample_weights(y, rng.below(2) ? ClassWeight::Balanced : ClassWeight::None);
    LogisticObjective obj(x, y, s, C);
    std::vector<double> w(d);
    for (auto& v : w) v = rng.normal();
    const double b = rng.normal();
    std::vector<double> g;
    double gb;
    obj.gradient(w, b, l2, g, gb);

    const double h = 1e-5;
    std::vector<double> fd(d + 1);
    for (std::size_t j = 0; j < d; ++j) {
      auto wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      fd[j] = (obj.value(wp, b, l2) - obj.value(wm, b, l2)) / (2 * h);
    }
    fd[d] = (obj.value(w, b + h, l2) - obj.value(w, b - h, l2)) / (2 * h);
    double diff = 0, na = 0, nf = 0;
    for (std::size_t j = 0; j <= d; ++j) {
      const double a = j < d ? g[j] : gb;
      diff += (a - fd[j]) * (a - fd[j]);
      na += a * a;
      nf += fd[j] * fd[j];
    }
    CAPTURE(inst);
    CHECK(std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nf), 1e-12}) < 1e-4);
  }
}

TEST_CASE("balanced weights are N / (2 N_c)") {
  const std::vector<int> y{1, 0, 0, 0};
  const auto s = sample_weights(y, ClassWeight::Balanced);
  CHECK(s[0] == doctest::Approx(2.0));
  CHECK(s[1] == doctest::Approx(4.0 / 6.0));
  CHECK(sample_weights(y, ClassWeight::None) == std::vector<double>(4, 1.0));
}

TEST_CASE("logistic regression on separable 1-D data") {
  const auto x = dense_rows({{-1.0}, {1.0}});
  const std::vector<int> y{0, 1};
  for (auto pen : {Penalty::L2, Penalty::L1}) {
    LogRegParams p;
    p.penalty = pen;
    p.C = 1e4;
    const auto m = train_logreg(x, y, p);
    CHECK(m.weights[0] > 0);
    CHECK(predict_proba_linear(m, x.rows[0]) < 0.5);
    CHECK(predict_proba_linear(m, x.rows[1]) > 0.5);
  }
}

TEST_CASE("logistic regression reaches the gradient tolerance") {
  Rng rng(8);
  std::vector<std::vector<double>> rows(80, std::vector<double>(6));
  std::vector<int> y(80);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (auto& v : rows[i]) v = rng.normal();
    y[i] = rows[i][0] + 0.5 * rng.normal() > 0;
  }
  const auto x = dense_rows(rows);
  LogRegParams p;
  p.C = 3.0;
  auto m = train_logreg(x, y, p);
  CHECK(m.converged);
  LogisticObjective obj(x, y, sample_weights(y, ClassWeight::None), p.C);
  std::vector<double> g;
  double gb;
  obj.gradient(m.weights, m.bias, true, g, gb);
  double gn = gb * gb;
  for (double v : g) gn += v * v;
  CHECK(std::sqrt(gn) < 1e-6);

  p.max_iter = 2;
  m = train_logreg(x, y, p);
  CHECK_FALSE(m.converged);

  p.C = -1;
  CHECK(error_code_of([&] { train_logreg(x, y, p); }) == "InvalidConfig");
}

TEST_CASE("L1 at small C yields exact zeros on the synthetic corpus") {
  const auto data = moderator_set(3, 0.1);
  const auto pre = Preprocessor::portuguese();
  std::vector<Tokens> docs;
  for (const auto& t : data.texts) docs.push_back(pre(t));
  features::ExtractorConfig cfg;
  cfg.kind = features::FeatureKind::Bow;
  const auto fx = FeatureExtractor::fit(cfg, docs);
  const auto x = fx.transform_all(docs);
  LogRegParams p;
  p.penalty = Penalty::L1;
  p.C = 0.5;
  const auto m = train_logreg(x, data.labels, p);
  CHECK(m.converged);
  std::size_t zeros = 0;
  for (double w : m.weights) zeros += w == 0.0;
  MESSAGE("zero weights: " << zeros << " of " << m.weights.size());
  CHECK(zeros >= 1);
}

TEST_CASE("balanced weighting raises minority recall") {
  const auto data = moderator_set(5, 0.1);
  const auto pre = Preprocessor::portuguese();
  std::vector<Tokens> docs;
  for (const auto& t : data.texts) docs.push_back(pre(t));
  features::ExtractorConfig cfg;
  cfg.kind = features::FeatureKind::Bow;
  const auto x = FeatureExtractor::fit(cfg, docs).transform_all(docs);
  auto predict = [&](ClassWeight cw) {
    LogRegParams p;
    p.C = 0.1;
    p.class_weight = cw;
    const auto m = train_logreg(x, data.labels, p);
    std::vector<int> out;
    for (const auto& r : x.rows) out.push_back(predict_proba_linear(m, r) >= 0.5);
    return out;
  };
  const double r_none = recall(data.labels, predict(ClassWeight::None));
  const double r_bal = recall(data.labels, predict(ClassWeight::Balanced));
  MESSAGE("recall none " << r_none << " balanced " << r_bal);
  CHECK(r_bal > r_none);
}

TEST_CASE("linear SVM") {
  Rng rng(17);
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 60; ++i) {
    const int c = i % 2;
    rows.push_back({(c ? 1.0 : -1.0) + 0.1 * rng.normal(), 0.1 * rng.normal(), 0.1 * rng.normal()});
    y.push_back(c);
  }
  const auto x = dense_rows(rows);
  SvmParams p;
  p.C = 10.0;
  p.seed = 3;
  const auto fit = train_linear_svm(x, y, p);

  SUBCASE("separable clusters give zero training hinge loss") {
    double hinge = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
      hinge += std::max(0.0, 1.0 - (y[i] ? 1.0 : -1.0) * fit.model.decision(x.rows[i]));
    CHECK(hinge == 0.0);
  }
  SUBCASE("averaged objective is non-increasing") {
    const auto& obj = fit.trace.objective;
    REQUIRE(obj.size() >= 2);
    for (std::size_t e = 1; e < obj.size(); ++e) CHECK(obj[e] <= obj[e - 1]);
  }
  SUBCASE("calibrated probabilities are monotone in the decision value") {
    CHECK(fit.calibrator.A < 0);
    double prev = -1;
    for (double s = -5; s <= 5; s += 0.25) {
      const double p = fit.calibrator(s);
      CHECK(p >= prev);
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      prev = p;
    }
  }
  SUBCASE("deterministic per seed") {
    const auto again = train_linear_svm(x, y, p);
    CHECK(again.model.weights == fit.model.weights);
    CHECK(again.calibrator == fit.calibrator);
  }
}

TEST_CASE("SVM objective curve on the synthetic corpus") {
  const auto data = moderator_set(9, 0.1);
  const auto pre = Preprocessor::portuguese();
  std::vector<Tokens> docs;
  for (const auto& t : data.texts) docs.push_back(pre(t));
  features::ExtractorConfig cfg;
  cfg.kind = features::FeatureKind::Bong;
  cfg.svd_k = 100;
  const auto x = FeatureExtractor::fit(cfg, docs).transform_all(docs);
  for (double C : {0.5, 482.2}) {
    SvmTrace trace;
    train_linear_svm_raw(x, data.labels, {C, 1e-4, 200, 1}, &trace);
    CAPTURE(C);
    CAPTURE(trace.objective.size());
    for (std::size_t e = 1; e < trace.objective.size(); ++e) CHECK(trace.objective[e] <= trace.objective[e - 1]);
  }
}

TEST_CASE("Platt fit recovers a known sigmoid direction") {
  Rng rng(4);
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 2000; ++i) {
    const double v = rng.normal() * 2;
    s.push_back(v);
    y.push_back(rng.uniform() < 1.0 / (1.0 + std::exp(-(2.0 * v - 1.0))));
  }
  const auto c = fit_platt(s, y);
  CHECK(c.A == doctest::Approx(-2.0).epsilon(0.15));
  CHECK(c.B == doctest::Approx(1.0).epsilon(0.25));
}

TEST_CASE("impurity formulas") {
  CHECK(gini(2, 2) == doctest::Approx(0.5));
  CHECK(entropy(2, 2) == doctest::Approx(1.0));
  CHECK(gini(4, 0) == 0.0);
  CHECK(entropy(0, 3) == 0.0);
}

TEST_CASE("random forest") {
  SUBCASE("single tree fits pure-split 1-D data") {
    const auto x = dense_rows({{0.1}, {0.4}, {0.35}, {0.8}, {0.9}, {0.7}});
    const std::vector<int> y{0, 0, 0, 1, 1, 1};
    const std::vector<double> w(6, 1.0);
    const auto tree = grow_tree(x, y, w, Criterion::Gini, 1, 2, 0);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK((tree.predict_proba(x.rows[i]) >= 0.5) == (y[i] == 1));
    REQUIRE(tree.nodes.size() == 3);
    CHECK(tree.nodes[0].threshold == doctest::Approx(0.55));
  }
  SUBCASE("forest probability is the mean over trees") {
    Forest f;
    f.dim = 1;
    DecisionTree yes, no;
    yes.nodes.push_back({-1, 0, -1, -1, 0.0, 3.0, 3});
    no.nodes.push_back({-1, 0, -1, -1, 2.0, 0.0, 2});
    f.trees = {yes, no};
    CHECK(f.predict_proba(SparseVector::from_dense(std::vector<double>{1.0})) == 0.5);
  }
  SUBCASE("ties break towards the lowest feature index") {
    // Features 0 and 1 are identical, so every split ties.
    const auto x = dense_rows({{0, 0}, {0, 0}, {1, 1}, {1, 1}});
    const std::vector<int> y{0, 0, 1, 1};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto tree = grow_tree(x, y, std::vector<double>(4, 1.0), Criterion::Entropy, 2, 2, seed);
      CHECK(tree.nodes[0].feature == 0);
    }
  }
  SUBCASE("leaves hold at least one sample; determinism") {
    Rng rng(12);
    std::vector<std::vector<double>> rows;
    std::vector<int> y;
    for (int i = 0; i < 150; ++i) {
      std::vector<double> r(5);
      for (auto& v : r) v = std::round(rng.normal() * 3);
      y.push_back(r[0] + r[1] + rng.normal() > 2);
      rows.push_back(r);
    }
    const auto x = dense_rows(rows);
    ForestParams p;
    p.n_estimators = 25;
    p.class_weight = ClassWeight::BalancedSubsample;
    p.seed = 77;
    const auto f = train_random_forest(x, y, p);
    for (const auto& t : f.trees)
      for (const auto& n : t.nodes) CHECK(n.samples >= 1);
    CHECK(train_random_forest(x, y, p) == f);
    p.seed = 78;
    CHECK_FALSE(train_random_forest(x, y, p) == f);
    for (const auto& r : x.rows) {
      const double pr = f.predict_proba(r);
      CHECK(pr >= 0.0);
      CHECK(pr <= 1.0);
    }
  }
}

TEST_CASE("trained pipeline end to end") {
  static const auto data = moderator_set(31, 0.1);
  static const auto pre = Preprocessor::portuguese();
  PipelineSpec spec;
  spec.features.kind = features::FeatureKind::Bong;
  spec.features.svd_k = 150;
  spec.classifier.kind = ClassifierKind::LogReg;
  spec.classifier.C = 20.0;
  // Fitted once and shared by the subcases.
  static const auto tp = TrainedPipeline::fit_texts(spec, pre, data.texts, data.labels);

  const double p_trigger = tp.predict_proba("Vamos passar à próxima declaração política, Sr. Deputado Silva.");
  const double p_cont = tp.predict_proba("Faça favor de concluir, Sr.ª Deputada Costa.");
  const double p_empty = tp.predict_proba("");
  CHECK(p_trigger > 0.5);
  CHECK(p_cont < 0.5);
  const auto& lin = std::get<LinearModel>(tp.classifier());
  CHECK(p_empty == doctest::Approx(sigmoid(lin.bias)).epsilon(1e-12));
  CHECK(tp.classify("Vamos passar à próxima declaração política") == 1);

  SUBCASE("model file round trip") {
    testutil::TempDir dir;
    tp.save(dir / "m.json");
    const auto back = TrainedPipeline::load(dir / "m.json");
    CHECK(back.fingerprint() == tp.fingerprint());
    for (std::size_t i = 0; i < 40; ++i) CHECK(back.predict_proba(data.texts[i]) == tp.predict_proba(data.texts[i]));

    auto j = tp.to_json();
    j["classifier"]["bias"] = 0.0;
    CHECK(error_code_of([&] { TrainedPipeline::from_json(j); }) == "FingerprintMismatch");
  }
  SUBCASE("classify is exactly p >= threshold") {
    for (std::size_t i = 0; i < 60; ++i) {
      const double p = tp.predict_proba(data.texts[i]);
      CHECK(tp.classify(data.texts[i]) == (p >= tp.threshold() ? 1 : 0));
    }
    CHECK(tp.classify_proba(0.5) == 1);
  }
  SUBCASE("svm and forest pipelines") {
    spec.classifier.kind = ClassifierKind::LinearSvm;
    spec.classifier.C = 482.2;
    const auto svm = TrainedPipeline::fit_texts(spec, pre, data.texts, data.labels);
    CHECK(svm.calibrator().has_value());
    CHECK(svm.predict_proba("Vamos passar à próxima declaração política") > 0.5);
    spec.features.kind = features::FeatureKind::Bow;
    spec.features.svd_k.reset();
    spec.classifier.kind = ClassifierKind::RandomForest;
    spec.classifier.n_estimators = 50;
    spec.classifier.class_weight = ClassWeight::BalancedSubsample;
    const auto rf = TrainedPipeline::fit_texts(spec, pre, data.texts, data.labels);
    CHECK(rf.predict_proba("Vamos passar à próxima declaração política") > 0.5);
    CHECK(rf.predict_proba("Faça favor de concluir") < 0.5);
    testutil::TempDir dir;
    rf.save(dir / "rf.json");
    CHECK(TrainedPipeline::load(dir / "rf.json").fingerprint() == rf.fingerprint());
  }
  SUBCASE("single-class labels are rejected") {
    std::vector<int> zeros(data.labels.size(), 0);
    CHECK(error_code_of([&] { TrainedPipeline::fit_texts(spec, pre, data.texts, zeros); }) == "SingleClass");
  }
}
