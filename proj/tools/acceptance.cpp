// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "debacer/annotate.hpp"
#include "debacer/calibration.hpp"
#include "debacer/eval.hpp"
#include "debacer/linear.hpp"
#include "debacer/partition.hpp"
#include "debacer/rng.hpp"
#include "debacer/svd.hpp"
#include "debacer/synth.hpp"

using namespace debacer;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::cout << fmt::format("{} {}: {} [{:.1f} s]", o.pass ? "PASS" : "FAIL", name, o.detail, secs) << std::endl;
}

eval::Dataset synthetic_dataset(std::uint64_t seed) {
  const auto cfg = corpus::annotated_set_config(seed, 0.1);
  const auto s = corpus::generate_synthetic(cfg);
  return eval::make_dataset(s.corpus, cfg.agenda_label, s.truth.labels);
}

models::PipelineSpec lr_spec(features::FeatureKind kind) {
  models::PipelineSpec s;
  s.features.kind = kind;
  if (kind != features::FeatureKind::Word2Vec) s.features.svd_k = 150;
  s.classifier.C = 20;
  return s;
}

// ---------------------------------------------------------------------------

Outcome end_to_end() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto cfg = corpus::annotated_set_config(42, 0.1);
  const auto s = corpus::generate_synthetic(cfg);
  const auto data = eval::make_dataset(s.corpus, cfg.agenda_label, s.truth.labels);
  const auto folds = eval::stratified_multilabel_kfold(data.debaters, data.y, 5, 42);
  const auto cv = eval::run_cv(lr_spec(features::FeatureKind::Bong), textprep::Preprocessor::portuguese(), data, folds);
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  const double f1 = cv.aggregates.at("f1").mean, ce = cv.aggregates.at("cross_entropy").mean,
               bs = cv.aggregates.at("brier_positive").mean;
  o.note(fmt::format("{} moderator speeches, {} positives", data.size(), data.positives()));
  o.note(fmt::format("F1 {:.4f} +- {:.4f} (>= 0.97)", f1, cv.aggregates.at("f1").std));
  o.note(fmt::format("CE {:.4f} (<= 0.05)", ce));
  o.note(fmt::format("BS+ {:.4f} (<= 0.08)", bs));
  o.note(fmt::format("runtime {:.1f} s (< 120)", secs));
  o.require(f1 >= 0.97, "F1");
  o.require(ce <= 0.05, "CE");
  o.require(bs <= 0.08, "BS+");
  o.require(secs < 120.0, "runtime");
  return o;
}

Outcome pipeline_ordering() {
  Outcome o;
  const auto data = synthetic_dataset(42);
  const auto folds = eval::stratified_multilabel_kfold(data.debaters, data.y, 10, 42);
  const auto pre = textprep::Preprocessor::portuguese();
  std::vector<eval::CvResult> rs;
  for (auto k : {features::FeatureKind::Bow, features::FeatureKind::Bong, features::FeatureKind::Word2Vec})
    rs.push_back(eval::run_cv(lr_spec(k), pre, data, folds));
  const double bow = rs[0].aggregates.at("f1").mean, bong = rs[1].aggregates.at("f1").mean,
               w2v = rs[2].aggregates.at("f1").mean;
  o.note(fmt::format("F1 BoW {:.4f}, BoNG {:.4f}, word2vec {:.4f}", bow, bong, w2v));
  o.require(bow >= w2v - 0.01 && bong >= w2v - 0.01, "sparse F1 >= word2vec F1 - 0.01");

  const auto cmp = eval::compare_pipelines(rs, 0.05);
  bool adjusted = cmp.p_adjusted.size() == 3;
  for (std::size_t i = 0; i < 3 && adjusted; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) adjusted = adjusted && cmp.p_adjusted[i][j] >= cmp.p_raw[i][j] && cmp.p_adjusted[i][j] <= 1.0;
  o.require(adjusted, "Holm-adjusted p matrix");
  bool together = false;
  std::string cliques;
  for (const auto& c : cmp.cliques) {
    const std::set<std::size_t> m(c.begin(), c.end());
    together = together || (m.count(0) && m.count(1));
    std::vector<std::string> names;
    for (auto i : c) names.push_back(cmp.labels[i]);
    cliques += fmt::format("{{{}}}", fmt::join(names, ", "));
  }
  o.note("cliques " + cliques);
  o.note(fmt::format("adjusted p(BoW,BoNG) {:.3f}", cmp.p_adjusted[0][1]));
  o.require(together, "BoW and BoNG share a clique");
  return o;
}

Outcome metric_oracles() {
  Outcome o;
  Rng rng(99);
  double worst = 0.0;
  for (int draw = 0; draw < 10000; ++draw) {
    const std::size_t n = 1 + rng.below(50);
    std::vector<int> y(n);
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.uniform() < 0.25;
      const auto kind = rng.below(25);
      p[i] = kind == 0 ? 0.0 : kind == 1 ? 1.0 : kind == 2 ? 0.5 : rng.uniform();
    }
    y[rng.below(n)] = 1;
    // direct formulas
    double tp = 0, fp = 0, fn = 0, ce = 0, bs = 0, npos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool hit = p[i] >= 0.5;
      tp += y[i] && hit;
      fp += !y[i] && hit;
      fn += y[i] && !hit;
      const double q = std::clamp(p[i], 1e-15, 1 - 1e-15);
      ce -= y[i] ? std::log(q) : std::log(1 - q);
      if (y[i]) bs += (1 - p[i]) * (1 - p[i]), ++npos;
    }
    const double f1 = 2 * tp + fp + fn > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    const auto r = eval::evaluate(y, p, 0.5);
    worst = std::max({worst, std::abs(r.f1 - f1), std::abs(r.cross_entropy - ce / static_cast<double>(n)),
                      std::abs(r.brier_positive - bs / npos)});
  }
  o.note(fmt::format("max deviation over 10000 draws {:.2e} (< 1e-9)", worst));
  o.require(worst < 1e-9, "oracle agreement");
  const std::vector<int> y{0, 1, 1, 0, 1, 0, 0, 1};
  const std::vector<double> half(y.size(), 0.5);
  const double dev = std::abs(eval::cross_entropy(y, half) - std::log(2.0));
  o.note(fmt::format("|CE(0.5) - ln 2| {:.1e} (< 1e-12)", dev));
  o.require(dev < 1e-12, "CE of uniform 0.5");
  return o;
}

Outcome stratification() {
  Outcome o;
  for (std::uint64_t seed : {1, 2, 3, 7, 42}) {
    const auto data = synthetic_dataset(seed);
    const auto f = eval::stratified_multilabel_kfold(data.debaters, data.y, 5, seed);
    std::map<std::string, double> total;
    for (const auto& d : data.debaters) total[d] += 1;
    std::vector<std::size_t> pos_per_fold;
    double worst = 0;
    for (std::size_t k = 0; k < 5; ++k) {
      std::size_t pos = 0;
      std::map<std::string, double> per;
      for (auto i : f.test_indices(k)) {
        pos += static_cast<std::size_t>(data.y[i]);
        per[data.debaters[i]] += 1;
      }
      pos_per_fold.push_back(pos);
      for (const auto& [d, n] : total) worst = std::max(worst, std::abs(per[d] - n / 5.0));
      o.require(pos == 8 || pos == 9, fmt::format("seed {} fold {} has {} positives", seed, k, pos));
    }
    o.require(worst <= 1.0, fmt::format("seed {} debater deviation {:.1f}", seed, worst));
    if (seed == 42)
      o.note(fmt::format("seed 42 positives per fold {}, max debater deviation {:.1f}", fmt::join(pos_per_fold, "/"),
                         worst));
  }
  o.note("seeds 1, 2, 3, 7, 42 checked");
  return o;
}

models::SparseMatrix dense_rows(const std::vector<std::vector<double>>& rows) {
  models::SparseMatrix m;
  m.cols = rows.empty() ? 0 : rows[0].size();
  for (const auto& r : rows) m.rows.push_back(models::SparseVector::from_dense(r));
  return m;
}

models::SparseMatrix moderator_matrix(std::uint64_t seed, features::FeatureKind kind, std::optional<std::size_t> svd_k,
                                      std::vector<int>& y) {
  const auto data = synthetic_dataset(seed);
  const auto pre = textprep::Preprocessor::portuguese();
  std::vector<textprep::Tokens> docs;
  for (const auto& t : data.texts) docs.push_back(pre(t));
  features::ExtractorConfig cfg;
  cfg.kind = kind;
  cfg.svd_k = svd_k;
  y = data.y;
  return features::FeatureExtractor::fit(cfg, docs).transform_all(docs);
}

Outcome optimization() {
  Outcome o;
  Rng rng(7);
  double worst = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 5 + rng.below(25), d = 1 + rng.below(10);
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    for (auto& r : rows)
      for (auto& v : r) v = rng.uniform() < 0.6 ? rng.normal() * 2 : 0.0;
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng.below(2));
    y[0] = 0;
    y[1] = 1;
    const auto x = dense_rows(rows);
    const bool l2 = rng.below(2) == 0;
    models::LogisticObjective obj(x, y, models::sample_weights(y, models::ClassWeight::None),
                                  std::exp(rng.normal() * 2));
    std::vector<double> w(d), g;
    for (auto& v : w) v = rng.normal();
    const double b = rng.normal();
    double gb = 0;
    obj.gradient(w, b, l2, g, gb);
    const double h = 1e-5;
    double diff = 0, na = 0;
    for (std::size_t j = 0; j <= d; ++j) {
      double fd;
      if (j < d) {
        auto wp = w, wm = w;
        wp[j] += h;
        wm[j] -= h;
        fd = (obj.value(wp, b, l2) - obj.value(wm, b, l2)) / (2 * h);
      } else {
        fd = (obj.value(w, b + h, l2) - obj.value(w, b - h, l2)) / (2 * h);
      }
      const double a = j < d ? g[j] : gb;
      diff += (a - fd) * (a - fd);
      na += a * a;
    }
    worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(na), 1e-12));
  }
  o.note(fmt::format("gradient max relative error {:.1e} over 100 instances (< 1e-4)", worst));
  o.require(worst < 1e-4, "gradient check");

  std::vector<int> y;
  const auto x = moderator_matrix(3, features::FeatureKind::Bow, std::nullopt, y);
  models::LogRegParams p;
  p.penalty = models::Penalty::L1;
  p.C = 0.5;
  const auto m = models::train_logreg(x, y, p);
  std::size_t zeros = 0;
  for (double w : m.weights) zeros += w == 0.0;
  o.note(fmt::format("L1 C=0.5: {} of {} weights exactly zero", zeros, m.weights.size()));
  o.require(zeros >= 1, "L1 sparsity");

  bool monotone = true;
  std::size_t epochs = 0;
  std::vector<int> ys;
  const auto xs = moderator_matrix(9, features::FeatureKind::Bong, 100, ys);
  for (double C : {0.5, 20.0, 482.2}) {
    models::SvmTrace trace;
    models::train_linear_svm_raw(xs, ys, {C, 1e-4, 200, 1}, &trace);
    epochs += trace.objective.size();
    for (std::size_t e = 1; e < trace.objective.size(); ++e)
      monotone = monotone && trace.objective[e] <= trace.objective[e - 1];
  }
  o.note(fmt::format("SVM averaged objective over {} epochs non-increasing: {}", epochs, monotone ? "yes" : "no"));
  o.require(monotone, "SVM objective");
  return o;
}

Outcome svd() {
  Outcome o;
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed, 0x5bd);
    features::SparseMatrix m;
    m.cols = 40;
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(50, 40);
    for (int r = 0; r < 50; ++r) {
      features::SparseVector v;
      v.dim = 40;
      for (std::uint32_t c = 0; c < 40; ++c)
        if (rng.uniform() < 0.15) {
          const double val = 1.0 + std::floor(rng.uniform() * 5);
          v.entries.emplace_back(c, val);
          d(r, c) = val;
        }
      m.rows.push_back(std::move(v));
    }
    const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(d).singularValues();
    for (std::size_t k : {1, 5, 10, 20}) {
      const auto p = features::fit_truncated_svd(m, k, seed);
      for (std::size_t i = 0; i < k; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        worst = std::max(worst, std::abs(p.singular_values(ii) - s(ii)) / s(ii));
      }
    }
  }
  o.note(fmt::format("top-k singular values max relative error {:.1e} on 20 random 50x40 matrices (< 1e-6)", worst));
  o.require(worst < 1e-6, "singular values");

  Eigen::VectorXd u(7), v(6);
  u << 1, 0, 2, 3, 0, 1, 4;
  v << 2, 1, 0, 1, 3, 5;
  const Eigen::MatrixXd a = u * v.transpose();
  features::SparseMatrix m;
  m.cols = 6;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    std::vector<double> row(6);
    for (Eigen::Index c = 0; c < 6; ++c) row[static_cast<std::size_t>(c)] = a(r, c);
    m.rows.push_back(features::SparseVector::from_dense(row));
  }
  const auto p = features::fit_truncated_svd(m, 1, 3);
  const double err = (a * p.components.transpose() * p.components - a).norm();
  o.note(fmt::format("rank-1 reconstruction error {:.1e} (< 1e-8)", err));
  o.require(err < 1e-8, "rank-1 reconstruction");
  return o;
}

// Plain transcription of the block loop used as the reference.
std::vector<corpus::SpeechBlock> reference_blocks(const corpus::AgendaItem& item, const std::vector<bool>& hit) {
  std::vector<std::vector<std::size_t>> blocks;
  std::vector<std::size_t> current;
  for (std::size_t i = 0; i < item.speeches.size(); ++i) {
    if (item.speeches[i].is_moderator && hit[i]) {
      if (!current.empty()) blocks.push_back(current);
      current = {i};
    } else {
      current.push_back(i);
    }
  }
  if (!current.empty()) blocks.push_back(current);
  std::vector<corpus::SpeechBlock> out;
  for (const auto& b : blocks) out.push_back({b.front(), b.back()});
  return out;
}

Outcome partitioner() {
  Outcome o;
  Rng rng(555);
  std::size_t mismatches = 0, invalid = 0;
  for (int t = 0; t < 1000; ++t) {
    corpus::AgendaItem item;
    item.minute_id = "m";
    item.label = "political statements";
    const std::size_t m = rng.below(40);
    std::vector<bool> hit(m);
    for (std::size_t i = 0; i < m; ++i) {
      corpus::Speech s;
      s.minute_id = "m";
      s.order = static_cast<std::int64_t>(i + 1);
      s.is_moderator = rng.uniform() < 0.4;
      s.debater = s.is_moderator ? "chair" : "dep";
      hit[i] = rng.uniform() < 0.3;
      item.speeches.push_back(s);
    }
    const partition::Classifier c{[&hit](const corpus::Speech& s) { return hit[static_cast<std::size_t>(s.order - 1)] ? 0.9 : 0.1; },
                                  0.5, "random"};
    const auto r = partition::partition_agenda(item, c);
    mismatches += r.blocks != reference_blocks(item, hit);
    if (m > 0) invalid += corpus::validate_partition(r.blocks, m).has_value();
  }
  o.note(fmt::format("1000 random items: {} mismatches, {} invariant violations", mismatches, invalid));
  o.require(mismatches == 0, "reference agreement");
  o.require(invalid == 0, "disjoint/cover/no-empty invariants");

  const auto cfg = corpus::annotated_set_config(21, 0.1);
  auto s = corpus::generate_synthetic(cfg);
  const auto out = partition::partition_corpus(s.corpus, partition::from_labels(s.truth.labels), cfg.agenda_label);
  std::size_t exact = 0;
  for (const auto& r : out.results) exact += r.blocks == s.truth.blocks.at(r.key);
  o.note(fmt::format("oracle labels: {}/{} items recovered exactly", exact, s.truth.blocks.size()));
  o.require(out.errors.empty() && exact == s.truth.blocks.size(), "oracle recovery");

  const auto train_cfg = corpus::annotated_set_config(100, 0.1);
  const auto train = corpus::generate_synthetic(train_cfg);
  const auto data = eval::make_dataset(train.corpus, train_cfg.agenda_label, train.truth.labels);
  const auto tp = models::TrainedPipeline::fit_texts(lr_spec(features::FeatureKind::Bong),
                                                     textprep::Preprocessor::portuguese(), data.texts, data.y);
  const auto test_cfg = corpus::annotated_set_config(101, 0.1);
  auto test = corpus::generate_synthetic(test_cfg);
  partition::partition_corpus(test.corpus, partition::from_pipeline(tp), test_cfg.agenda_label);
  const auto counts = partition::boundary_counts(test.corpus, test.corpus.blocks(), test.truth.blocks);
  const double f1 = eval::f1_score(counts);
  o.note(fmt::format("trained BoNG+LR boundary F1 {:.4f} (>= 0.95; tp {}, fp {}, fn {})", f1, counts.tp, counts.fp,
                     counts.fn));
  o.require(f1 >= 0.95, "boundary F1");
  return o;
}

Outcome imbalance() {
  Outcome o;
  const auto data = synthetic_dataset(5);
  const auto folds = eval::stratified_multilabel_kfold(data.debaters, data.y, 5, 5);
  const auto pre = textprep::Preprocessor::portuguese();
  auto recall = [&](models::ClassWeight w) {
    models::PipelineSpec s;
    s.features.kind = features::FeatureKind::Bow;
    s.classifier.C = 0.1;
    s.classifier.class_weight = w;
    const auto cv = eval::run_cv(s, pre, data, folds);
    return eval::recall(eval::confusion(data.y, [&] {
      std::vector<int> pred;
      for (double p : cv.oof_proba) pred.push_back(p >= 0.5);
      return pred;
    }()));
  };
  const double none = recall(models::ClassWeight::None), bal = recall(models::ClassWeight::Balanced);
  o.note(fmt::format("{:.1f}% positives; out-of-fold class-1 recall: unweighted {:.4f}, balanced {:.4f}",
                     100.0 * static_cast<double>(data.positives()) / static_cast<double>(data.size()), none, bal));
  o.require(bal > none, "balanced recall > unweighted recall");
  return o;
}

Outcome statistics() {
  Outcome o;
  const std::vector<double> a{1.5, 2.5, 3.5, 4.5, 5.5}, b{1, 1, 1, 1, 1};
  // enumeration oracle: all 2^5 sign patterns over ranks 1..5
  const auto w = eval::wilcoxon_signed_rank(a, b);
  std::size_t le = 0, ge = 0;
  for (int mask = 0; mask < 32; ++mask) {
    int wp = 0;
    for (int r = 0; r < 5; ++r)
      if (mask & (1 << r)) wp += r + 1;
    le += wp <= 15;
    ge += wp >= 15;
  }
  const double oracle = std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / 32.0);
  o.note(fmt::format("Wilcoxon n=5 all positive: p {} (oracle {}, expected 0.0625)", w.p_value, oracle));
  o.require(std::abs(w.p_value - 0.0625) < 1e-12 && std::abs(oracle - 0.0625) < 1e-12, "Wilcoxon exact p");
  const auto h = eval::holm_adjust(std::vector<double>{0.01, 0.04});
  o.note(fmt::format("Holm [0.01, 0.04] -> [{}, {}]", h[0], h[1]));
  o.require(std::abs(h[0] - 0.02) < 1e-12 && std::abs(h[1] - 0.04) < 1e-12, "Holm adjustment");
  return o;
}

Outcome annotation_loop() {
  Outcome o;
  const auto cfg = corpus::annotated_set_config(42, 0.1);
  const auto s = corpus::generate_synthetic(cfg);
  annotate::AnnotationState st(s.corpus, cfg.agenda_label);
  for (const auto& k : annotate::sample_seed_set(st, 70, 42))
    st.apply_label(k, s.truth.labels.at(k), annotate::LabelSource::Human);
  std::size_t rounds = 0, corrected = 0, reviewed = 0;
  bool ordered = true;
  while (rounds < 50) {
    const auto tp = annotate::bootstrap_train(st, s.corpus);
    annotate::machine_label(st, s.corpus, tp);
    const auto queue = annotate::suggest(st, s.corpus, tp, 0);
    if (queue.empty()) break;
    for (std::size_t i = 1; i < queue.size(); ++i) ordered = ordered && *queue[i - 1].uncertainty <= *queue[i].uncertainty;
    for (std::size_t i = 0; i < queue.size() && i < 150; ++i) {
      const int truth = s.truth.labels.at(queue[i].key);
      corrected += queue[i].current->label != truth;
      st.apply_label(queue[i].key, truth, annotate::LabelSource::Reviewed);
      ++reviewed;
    }
    ++rounds;
  }
  const bool exact = st.all_labels() == s.truth.labels;
  o.note(fmt::format("{} rounds, {} reviews, {} model labels corrected, final labels equal ground truth: {}", rounds,
                     reviewed, corrected, exact ? "yes" : "no"));
  o.require(exact, "convergence to ground truth");
  o.require(ordered, "queue ordered by ascending |p - 0.5|");
  return o;
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  criterion("end-to-end BoNG+LR 5-fold run", end_to_end);
  criterion("pipeline ordering and clique (10 folds)", pipeline_ordering);
  criterion("metric oracles", metric_oracles);
  criterion("stratification (K=5)", stratification);
  criterion("optimization checks", optimization);
  criterion("truncated SVD", svd);
  criterion("partitioner", partitioner);
  criterion("imbalance handling", imbalance);
  criterion("statistics", statistics);
  criterion("annotation loop", annotation_loop);
  std::cout << fmt::format("{} criteria failed, total {:.1f} s", failures,
                           std::chrono::duration<double>(Clock::now() - t0).count())
            << std::endl;
  return failures == 0 ? 0 : 1;
}
