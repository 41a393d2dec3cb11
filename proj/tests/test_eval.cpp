#include <doctest.h>

#include <cmath>
#include <map>
#include <mutex>
#include <set>

#include "debacer/eval.hpp"
#include "debacer/rng.hpp"
#include "debacer/synth.hpp"
#include "helpers.hpp"

using namespace debacer::eval;
using debacer::Rng;
using testutil::error_code_of;
namespace models = debacer::models;
namespace features = debacer::features;

namespace {

Dataset synthetic_dataset(std::uint64_t seed, double noise = 0.1) {
  const auto cfg = debacer::corpus::annotated_set_config(seed, noise);
  const auto synth = debacer::corpus::generate_synthetic(cfg);
  return make_dataset(synth.corpus, cfg.agenda_label, synth.truth.labels);
}

// Straight-line oracles, written independently of the library code.
struct Oracle {
  double f1, ce, bs;
};

Oracle oracle(const std::vector<int>& y, const std::vector<double>& p) {
  double tp = 0, fp = 0, fn = 0, ce = 0, bs = 0, npos = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool hit = p[i] >= 0.5;
    tp += y[i] == 1 && hit;
    fp += y[i] == 0 && hit;
    fn += y[i] == 1 && !hit;
    const double q = std::min(std::max(p[i], 1e-15), 1 - 1e-15);
    ce += y[i] * std::log(q) + (1 - y[i]) * std::log(1 - q);
    if (y[i] == 1) {
      bs += (y[i] - p[i]) * (y[i] - p[i]);
      ++npos;
    }
  }
  const double f1 = 2 * tp + fp + fn == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
  return {f1, -ce / static_cast<double>(y.size()), bs / npos};
}

CvResult fake_result(const std::string& label, const std::vector<double>& f1,
                     const FoldAssignment& folds) {
  CvResult r;
  r.label = label;
  r.folds = folds;
  for (double v : f1) {
    MetricReport m;
    m.f1 = v;
    r.per_fold.push_back(m);
  }
  return r;
}

FoldAssignment trivial_folds(std::size_t k) {
  FoldAssignment f;
  f.k = k;
  for (std::size_t i = 0; i < k; ++i) f.fold.push_back(i);
  return f;
}

}  // namespace

TEST_CASE("precision, recall and F1") {
  CHECK(f1_score({5, 0, 0, 10}) == 1.0);
  const ConfusionCounts c{2, 1, 1, 0};
  CHECK(precision(c) == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(recall(c) == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(f1_score(c) == doctest::Approx(2.0 / 3).epsilon(1e-15));

  std::vector<int> y(590, 0), pred(590, 0);
  for (std::size_t i = 0; i < 41; ++i) y[i] = 1;
  const auto all_negative = confusion(y, pred);
  CHECK(all_negative == ConfusionCounts{0, 0, 41, 549});
  CHECK(f1_score(all_negative) == 0.0);
  CHECK(precision(all_negative) == 0.0);
  CHECK(f1_score({}) == 0.0);
  CHECK(error_code_of([] { confusion(std::vector<int>{1}, std::vector<int>{}); }) == "LengthMismatch");
}

TEST_CASE("cross entropy") {
  CHECK(cross_entropy(std::vector<int>{1}, std::vector<double>{1 - 1e-15}) < 1e-14);
  CHECK(std::abs(cross_entropy(std::vector<int>{1, 0}, std::vector<double>{0.5, 0.5}) - std::log(2.0)) <
        1e-12);
  CHECK(cross_entropy(std::vector<int>{1, 0, 0}, std::vector<double>{0.9, 0.2, 0.1}) ==
        doctest::Approx(0.14462).epsilon(1e-5));
  // clamping keeps confident mistakes finite
  CHECK(cross_entropy(std::vector<int>{1}, std::vector<double>{0.0}) ==
        doctest::Approx(-std::log(1e-15)));
  CHECK(error_code_of([] { cross_entropy(std::vector<int>{1, 0}, std::vector<double>{0.5}); }) ==
        "LengthMismatch");
}

TEST_CASE("positive-class Brier score") {
  CHECK(brier_positive(std::vector<int>{1, 1, 0}, std::vector<double>{1.0, 1.0, 0.7}) == 0.0);
  CHECK(brier_positive(std::vector<int>{1, 0, 1}, std::vector<double>{0.8, 0.3, 0.6}) ==
        doctest::Approx(0.10).epsilon(1e-12));
  CHECK(brier_positive(std::vector<int>{1, 1}, std::vector<double>{0.5, 0.5}) == 0.25);
  CHECK(error_code_of([] { brier_positive(std::vector<int>{0, 0}, std::vector<double>{0.1, 0.2}); }) ==
        "NoPositives");
}

TEST_CASE("metrics match direct-formula oracles on random draws") {
  Rng rng(2024);
  double worst = 0.0;
  for (int draw = 0; draw < 10000; ++draw) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<int> y(n);
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.uniform() < 0.3 ? 1 : 0;
      // include exact 0/1 and threshold values now and then
      const auto kind = rng.below(20);
      p[i] = kind == 0 ? 0.0 : kind == 1 ? 1.0 : kind == 2 ? 0.5 : rng.uniform();
    }
    y[rng.below(n)] = 1;
    const auto o = oracle(y, p);
    const auto r = evaluate(y, p, 0.5);
    worst = std::max({worst, std::abs(r.f1 - o.f1), std::abs(r.cross_entropy - o.ce),
                      std::abs(r.brier_positive - o.bs)});
  }
  MESSAGE("max deviation " << worst);
  CHECK(worst < 1e-9);
}

TEST_CASE("iterative stratification on a tiny single-label set") {
  const std::vector<std::string> who(4, "a");
  const std::vector<int> y{0, 1, 0, 1};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto f = stratified_multilabel_kfold(who, y, 2, seed);
    for (std::size_t k = 0; k < 2; ++k) {
      const auto t = f.test_indices(k);
      REQUIRE(t.size() == 2);
      CHECK(y[t[0]] + y[t[1]] == 1);
    }
  }
  CHECK(error_code_of([&] { stratified_multilabel_kfold(who, y, 5, 0); }) == "TooFewExamples");
  CHECK(error_code_of([&] { stratified_multilabel_kfold(who, y, 1, 0); }) == "InvalidConfig");
}

TEST_CASE("stratification on Table-1-shaped labels") {
  for (std::uint64_t seed : {1, 2, 3, 7, 42}) {
    const auto data = synthetic_dataset(seed);
    const auto f = stratified_multilabel_kfold(data.debaters, data.y, 5, seed);
    CHECK(f.fold.size() == data.size());
    std::map<std::string, std::size_t> total;
    for (const auto& d : data.debaters) ++total[d];
    CHECK(total.size() == 5);
    std::set<std::size_t> seen;
    for (std::size_t k = 0; k < 5; ++k) {
      const auto test = f.test_indices(k);
      std::size_t pos = 0;
      std::map<std::string, std::size_t> per;
      for (auto i : test) {
        CHECK(seen.insert(i).second);
        pos += static_cast<std::size_t>(data.y[i]);
        ++per[data.debaters[i]];
      }
      const double ideal_pos = static_cast<double>(data.positives()) / 5.0;
      CHECK(std::abs(static_cast<double>(pos) - ideal_pos) < 1.0);
      for (const auto& [d, n] : total)
        CHECK(std::abs(static_cast<double>(per[d]) - static_cast<double>(n) / 5.0) <= 1.0);
    }
    CHECK(seen.size() == data.size());
    CHECK(f == stratified_multilabel_kfold(data.debaters, data.y, 5, seed));
  }
}

TEST_CASE("stratification with exactly 41 positives gives 8 or 9 per fold") {
  auto data = synthetic_dataset(11);
  // trim or pad the positive count to the reference 41
  std::size_t pos = data.positives();
  for (std::size_t i = 0; i < data.size() && pos != 41; ++i) {
    if (pos > 41 && data.y[i] == 1) data.y[i] = 0, --pos;
    if (pos < 41 && data.y[i] == 0) data.y[i] = 1, ++pos;
  }
  REQUIRE(data.positives() == 41);
  const auto f = stratified_multilabel_kfold(data.debaters, data.y, 5, 11);
  for (std::size_t k = 0; k < 5; ++k) {
    std::size_t p = 0;
    for (auto i : f.test_indices(k)) p += static_cast<std::size_t>(data.y[i]);
    CHECK((p == 8 || p == 9));
  }
}

TEST_CASE("aggregate uses the N-1 denominator") {
  const auto a = aggregate(std::vector<double>{1, 2, 3, 4});
  CHECK(a.mean == 2.5);
  CHECK(a.std == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-14));
  CHECK(aggregate(std::vector<double>{7}).std == 0.0);
}

TEST_CASE("cross-validation with a constant predictor") {
  Dataset d;
  for (int i = 0; i < 10; ++i) {
    d.texts.push_back("mesma frase sempre");
    d.debaters.push_back("m");
    d.y.push_back(i % 2);
  }
  const auto folds = stratified_multilabel_kfold(d.debaters, d.y, 5, 3);
  models::PipelineSpec spec;
  spec.features.kind = features::FeatureKind::Bow;
  const auto r = run_cv(spec, debacer::textprep::Preprocessor::portuguese(), d, folds);
  REQUIRE(r.per_fold.size() == 5);
  for (const auto& m : r.per_fold) {
    CHECK(m.f1 == r.per_fold[0].f1);
    CHECK(m.cross_entropy == doctest::Approx(r.per_fold[0].cross_entropy).epsilon(1e-9));
    CHECK(m.brier_positive == doctest::Approx(r.per_fold[0].brier_positive).epsilon(1e-9));
  }
  CHECK(r.aggregates.at("f1").std == 0.0);
  CHECK(r.aggregates.at("cross_entropy").std < 1e-9);
}

TEST_CASE("cross-validation never sees held-out tokens") {
  auto data = synthetic_dataset(4);
  const auto folds = stratified_multilabel_kfold(data.debaters, data.y, 5, 4);
  // a distinct planted token per fold, present only in that fold's rows
  for (std::size_t i = 0; i < data.size(); ++i)
    data.texts[i] += " marcadorfold" + std::string(1, static_cast<char>('a' + folds.fold[i]));
  models::PipelineSpec spec;
  spec.features.kind = features::FeatureKind::Bong;
  spec.features.svd_k = 20;
  std::mutex mu;
  std::map<std::size_t, std::set<std::string>> vocab;
  const auto r = run_cv(spec, debacer::textprep::Preprocessor::portuguese(), data, folds, 0,
                        [&](std::size_t f, const models::TrainedPipeline& tp) {
                          std::lock_guard lock(mu);
                          for (const auto& t : tp.extractor().vocabulary()->terms()) vocab[f].insert(t);
                        });
  REQUIRE(vocab.size() == 5);
  for (std::size_t f = 0; f < 5; ++f) {
    const std::string own = "marcadorfold" + std::string(1, static_cast<char>('a' + f));
    CHECK(vocab[f].count(own) == 0);
    for (std::size_t g = 0; g < 5; ++g)
      if (g != f) CHECK(vocab[f].count("marcadorfold" + std::string(1, static_cast<char>('a' + g))) == 1);
  }
  CHECK(r.per_fold.size() == 5);
}

TEST_CASE("BoNG+LR cross-validation on the synthetic corpus") {
  const auto data = synthetic_dataset(42);
  const auto folds = stratified_multilabel_kfold(data.debaters, data.y, 5, 42);
  models::PipelineSpec spec;
  spec.features.kind = features::FeatureKind::Bong;
  spec.features.svd_k = 150;
  spec.classifier.C = 20;
  const auto r = run_cv(spec, debacer::textprep::Preprocessor::portuguese(), data, folds);
  MESSAGE("F1 " << r.aggregates.at("f1").mean << " +- " << r.aggregates.at("f1").std << "  CE "
                << r.aggregates.at("cross_entropy").mean << "  BS+ "
                << r.aggregates.at("brier_positive").mean << "  time " << r.total_time);
  CHECK(r.aggregates.at("f1").mean >= 0.97);
  CHECK(r.aggregates.at("cross_entropy").mean <= 0.05);
  CHECK(r.aggregates.at("brier_positive").mean <= 0.08);
  CHECK(r.oof_proba.size() == data.size());

  const auto back = CvResult::from_json(nlohmann::json::parse(r.to_json().dump()));
  CHECK(back.folds == r.folds);
  CHECK(back.spec == r.spec);
  CHECK(back.metric("f1") == r.metric("f1"));
  CHECK(back.aggregates.at("f1").mean == r.aggregates.at("f1").mean);
}

TEST_CASE("cross-validation errors name the fold") {
  Dataset d;
  for (int i = 0; i < 6; ++i) {
    d.texts.push_back(i == 0 ? "sim" : "nao");
    d.debaters.push_back("m");
    d.y.push_back(i == 0 ? 1 : 0);
  }
  FoldAssignment f;
  f.k = 2;
  f.fold = {0, 1, 1, 1, 0, 0};
  try {
    run_cv({}, debacer::textprep::Preprocessor::portuguese(), d, f);
    FAIL("expected an error");
  } catch (const debacer::DataError& e) {
    CHECK(e.code() == "SingleClass");
    CHECK(std::string(e.what()).find("fold 0") != std::string::npos);
  }
}

TEST_CASE("Wilcoxon signed-rank") {
  const std::vector<double> a{0.9, 0.8, 0.7, 0.6, 0.5};
  CHECK(wilcoxon_signed_rank(a, a).p_value == 1.0);
  CHECK(wilcoxon_signed_rank(a, a).n == 0);

  const std::vector<double> zero(5, 0.0);
  const auto all_pos = wilcoxon_signed_rank(a, zero);
  CHECK(all_pos.exact);
  CHECK(all_pos.w_plus == 15.0);
  CHECK(all_pos.p_value == doctest::Approx(0.0625).epsilon(1e-15));

  // +d/-d pairs sit at the null median
  const std::vector<double> sym{1, -1, 2, -2, 3, -3};
  const auto s = wilcoxon_signed_rank(sym, std::vector<double>(6, 0.0));
  CHECK(s.w_plus == s.w_minus);
  CHECK(s.p_value == 1.0);

  CHECK(error_code_of([&] { wilcoxon_signed_rank(a, std::vector<double>{1}); }) == "LengthMismatch");
}

TEST_CASE("Wilcoxon exact p matches an independent enumeration") {
  // Enumerate the 2^n sign patterns of ranks 1..n directly (no ties).
  auto enumerate = [](const std::vector<double>& d) {
    const std::size_t n = d.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return std::abs(d[x]) < std::abs(d[y]); });
    std::vector<int> rank(n);
    for (std::size_t r = 0; r < n; ++r) rank[idx[r]] = static_cast<int>(r + 1);
    int w = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (d[i] > 0) w += rank[i];
    const int total = static_cast<int>(n * (n + 1) / 2);
    const int extreme = std::min(w, total - w);
    double hits = 0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      int s = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (mask >> i & 1) s += static_cast<int>(i + 1);
      hits += s <= extreme;
    }
    return std::min(1.0, 2.0 * hits / static_cast<double>(1u << n));
  };
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 5 + rng.below(8);
    std::vector<double> a(n), b(n, 0.0), d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i] = (rng.uniform() - 0.4) * (1.0 + static_cast<double>(i));
    CHECK(wilcoxon_signed_rank(a, b).p_value == doctest::Approx(enumerate(d)).epsilon(1e-12));
  }
  // Tied magnitudes: the null is enumerated over the tied ranks themselves
  // (1, 2.5, 2.5, 4..8); W+ = 25 and 47 of the 256 patterns reach W+ <= 11.
  const std::vector<double> tied{1, 2, 2, -4, 5, 6, -7, 8};
  CHECK(wilcoxon_signed_rank(tied, std::vector<double>(8, 0.0)).p_value ==
        doctest::Approx(94.0 / 256).epsilon(1e-12));
}

TEST_CASE("Wilcoxon normal approximation above 12 pairs") {
  // reference values from scipy.stats.wilcoxon(method="approx", correction=True)
  const std::vector<double> d16{1, 2, -3, 4, 5, -6, 7, 8, 9, 10, 11, 12, 13, -14, 15, 16};
  const auto r = wilcoxon_signed_rank(d16, std::vector<double>(16, 0.0));
  CHECK_FALSE(r.exact);
  CHECK(r.w_minus == 23.0);
  CHECK(r.p_value == doctest::Approx(0.02138935776678794).epsilon(1e-10));
  const std::vector<double> tied{1, 1, 2, 2, -2, 3, 3, 3, 4, -4, 5, 6, 6, 7};
  CHECK(wilcoxon_signed_rank(tied, std::vector<double>(14, 0.0)).p_value ==
        doctest::Approx(0.015373042890611123).epsilon(1e-10));
}

TEST_CASE("Holm adjustment") {
  CHECK(holm_adjust(std::vector<double>{0.03}) == std::vector<double>{0.03});
  const auto two = holm_adjust(std::vector<double>{0.01, 0.04});
  CHECK(two[0] == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(two[1] == doctest::Approx(0.04).epsilon(1e-15));
  CHECK(holm_adjust(std::vector<double>{1, 1, 1}) == std::vector<double>{1, 1, 1});
  // input order is preserved
  const auto rev = holm_adjust(std::vector<double>{0.04, 0.01});
  CHECK(rev[0] == doctest::Approx(0.04).epsilon(1e-15));
  CHECK(rev[1] == doctest::Approx(0.02).epsilon(1e-15));

  Rng rng(1);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> p(1 + rng.below(10));
    for (auto& v : p) v = rng.uniform();
    const auto adj = holm_adjust(p);
    std::vector<std::size_t> idx(p.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return p[x] < p[y]; });
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(adj[i] >= p[i]);
      CHECK(adj[i] <= 1.0);
      if (i > 0) CHECK(adj[idx[i]] >= adj[idx[i - 1]]);
    }
  }
}

TEST_CASE("maximal cliques agree with subset enumeration") {
  Rng rng(77);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(8);
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) adj[i][j] = adj[j][i] = rng.uniform() < 0.5;
    auto is_clique = [&](unsigned m) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          if ((m >> i & 1) && (m >> j & 1) && !adj[i][j]) return false;
      return true;
    };
    std::vector<std::vector<std::size_t>> expected;
    for (unsigned m = 1; m < (1u << n); ++m) {
      if (!is_clique(m)) continue;
      bool maximal = true;
      for (std::size_t v = 0; v < n && maximal; ++v)
        if (!(m >> v & 1) && is_clique(m | (1u << v))) maximal = false;
      if (!maximal) continue;
      std::vector<std::size_t> c;
      for (std::size_t v = 0; v < n; ++v)
        if (m >> v & 1) c.push_back(v);
      expected.push_back(c);
    }
    std::sort(expected.begin(), expected.end());
    CHECK(maximal_cliques(adj) == expected);
  }
}

TEST_CASE("compare_pipelines") {
  const auto folds = trivial_folds(10);
  const std::vector<double> f1{0.9, 0.92, 0.88, 0.95, 0.91, 0.93, 0.9, 0.89, 0.94, 0.9};

  SUBCASE("identical results tie") {
    const auto c = compare_pipelines({fake_result("a", f1, folds), fake_result("b", f1, folds)});
    CHECK(c.average_rank[0] == c.average_rank[1]);
    CHECK(c.p_raw[0][1] == 1.0);
    CHECK(c.p_adjusted[0][1] == 1.0);
    CHECK(c.cliques == std::vector<std::vector<std::size_t>>{{0, 1}});
  }
  SUBCASE("a dominating pipeline separates from a constant baseline") {
    const std::vector<double> base(10, 0.5);
    const auto c = compare_pipelines({fake_result("base", base, folds), fake_result("good", f1, folds)});
    CHECK(c.average_rank[1] == 1.0);
    CHECK(c.average_rank[0] == 2.0);
    CHECK(c.p_raw[0][1] == doctest::Approx(2.0 / 1024).epsilon(1e-12));
    CHECK(c.p_adjusted[0][1] < 0.05);
    CHECK(c.cliques == std::vector<std::vector<std::size_t>>{{1}, {0}});
  }
  SUBCASE("interleaved wins form one clique") {
    std::vector<CvResult> rs;
    for (std::size_t p = 0; p < 5; ++p) {
      std::vector<double> v(10);
      for (std::size_t f = 0; f < 10; ++f) v[f] = 0.9 + 0.01 * static_cast<double>((p + f) % 5);
      rs.push_back(fake_result("p" + std::to_string(p), v, folds));
    }
    const auto c = compare_pipelines(rs);
    for (double r : c.average_rank) CHECK(r == doctest::Approx(3.0));
    CHECK(c.cliques == std::vector<std::vector<std::size_t>>{{0, 1, 2, 3, 4}});
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) CHECK(c.p_adjusted[i][j] >= c.p_raw[i][j]);
    const auto j = c.to_json();
    CHECK(j["cliques"].size() == 1);
    CHECK(j["p_adjusted"].size() == 5);
  }
  SUBCASE("fold assignments must agree") {
    auto other = folds;
    other.seed = 5;
    CHECK(error_code_of([&] {
            compare_pipelines({fake_result("a", f1, folds), fake_result("b", f1, other)});
          }) == "MismatchedFolds");
    CHECK(error_code_of([&] { compare_pipelines({fake_result("a", f1, folds)}); }) == "InvalidConfig");
  }
}
