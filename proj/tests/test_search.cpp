#include <doctest.h>

#include <cmath>

#include "debacer/search.hpp"
#include "debacer/synth.hpp"
#include "helpers.hpp"

using namespace debacer::search;
using debacer::Rng;
using testutil::error_code_of;
namespace eval = debacer::eval;
namespace models = debacer::models;
namespace features = debacer::features;

namespace {

eval::Dataset synthetic_dataset(std::uint64_t seed) {
  const auto cfg = debacer::corpus::annotated_set_config(seed, 0.1);
  const auto synth = debacer::corpus::generate_synthetic(cfg);
  return eval::make_dataset(synth.corpus, cfg.agenda_label, synth.truth.labels);
}

Trial fake_trial(std::size_t index, double f1, double ce, double bs) {
  Trial t;
  t.index = index;
  eval::CvResult r;
  r.aggregates["f1"] = {f1, 0.0};
  r.aggregates["cross_entropy"] = {ce, 0.0};
  r.aggregates["brier_positive"] = {bs, 0.0};
  t.cv = r;
  return t;
}

ParamSpace small_bow_space() {
  ParamSpace s;
  s.base.features.kind = features::FeatureKind::Bow;
  s.params["C"] = Domain::log_uniform(0.1, 100);
  s.params["class_weight"] = Domain::categorical({"none", "balanced"});
  return s;
}

}  // namespace

TEST_CASE("parameter space JSON and validation") {
  const auto s = default_space(features::FeatureKind::Bong, models::ClassifierKind::LogReg);
  CHECK(s.params.count("svd_k") == 1);
  CHECK(s.params.at("C") == Domain::log_uniform(1e-2, 1e5));
  CHECK(ParamSpace::from_json(nlohmann::json::parse(s.to_json().dump())) == s);
  const auto rf = default_space(features::FeatureKind::Bow, models::ClassifierKind::RandomForest);
  CHECK(rf.params.at("n_estimators") == Domain::integer(50, 800));
  CHECK(rf.params.at("class_weight").values.size() == 3);

  auto bad = [&](auto mutate) {
    auto t = s;
    mutate(t);
    return error_code_of([&] { t.validate(); });
  };
  CHECK(bad([](ParamSpace&) {}).empty());
  CHECK(bad([](ParamSpace& t) { t.params["gamma"] = Domain::log_uniform(1, 2); }) == "InvalidSearchSpace");
  CHECK(bad([](ParamSpace& t) { t.params["penalty"] = Domain::categorical({}); }) == "InvalidSearchSpace");
  CHECK(bad([](ParamSpace& t) { t.params["penalty"] = Domain::categorical({"l3"}); }) == "InvalidSearchSpace");
  CHECK(bad([](ParamSpace& t) { t.params["C"] = Domain::log_uniform(10, 1); }) == "InvalidSearchSpace");
  CHECK(bad([](ParamSpace& t) { t.params["C"] = Domain::log_uniform(0, 1); }) == "InvalidSearchSpace");
  CHECK(bad([](ParamSpace& t) { t.params["svd_k"] = Domain::integer(0, 5); }) == "InvalidSearchSpace");
  CHECK(error_code_of([] { Domain::from_json({{"type", "beta"}}); }) == "InvalidSearchSpace");
}

TEST_CASE("sampling is seeded and stays in bounds") {
  const auto s = default_space(features::FeatureKind::Bong, models::ClassifierKind::LogReg);
  double log_sum = 0.0;
  for (std::uint64_t i = 0; i < 2000; ++i) {
    Rng a(5, i), b(5, i);
    const auto p = s.sample(a);
    CHECK(p == s.sample(b));
    const double c = p["C"].get<double>();
    CHECK(c >= 1e-2);
    CHECK(c <= 1e5);
    log_sum += std::log10(c);
    const auto k = p["svd_k"].get<long>();
    CHECK(k >= 50);
    CHECK(k <= 300);
    const auto spec = apply_params(s.base, p);
    CHECK(spec.classifier.C == c);
    CHECK(spec.features.svd_k == static_cast<std::size_t>(k));
  }
  // log-uniform: mean exponent near the midpoint of [-2, 5]
  CHECK(log_sum / 2000 == doctest::Approx(1.5).epsilon(0.1));
  CHECK(error_code_of([&] { apply_params(s.base, {{"nope", 1}}); }) == "InvalidSearchSpace");
}

TEST_CASE("rank key") {
  std::vector<Trial> ts{fake_trial(0, 0.95, 0.01, 0.01), fake_trial(1, 0.97, 0.05, 0.05)};
  sort_trials(ts);
  CHECK(ts[0].index == 1);

  ts = {fake_trial(0, 0.97, 0.025, 0.01), fake_trial(1, 0.97, 0.018, 0.09)};
  sort_trials(ts);
  CHECK(ts[0].index == 1);

  ts = {fake_trial(0, 0.97, 0.02, 0.05), fake_trial(1, 0.97, 0.02, 0.04)};
  sort_trials(ts);
  CHECK(ts[0].index == 1);

  Trial failed;
  failed.index = 0;
  failed.error = "boom";
  ts = {fake_trial(3, 0.9, 0.1, 0.1), failed, fake_trial(2, 0.9, 0.1, 0.1)};
  sort_trials(ts);
  CHECK(ts[0].index == 2);
  CHECK(ts[1].index == 3);
  CHECK_FALSE(ts[2].ok());
}

TEST_CASE("random search and refit") {
  static const auto data = synthetic_dataset(8);
  static const auto folds = eval::stratified_multilabel_kfold(data.debaters, data.y, 5, 8);
  static const auto pre = debacer::textprep::Preprocessor::portuguese();

  SUBCASE("budget 1") {
    const auto r = random_search(small_bow_space(), 1, pre, data, folds, 3);
    REQUIRE(r.trials.size() == 1);
    CHECK(r.trials[0].ok());
    CHECK(r.trials[0].cv->per_fold.size() == 5);
  }
  SUBCASE("deterministic and ranked") {
    const auto a = random_search(small_bow_space(), 4, pre, data, folds, 11);
    const auto b = random_search(small_bow_space(), 4, pre, data, folds, 11);
    REQUIRE(a.trials.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(a.trials[i].index == b.trials[i].index);
      CHECK(a.trials[i].params == b.trials[i].params);
      CHECK(a.trials[i].cv->metric("f1") == b.trials[i].cv->metric("f1"));
      if (i > 0) CHECK_FALSE(ranks_before(a.trials[i], a.trials[i - 1]));
    }
    const auto j = a.to_json();
    CHECK(j["trials"].size() == 4);
    CHECK(j["trials"][0]["rank"] == 1);

    const auto model = best_pipeline(a.trials, pre, data);
    CHECK(model.spec().fingerprint() == a.trials[0].spec.fingerprint());
    std::vector<int> pred;
    for (const auto& t : data.texts) pred.push_back(model.classify(t));
    const double train_f1 = eval::f1_score(eval::confusion(data.y, pred));
    MESSAGE("refit training F1 " << train_f1 << " vs CV " << a.trials[0].f1());
    CHECK(train_f1 >= a.trials[0].f1());
  }
  SUBCASE("failed trials are recorded") {
    eval::FoldAssignment bad = folds;
    // fold 0 holds every positive, so its training rows are single-class
    std::size_t moved = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data.y[i] == 1) bad.fold[i] = 0, ++moved;
    REQUIRE(moved > 0);
    const auto r = random_search(small_bow_space(), 2, pre, data, bad, 1);
    REQUIRE(r.trials.size() == 2);
    for (const auto& t : r.trials) {
      CHECK_FALSE(t.ok());
      CHECK(t.error.find("SingleClass") != std::string::npos);
    }
    CHECK(error_code_of([&] { best_pipeline(r.trials, pre, data); }) == "NoSuccessfulTrials");
  }
  CHECK(error_code_of([&] { best_pipeline({}, pre, data); }) == "NoSuccessfulTrials");
  CHECK(error_code_of([&] { random_search(small_bow_space(), 0, pre, data, folds, 1); }) ==
        "InvalidConfig");
}
