#include "debacer/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "debacer/errors.hpp"
#include "debacer/rng.hpp"

namespace debacer::search {

using nlohmann::json;

namespace {

const std::set<std::string>& known_params() {
  static const std::set<std::string> names{"C",       "penalty", "class_weight", "n_estimators",
                                           "criterion", "max_features", "svd_k", "n_max", "min_df"};
  return names;
}

[[noreturn]] void bad_space(const std::string& msg) { throw ConfigError("InvalidSearchSpace", msg); }

std::size_t positive_int(const json& v, const std::string& name) {
  if (!v.is_number_integer() || v.get<long long>() < 1)
    bad_space(fmt::format("'{}' must be a positive integer", name));
  return v.get<std::size_t>();
}

}  // namespace

Domain Domain::categorical(std::vector<std::string> values) {
  Domain d;
  d.kind = Kind::Categorical;
  d.values = std::move(values);
  return d;
}

Domain Domain::integer(long low, long high) {
  Domain d;
  d.kind = Kind::Integer;
  d.low = static_cast<double>(low);
  d.high = static_cast<double>(high);
  return d;
}

Domain Domain::log_uniform(double low, double high) {
  Domain d;
  d.kind = Kind::LogUniform;
  d.low = low;
  d.high = high;
  return d;
}

json Domain::to_json() const {
  if (kind == Kind::Categorical) return {{"type", "categorical"}, {"values", values}};
  if (kind == Kind::Integer)
    return {{"type", "int"}, {"low", static_cast<long>(low)}, {"high", static_cast<long>(high)}};
  return {{"type", "log_uniform"}, {"low", low}, {"high", high}};
}

Domain Domain::from_json(const json& j) {
  try {
    const auto type = j.at("type").get<std::string>();
    if (type == "categorical") return categorical(j.at("values").get<std::vector<std::string>>());
    if (type == "int") return integer(j.at("low").get<long>(), j.at("high").get<long>());
    if (type == "log_uniform") return log_uniform(j.at("low").get<double>(), j.at("high").get<double>());
    bad_space(fmt::format("unknown domain type '{}'", type));
  } catch (const json::exception& e) {
    bad_space(e.what());
  }
}

models::PipelineSpec apply_params(const models::PipelineSpec& base, const json& params) {
  auto spec = base;
  if (!params.is_object()) bad_space("parameters must be an object");
  for (const auto& [name, v] : params.items()) {
    if (!known_params().count(name)) bad_space(fmt::format("unknown parameter '{}'", name));
    if (name == "C") {
      if (!v.is_number() || !(v.get<double>() > 0)) bad_space("'C' must be a positive number");
      spec.classifier.C = v.get<double>();
    } else if (name == "penalty") {
      spec.classifier.penalty = models::parse_penalty(v.get<std::string>());
    } else if (name == "class_weight") {
      spec.classifier.class_weight = models::parse_class_weight(v.get<std::string>());
    } else if (name == "criterion") {
      spec.classifier.criterion = models::parse_criterion(v.get<std::string>());
    } else if (name == "n_estimators") {
      spec.classifier.n_estimators = positive_int(v, name);
    } else if (name == "max_features") {
      spec.classifier.max_features = positive_int(v, name);
    } else if (name == "svd_k") {
      spec.features.svd_k = positive_int(v, name);
    } else if (name == "n_max") {
      spec.features.n_max = positive_int(v, name);
    } else if (name == "min_df") {
      spec.features.min_df = positive_int(v, name);
    }
  }
  return spec;
}

void ParamSpace::validate() const {
  for (const auto& [name, d] : params) {
    if (!known_params().count(name)) bad_space(fmt::format("unknown parameter '{}'", name));
    switch (d.kind) {
      case Domain::Kind::Categorical:
        if (d.values.empty()) bad_space(fmt::format("'{}' has no values", name));
        for (const auto& v : d.values) {
          try {
            apply_params(base, json{{name, v}});
          } catch (const ConfigError& e) {
            bad_space(fmt::format("'{}': {}", name, e.what()));
          } catch (const json::exception&) {
            bad_space(fmt::format("'{}' is not categorical", name));
          }
        }
        break;
      case Domain::Kind::Integer:
        if (d.low < 1 || d.low > d.high) bad_space(fmt::format("'{}' needs 1 <= low <= high", name));
        apply_params(base, json{{name, static_cast<long>(d.low)}});
        break;
      case Domain::Kind::LogUniform:
        if (!(d.low > 0) || d.low > d.high || !std::isfinite(d.high))
          bad_space(fmt::format("'{}' needs 0 < low <= high", name));
        if (name != "C") bad_space(fmt::format("'{}' is not a real-valued parameter", name));
        break;
    }
  }
}

json ParamSpace::sample(Rng& rng) const {
  json out = json::object();
  for (const auto& [name, d] : params) {
    switch (d.kind) {
      case Domain::Kind::Categorical:
        out[name] = d.values[static_cast<std::size_t>(rng.below(d.values.size()))];
        break;
      case Domain::Kind::Integer: {
        const auto span = static_cast<std::uint64_t>(d.high - d.low) + 1;
        out[name] = static_cast<long>(d.low) + static_cast<long>(rng.below(span));
        break;
      }
      case Domain::Kind::LogUniform: {
        const double lo = std::log(d.low), hi = std::log(d.high);
        out[name] = std::exp(lo + rng.uniform() * (hi - lo));
        break;
      }
    }
  }
  return out;
}

json ParamSpace::to_json() const {
  json p = json::object();
  for (const auto& [name, d] : params) p[name] = d.to_json();
  return {{"base", base.to_json()}, {"params", p}};
}

ParamSpace ParamSpace::from_json(const json& j) {
  ParamSpace s;
  try {
    s.base = models::PipelineSpec::from_json(j.at("base"));
    for (const auto& [name, d] : j.at("params").items()) s.params[name] = Domain::from_json(d);
  } catch (const json::exception& e) {
    bad_space(e.what());
  }
  s.validate();
  return s;
}

ParamSpace ParamSpace::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("FileNotFound", path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    bad_space(fmt::format("{}: {}", path.string(), e.what()));
  }
}

ParamSpace default_space(features::FeatureKind features, models::ClassifierKind classifier) {
  ParamSpace s;
  s.base.features.kind = features;
  s.base.classifier.kind = classifier;
  switch (classifier) {
    case models::ClassifierKind::LogReg:
      s.params["C"] = Domain::log_uniform(1e-2, 1e5);
      s.params["penalty"] = Domain::categorical({"l1", "l2"});
      s.params["class_weight"] = Domain::categorical({"none", "balanced"});
      break;
    case models::ClassifierKind::LinearSvm:
      s.params["C"] = Domain::log_uniform(1e-2, 1e5);
      break;
    case models::ClassifierKind::RandomForest:
      s.params["n_estimators"] = Domain::integer(50, 800);
      s.params["criterion"] = Domain::categorical({"gini", "entropy"});
      s.params["class_weight"] = Domain::categorical({"none", "balanced", "balanced_subsample"});
      break;
  }
  if (features == features::FeatureKind::Bong && classifier != models::ClassifierKind::RandomForest)
    s.params["svd_k"] = Domain::integer(50, 300);
  return s;
}

// ---------------------------------------------------------------------------

double Trial::f1() const { return cv ? cv->aggregates.at("f1").mean : 0.0; }
double Trial::cross_entropy() const {
  return cv ? cv->aggregates.at("cross_entropy").mean : std::numeric_limits<double>::infinity();
}
double Trial::brier_positive() const {
  return cv ? cv->aggregates.at("brier_positive").mean : std::numeric_limits<double>::infinity();
}

bool ranks_before(const Trial& a, const Trial& b) {
  if (a.ok() != b.ok()) return a.ok();
  if (a.ok()) {
    if (a.f1() != b.f1()) return a.f1() > b.f1();
    if (a.cross_entropy() != b.cross_entropy()) return a.cross_entropy() < b.cross_entropy();
    if (a.brier_positive() != b.brier_positive()) return a.brier_positive() < b.brier_positive();
  }
  return a.index < b.index;
}

void sort_trials(std::vector<Trial>& trials) { std::stable_sort(trials.begin(), trials.end(), ranks_before); }

json SearchResult::to_json() const {
  json ts = json::array();
  for (std::size_t rank = 0; rank < trials.size(); ++rank) {
    const auto& t = trials[rank];
    json j{{"rank", rank + 1},
           {"index", t.index},
           {"params", t.params},
           {"label", t.spec.label()},
           {"spec_fingerprint", t.spec.fingerprint()},
           {"ok", t.ok()}};
    if (t.ok()) {
      auto cv = t.cv->to_json();
      cv.erase("oof_proba");
      cv.erase("folds");
      j["rank_key"] = {{"f1", t.f1()}, {"cross_entropy", t.cross_entropy()},
                       {"brier_positive", t.brier_positive()}};
      j["cv"] = std::move(cv);
    } else {
      j["error"] = t.error;
    }
    ts.push_back(std::move(j));
  }
  return {{"format", "debacer-search"},
          {"version", 1},
          {"seed", seed},
          {"budget", budget},
          {"space", space.to_json()},
          {"data_fingerprint", data_fingerprint},
          {"folds", folds.to_json()},
          {"trials", std::move(ts)},
          {"total_time", total_time}};
}

SearchResult random_search(const ParamSpace& space, std::size_t budget,
                           const textprep::Preprocessor& preprocessor, const eval::Dataset& data,
                           const eval::FoldAssignment& folds, std::uint64_t seed,
                           std::size_t threads) {
  if (budget == 0) throw ConfigError("InvalidConfig", "search budget must be at least 1");
  space.validate();
  const auto t0 = std::chrono::steady_clock::now();
  SearchResult out;
  out.space = space;
  out.budget = budget;
  out.seed = seed;
  out.folds = folds;
  out.data_fingerprint = data.fingerprint();

  std::vector<textprep::Tokens> docs;
  docs.reserve(data.size());
  for (const auto& t : data.texts) docs.push_back(preprocessor(t));

  for (std::size_t i = 0; i < budget; ++i) {
    Rng rng(seed, 0x5ea0 + i);
    Trial t;
    t.index = i;
    t.params = space.sample(rng);
    t.spec = apply_params(space.base, t.params);
    try {
      t.cv = eval::run_cv_tokens(t.spec, preprocessor, docs, data, folds, threads);
    } catch (const Error& e) {
      t.error = e.what();
    }
    out.trials.push_back(std::move(t));
  }
  sort_trials(out.trials);
  out.total_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

models::TrainedPipeline best_pipeline(const std::vector<Trial>& trials,
                                      const textprep::Preprocessor& preprocessor,
                                      const eval::Dataset& data) {
  const Trial* best = nullptr;
  for (const auto& t : trials)
    if (t.ok() && (!best || ranks_before(t, *best))) best = &t;
  if (!best) throw TrainingError("NoSuccessfulTrials", "no trial completed cross-validation");
  std::vector<textprep::Tokens> docs;
  docs.reserve(data.size());
  for (const auto& t : data.texts) docs.push_back(preprocessor(t));
  return models::TrainedPipeline::fit(best->spec, preprocessor, docs, data.y, data.fingerprint());
}

}  // namespace debacer::search
