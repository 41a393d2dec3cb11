#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "debacer/eval.hpp"
#include "debacer/pipeline.hpp"
#include "debacer/rng.hpp"

namespace debacer::search {

struct Domain {
  enum class Kind { Categorical, Integer, LogUniform };
  Kind kind = Kind::Categorical;
  std::vector<std::string> values;  // categorical
  double low = 0.0;                 // integer / log-uniform bounds, inclusive
  double high = 0.0;

  static Domain categorical(std::vector<std::string> values);
  static Domain integer(long low, long high);
  static Domain log_uniform(double low, double high);

  nlohmann::json to_json() const;
  static Domain from_json(const nlohmann::json& j);
  bool operator==(const Domain&) const = default;
};

// Tunable parameter names: C, penalty, class_weight (linear and forest),
// n_estimators, criterion, max_features, svd_k, n_max, min_df.
// Everything else comes from the base spec.
struct ParamSpace {
  models::PipelineSpec base;
  std::map<std::string, Domain> params;

  // Throws ConfigError("InvalidSearchSpace").
  void validate() const;
  // Draws one point; deterministic for a given generator state.
  nlohmann::json sample(Rng& rng) const;
  nlohmann::json to_json() const;
  static ParamSpace from_json(const nlohmann::json& j);
  static ParamSpace load(const std::filesystem::path& path);
  bool operator==(const ParamSpace&) const = default;
};

// Ranges bracketing the usual winners for one feature/classifier pairing.
ParamSpace default_space(features::FeatureKind features, models::ClassifierKind classifier);

// Applies sampled values to a copy of the base spec.
// Throws ConfigError("InvalidSearchSpace") for unknown names or bad values.
models::PipelineSpec apply_params(const models::PipelineSpec& base, const nlohmann::json& params);

struct Trial {
  std::size_t index = 0;
  nlohmann::json params;
  models::PipelineSpec spec;
  std::optional<eval::CvResult> cv;
  std::string error;  // set when the trial failed

  bool ok() const { return cv.has_value(); }
  double f1() const;
  double cross_entropy() const;
  double brier_positive() const;
};

// Rank order: mean F1 descending, then mean cross-entropy ascending, then
// mean positive Brier ascending, then trial index. Failed trials sort last.
bool ranks_before(const Trial& a, const Trial& b);
void sort_trials(std::vector<Trial>& trials);

struct SearchResult {
  ParamSpace space;
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  eval::FoldAssignment folds;
  std::string data_fingerprint;
  std::vector<Trial> trials;  // ranked
  double total_time = 0.0;

  nlohmann::json to_json() const;
};

// Evaluates `budget` independent draws from the space by cross-validation.
// Trial failures are recorded, not thrown. Throws ConfigError("InvalidConfig")
// when budget is zero.
SearchResult random_search(const ParamSpace& space, std::size_t budget,
                           const textprep::Preprocessor& preprocessor, const eval::Dataset& data,
                           const eval::FoldAssignment& folds, std::uint64_t seed,
                           std::size_t threads = 0);

// Refits the top-ranked successful trial on all examples.
// Throws TrainingError("NoSuccessfulTrials").
models::TrainedPipeline best_pipeline(const std::vector<Trial>& trials,
                                      const textprep::Preprocessor& preprocessor,
                                      const eval::Dataset& data);

}  // namespace debacer::search
