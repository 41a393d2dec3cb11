#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "debacer/calibration.hpp"
#include "debacer/extractor.hpp"
#include "debacer/forest.hpp"
#include "debacer/linear.hpp"
#include "debacer/textprep.hpp"

namespace debacer::models {

using features::ExtractorConfig;
using features::FeatureExtractor;
using textprep::Preprocessor;
using textprep::Tokens;

enum class ClassifierKind { LogReg, LinearSvm, RandomForest };

std::string to_string(ClassifierKind k);
ClassifierKind parse_classifier_kind(const std::string& s);

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::LogReg;
  // Linear models
  Penalty penalty = Penalty::L2;
  double C = 1.0;
  ClassWeight class_weight = ClassWeight::None;
  double tol = 1e-6;
  std::size_t max_iter = 20000;
  // SVM
  double svm_tol = 1e-4;
  std::size_t max_epochs = 200;
  // Forest
  std::size_t n_estimators = 100;
  Criterion criterion = Criterion::Gini;
  std::optional<std::size_t> max_features;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static ClassifierConfig from_json(const nlohmann::json& j);
  bool operator==(const ClassifierConfig&) const = default;
};

struct PipelineSpec {
  ExtractorConfig features;
  ClassifierConfig classifier;
  double threshold = 0.5;

  // Short human-readable name, e.g. "bong+svd148/lr".
  std::string label() const;
  nlohmann::json to_json() const;
  static PipelineSpec from_json(const nlohmann::json& j);
  std::string fingerprint() const;
  bool operator==(const PipelineSpec&) const = default;
};

nlohmann::json preprocessor_to_json(const Preprocessor& p);
Preprocessor preprocessor_from_json(const nlohmann::json& j);

struct TrainingInfo {
  std::uint64_t seed = 0;
  std::string data_fingerprint;
  std::size_t n_examples = 0;
  std::size_t n_positive = 0;
  bool converged = true;
  std::size_t iterations = 0;
};

using Classifier = std::variant<LinearModel, Forest>;

// preprocess -> featurize -> classify -> (calibrate). Immutable once fitted.
class TrainedPipeline {
 public:
  // Throws DataError("SingleClass") when y holds only one class.
  static TrainedPipeline fit(const PipelineSpec& spec, const Preprocessor& preprocessor,
                             const std::vector<Tokens>& docs, std::span<const int> y,
                             std::string data_fingerprint = {});
  static TrainedPipeline fit_texts(const PipelineSpec& spec, const Preprocessor& preprocessor,
                                   std::span<const std::string> texts, std::span<const int> y);

  double predict_proba(std::string_view text) const;
  double predict_proba_tokens(const Tokens& tokens) const;
  // p >= threshold
  int classify(std::string_view text) const;
  int classify_proba(double p) const { return p >= spec_.threshold ? 1 : 0; }

  const PipelineSpec& spec() const { return spec_; }
  const Preprocessor& preprocessor() const { return preprocessor_; }
  const FeatureExtractor& extractor() const { return extractor_; }
  const Classifier& classifier() const { return classifier_; }
  const std::optional<PlattCalibrator>& calibrator() const { return calibrator_; }
  const TrainingInfo& info() const { return info_; }
  double threshold() const { return spec_.threshold; }
  const std::string& fingerprint() const { return fingerprint_; }

  nlohmann::json to_json() const;
  static TrainedPipeline from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static TrainedPipeline load(const std::filesystem::path& path);

 private:
  void seal();

  PipelineSpec spec_;
  Preprocessor preprocessor_;
  FeatureExtractor extractor_;
  Classifier classifier_;
  std::optional<PlattCalibrator> calibrator_;
  TrainingInfo info_;
  std::string fingerprint_;
};

}  // namespace debacer::models
