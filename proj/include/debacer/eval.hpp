#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "debacer/corpus.hpp"
#include "debacer/pipeline.hpp"

namespace debacer::eval {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionCounts&) const = default;
};

// Throws DataError("LengthMismatch").
ConfusionCounts confusion(std::span<const int> y, std::span<const int> predicted);

// 0/0 is reported as 0.
double precision(const ConfusionCounts& c);
double recall(const ConfusionCounts& c);
double f1_score(const ConfusionCounts& c);

inline constexpr double kProbabilityEpsilon = 1e-15;

// Mean binary log loss, natural log, p clamped to [eps, 1 - eps].
// Throws DataError("LengthMismatch").
double cross_entropy(std::span<const int> y, std::span<const double> p);
// Mean squared error over the positive examples only.
// Throws DataError("NoPositives") or DataError("LengthMismatch").
double brier_positive(std::span<const int> y, std::span<const double> p);

struct MetricReport {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double cross_entropy = 0.0;
  double brier_positive = 0.0;
  double fit_time = 0.0;  // seconds
  ConfusionCounts counts;
};

MetricReport evaluate(std::span<const int> y, std::span<const double> p, double threshold);

// Labeled examples for training and evaluation: one row per moderator speech.
struct Dataset {
  std::vector<corpus::SpeechKey> keys;
  std::vector<std::string> texts;
  std::vector<std::string> debaters;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
  std::size_t positives() const;
  std::string fingerprint() const;
  Dataset subset(std::span<const std::size_t> rows) const;
};

// Moderator speeches of the matching agenda items that have a label in
// `labels`, in corpus order.
Dataset make_dataset(const corpus::Corpus& corpus, const std::string& agenda_label,
                     const std::map<corpus::SpeechKey, int>& labels);
// Same, using the corpus label store.
Dataset make_dataset(const corpus::Corpus& corpus, const std::string& agenda_label);

struct FoldAssignment {
  std::vector<std::size_t> fold;  // example index -> fold id
  std::size_t k = 0;
  std::uint64_t seed = 0;

  std::vector<std::size_t> test_indices(std::size_t f) const;
  std::vector<std::size_t> train_indices(std::size_t f) const;
  std::string fingerprint() const;
  nlohmann::json to_json() const;
  static FoldAssignment from_json(const nlohmann::json& j);
  bool operator==(const FoldAssignment&) const = default;
};

// Iterative stratification over the label sets {debater, positive target}.
// Throws ConfigError("InvalidConfig") for k < 2, DataError("TooFewExamples")
// when there are fewer examples than folds.
FoldAssignment stratified_multilabel_kfold(std::span<const std::string> debaters,
                                           std::span<const int> y, std::size_t k,
                                           std::uint64_t seed);
// General form: each example carries a set of label ids.
FoldAssignment iterative_stratification(const std::vector<std::vector<std::size_t>>& labels,
                                        std::size_t k, std::uint64_t seed);

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (N - 1)
};

Aggregate aggregate(std::span<const double> values);

struct CvResult {
  std::string label;
  std::string spec_fingerprint;
  models::PipelineSpec spec;
  std::string data_fingerprint;
  FoldAssignment folds;
  std::vector<MetricReport> per_fold;
  std::map<std::string, Aggregate> aggregates;  // f1, precision, recall, cross_entropy, ...
  std::vector<double> oof_proba;                // out-of-fold probability per example
  double total_time = 0.0;

  std::vector<double> metric(const std::string& name) const;
  nlohmann::json to_json() const;
  static CvResult from_json(const nlohmann::json& j);
};

// Called with each fold's fitted pipeline, possibly from several threads.
using FoldObserver = std::function<void(std::size_t fold, const models::TrainedPipeline&)>;

// Fits a fresh pipeline per fold on the training rows only and evaluates it
// on the held-out rows. Folds run in parallel. Errors are rethrown with the
// fold id in the message.
CvResult run_cv(const models::PipelineSpec& spec, const textprep::Preprocessor& preprocessor,
                const Dataset& data, const FoldAssignment& folds, std::size_t threads = 0,
                const FoldObserver& observer = {});
// Variant with already preprocessed documents, one per example.
CvResult run_cv_tokens(const models::PipelineSpec& spec, const textprep::Preprocessor& preprocessor,
                       const std::vector<textprep::Tokens>& docs, const Dataset& data,
                       const FoldAssignment& folds, std::size_t threads = 0,
                       const FoldObserver& observer = {});

struct WilcoxonResult {
  std::size_t n = 0;  // nonzero differences
  double w_plus = 0.0;
  double w_minus = 0.0;
  double p_value = 1.0;
  bool exact = true;
};

// Two-sided signed-rank test on paired samples. Zero differences are dropped;
// tied magnitudes share their average rank. Exact null distribution up to
// n = 12, normal approximation with continuity and tie corrections above.
// All differences zero gives p = 1. Throws DataError("LengthMismatch").
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

// Holm step-down adjustment, returned in input order.
std::vector<double> holm_adjust(std::span<const double> p);

struct PairwiseComparison {
  std::vector<std::string> labels;
  std::vector<double> average_rank;  // 1 = best
  std::vector<std::vector<double>> p_raw;
  std::vector<std::vector<double>> p_adjusted;
  std::vector<std::vector<std::size_t>> cliques;
  double alpha = 0.05;
  std::string metric = "f1";
  std::string folds_fingerprint;

  nlohmann::json to_json() const;
};

// Ranks pipelines per fold by F1 (higher is better, ties averaged), runs all
// pairwise Wilcoxon tests with Holm adjustment and groups pipelines into
// maximal cliques with no significant internal pair.
// Throws DataError("MismatchedFolds") or ConfigError("InvalidConfig") for
// fewer than two results.
PairwiseComparison compare_pipelines(const std::vector<CvResult>& results, double alpha = 0.05);

// Maximal cliques of an undirected graph given as an adjacency matrix.
std::vector<std::vector<std::size_t>> maximal_cliques(const std::vector<std::vector<bool>>& adj);

}  // namespace debacer::eval
