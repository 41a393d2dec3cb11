#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "debacer/corpus.hpp"
#include "debacer/pipeline.hpp"

namespace debacer::annotate {

using corpus::SpeechKey;

// Ordered by precedence: a write never replaces a label of higher rank.
enum class LabelSource { Model = 0, Human = 1, Reviewed = 2 };

std::string to_string(LabelSource s);
// Throws DataError("InvalidSource").
LabelSource parse_label_source(const std::string& s);

struct LabelEntry {
  int label = 0;
  LabelSource source = LabelSource::Human;

  bool operator==(const LabelEntry&) const = default;
};

struct AuditEntry {
  std::size_t seq = 0;
  std::string timestamp;  // UTC, ISO-8601
  SpeechKey key;
  int label = 0;
  LabelSource source = LabelSource::Human;
  std::optional<LabelEntry> previous;
  std::string model_fingerprint;

  nlohmann::json to_json() const;
};

nlohmann::json key_to_json(const SpeechKey& k);
SpeechKey key_from_json(const nlohmann::json& j);

// Labels of moderator speeches with their provenance, plus an append-only log
// of every accepted write.
class AnnotationState {
 public:
  AnnotationState() = default;
  AnnotationState(const corpus::Corpus& corpus, std::string agenda_label);

  const std::string& agenda_label() const { return agenda_label_; }
  const std::map<SpeechKey, LabelEntry>& labels() const { return labels_; }
  const std::vector<AuditEntry>& audit() const { return audit_; }
  // Moderator speeches of the selected agenda items, in corpus order.
  const std::vector<SpeechKey>& candidates() const { return candidates_; }

  std::optional<LabelEntry> label_of(const SpeechKey& key) const;

  // Throws DataError("UnknownSpeech"), DataError("NotModeratorSpeech"),
  // DataError("InvalidLabel") or DataError("DowngradeForbidden").
  const AuditEntry& apply_label(const SpeechKey& key, int label, LabelSource source,
                                const std::string& model_fingerprint = {});

  // Human and reviewed labels only.
  std::map<SpeechKey, int> training_labels() const;
  std::map<SpeechKey, int> all_labels() const;

  std::vector<corpus::LabelRow> export_rows() const;
  // Rows without a source are taken as human labels.
  void import_rows(const std::vector<corpus::LabelRow>& rows);

 private:
  std::string agenda_label_;
  std::set<SpeechKey> moderators_;
  std::set<SpeechKey> known_;
  std::vector<SpeechKey> candidates_;
  std::map<SpeechKey, LabelEntry> labels_;
  std::vector<AuditEntry> audit_;
};

// Uniform sample without replacement of moderator speeches from the
// selected agenda items. Throws DataError("NotEnoughSpeeches").
std::vector<SpeechKey> sample_seed_set(const AnnotationState& state, std::size_t n,
                                       std::uint64_t seed);

// Random forest on bag-of-words with balanced_subsample weights.
models::PipelineSpec bootstrap_spec(std::uint64_t seed = 0);

// Fits `spec` on the human and reviewed labels. Throws
// DataError("InsufficientLabels") unless each class has at least two.
models::TrainedPipeline bootstrap_train(const AnnotationState& state, const corpus::Corpus& corpus,
                                        const models::PipelineSpec& spec = bootstrap_spec(),
                                        const textprep::Preprocessor& preprocessor =
                                            textprep::Preprocessor::portuguese());

struct Suggestion {
  SpeechKey key;
  // Unset when no model has scored the speech yet.
  std::optional<double> probability;
  std::optional<double> uncertainty;  // |p - 0.5|
  std::optional<LabelEntry> current;
  const corpus::Speech* speech = nullptr;
  std::vector<const corpus::Speech*> before;  // preceding speeches, oldest first
  std::vector<const corpus::Speech*> after;
};

enum class QueueStatus { Unlabeled, Labeled, All };
// Throws ConfigError("InvalidConfig").
QueueStatus parse_queue_status(const std::string& s);

// Candidates filtered by status ("unlabeled": no human or reviewed label;
// "labeled": has one), ordered like suggest().
std::vector<Suggestion> list_speeches(const AnnotationState& state, const corpus::Corpus& corpus,
                                      const std::map<SpeechKey, double>& scores, QueueStatus status,
                                      std::size_t limit, std::size_t context = 1);

// Candidates without a human or reviewed label, ordered by ascending
// |p - 0.5|; ties and unscored speeches (last) keep corpus order.
// limit 0 means no limit.
std::vector<Suggestion> suggest(const AnnotationState& state, const corpus::Corpus& corpus,
                                const std::map<SpeechKey, double>& scores, std::size_t limit,
                                std::size_t context = 1);
std::vector<Suggestion> suggest(const AnnotationState& state, const corpus::Corpus& corpus,
                                const models::TrainedPipeline& pipeline, std::size_t limit,
                                std::size_t context = 1);

// Probability for every candidate.
std::map<SpeechKey, double> score_candidates(const AnnotationState& state, const corpus::Corpus& corpus,
                                             const models::TrainedPipeline& pipeline);

// Writes model labels for candidates that have no label or only a model
// label. Returns the number written.
std::size_t machine_label(AnnotationState& state, const corpus::Corpus& corpus,
                          const models::TrainedPipeline& pipeline);

nlohmann::json suggestion_to_json(const Suggestion& s);

}  // namespace debacer::annotate
