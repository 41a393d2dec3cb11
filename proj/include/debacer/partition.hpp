#pragma once

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "debacer/corpus.hpp"
#include "debacer/eval.hpp"
#include "debacer/pipeline.hpp"

namespace debacer::partition {

using corpus::AgendaItem;
using corpus::PartitionResult;
using corpus::Speech;
using corpus::SpeechBlock;

// The chairperson marker stored with the speech.
inline bool is_moderator(const Speech& s) { return s.is_moderator; }

bool is_subject_interruption(const models::TrainedPipeline& pipeline, std::string_view text);

// Probability that a moderator speech opens a new subject.
using Scorer = std::function<double(const Speech&)>;

struct Classifier {
  Scorer score;
  double threshold = 0.5;
  std::string fingerprint;
};

// Wraps a fitted pipeline; the pipeline must outlive the returned value.
Classifier from_pipeline(const models::TrainedPipeline& pipeline);
// Scores from known labels (1.0 for label 1, else 0.0).
Classifier from_labels(const std::map<corpus::SpeechKey, int>& labels,
                       std::string fingerprint = "oracle");

// Single pass over the speeches: a moderator speech classified as an
// interruption closes the current block and opens the next one. No empty
// block is emitted, so an interruption at index 0 just starts the first block.
PartitionResult partition_agenda(const AgendaItem& item, const Classifier& classifier);

struct ItemError {
  corpus::AgendaKey key;
  std::string message;
};

struct CorpusPartition {
  std::vector<PartitionResult> results;  // corpus order
  std::vector<ItemError> errors;
};

// Partitions every agenda item with the given label and stores the blocks in
// the corpus. Items run in parallel; a failing item is reported and skipped.
CorpusPartition partition_corpus(corpus::Corpus& corpus, const Classifier& classifier,
                                 const std::string& agenda_label, std::size_t threads = 0);

// Block starts other than index 0.
std::vector<std::size_t> boundaries(const std::vector<SpeechBlock>& blocks);

// Boundary detection counts over the m - 1 candidate positions of one item.
eval::ConfusionCounts boundary_counts(const std::vector<SpeechBlock>& predicted,
                                      const std::vector<SpeechBlock>& truth, std::size_t m);

// Summed over every agenda item present in `truth`; items missing from
// `predicted` count as a single block.
eval::ConfusionCounts boundary_counts(const corpus::Corpus& corpus,
                                      const std::map<corpus::AgendaKey, PartitionResult>& predicted,
                                      const std::map<corpus::AgendaKey, std::vector<SpeechBlock>>& truth);

// One line per block: index range, opening speaker and an excerpt of the
// opening speech.
std::string format_report(const AgendaItem& item, const PartitionResult& result,
                          std::size_t excerpt_chars = 80);

}  // namespace debacer::partition
