#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "debacer/corpus.hpp"

namespace debacer::corpus {

// Parameters of the synthetic moderated-debate generator. Each target agenda
// item is a run of subject blocks; a block is a geometric number of
// exchanges (moderator utterance followed by one or two debater speeches).
// The moderator opens every block after the first with a trigger-lexicon
// sentence (label 1); all other moderator utterances come from the
// continuation lexicon (label 0).
struct SynthConfig {
  std::size_t n_minutes = 10;
  std::size_t n_debaters = 40;
  // Chairpersons; minute i is chaired by moderator_ids[(i + offset) % size].
  std::vector<std::string> moderator_ids{"presidente"};
  double mean_block_length = 12.0;  // mean exchanges per block, >= 1
  std::size_t blocks_per_item = 5;
  std::vector<std::string> trigger_lexicon;
  std::vector<std::string> continuation_lexicon;
  double noise_prob = 0.0;  // per-utterance probability of one content-word swap, [0, 0.5)
  std::size_t topic_vocab_size = 60;
  std::size_t n_topics = 8;
  std::string agenda_label = "political statements";
  // Adds a short unlabeled "votes" item per minute.
  bool include_votes_item = true;
  std::string start_date = "2020-09-16";
  std::uint64_t seed = 0;
};

// Portuguese-parliament-flavoured default lexicons.
std::vector<std::string> default_trigger_lexicon();
std::vector<std::string> default_continuation_lexicon();

// Generator defaults with the moderator roster and size of the annotated
// "political statements" set (5 chairpersons, about 590 moderator speeches,
// about 7% interruptions).
SynthConfig annotated_set_config(std::uint64_t seed, double noise_prob = 0.1);

struct GroundTruth {
  std::map<AgendaKey, std::vector<SpeechBlock>> blocks;
  // One entry per moderator speech in the target agenda items.
  std::map<SpeechKey, int> labels;
  // Topic id of every generated block-speech, for embedding checks.
  std::map<SpeechKey, std::size_t> topic_of;
};

struct SynthResult {
  Corpus corpus;
  GroundTruth truth;
};

// Throws ConfigError("InvalidConfig") on bad parameters.
void validate(const SynthConfig& config);
SynthResult generate_synthetic(const SynthConfig& config);

// Vocabulary of one topic as generated (distinct across topics).
std::vector<std::string> topic_vocabulary(std::size_t topic, std::size_t size);

}  // namespace debacer::corpus
