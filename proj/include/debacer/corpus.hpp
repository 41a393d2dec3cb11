#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace debacer::corpus {

// One turn at the floor.
struct Speech {
  std::string minute_id;
  std::string date;  // ISO-8601 calendar date, YYYY-MM-DD
  std::int64_t order = 0;
  std::string debater;
  std::optional<std::string> party;
  std::string text;
  std::string agenda_item;
  bool is_moderator = false;

  bool operator==(const Speech&) const = default;
};

struct AgendaItem {
  std::string minute_id;
  std::string label;
  std::vector<Speech> speeches;  // strictly ascending by order

  bool operator==(const AgendaItem&) const = default;
};

struct Minute {
  std::string minute_id;
  std::string date;
  std::vector<AgendaItem> agenda_items;

  bool operator==(const Minute&) const = default;
};

struct SpeechKey {
  std::string minute_id;
  std::int64_t order = 0;

  auto operator<=>(const SpeechKey&) const = default;
};

struct AgendaKey {
  std::string minute_id;
  std::string agenda_item;

  auto operator<=>(const AgendaKey&) const = default;
};

// Inclusive index range into an agenda item's speeches.
struct SpeechBlock {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start + 1; }
  bool operator==(const SpeechBlock&) const = default;
};

// Classifier verdict on one moderator speech, kept for review.
struct Decision {
  std::size_t index = 0;
  double probability = 0.0;
  bool interruption = false;

  bool operator==(const Decision&) const = default;
};

struct PartitionResult {
  AgendaKey key;
  std::vector<SpeechBlock> blocks;
  std::string classifier_fingerprint;
  std::vector<Decision> decisions;

  bool operator==(const PartitionResult&) const = default;
};

enum class Format { Jsonl, Csv };

Format parse_format(const std::string& name);
Format format_from_path(const std::filesystem::path& path);

class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Minute> minutes);

  const std::vector<Minute>& minutes() const { return minutes_; }

  const Speech* find_speech(const SpeechKey& key) const;
  const AgendaItem* find_agenda(const AgendaKey& key) const;
  // Position of a speech inside its agenda item.
  std::optional<std::pair<AgendaKey, std::size_t>> locate(const SpeechKey& key) const;

  std::size_t speech_count() const;

  const std::map<SpeechKey, int>& labels() const { return labels_; }
  const std::map<AgendaKey, PartitionResult>& blocks() const { return blocks_; }

  // Throws DataError("UnknownSpeech") if the key does not resolve.
  void set_label(const SpeechKey& key, int label);
  void clear_labels() { labels_.clear(); }
  // Raw insertion used by save_blocks after validation.
  void put_blocks(PartitionResult result);

  bool operator==(const Corpus&) const = default;

 private:
  void index();

  std::vector<Minute> minutes_;
  std::map<SpeechKey, int> labels_;
  std::map<AgendaKey, PartitionResult> blocks_;
  std::map<SpeechKey, std::pair<std::size_t, std::pair<std::size_t, std::size_t>>> speech_index_;
  std::map<AgendaKey, std::pair<std::size_t, std::size_t>> agenda_index_;
};

SpeechKey key_of(const Speech& s);
AgendaKey key_of(const AgendaItem& a);

// Groups flat speech records into minutes and agenda items. Minutes are
// ordered by (date, minute_id); agenda items by their first speech.
Corpus build_corpus(std::vector<Speech> speeches);

// Validates a YYYY-MM-DD date strictly (calendar-aware).
bool is_iso_date(const std::string& s);

Corpus load_corpus(const std::filesystem::path& path, Format format);
Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path, Format format);

std::vector<Speech> flatten(const Corpus& corpus);

// All agenda items whose label matches, in minute order.
std::vector<AgendaItem> select_agenda(const Corpus& corpus, const std::string& label);

// Checks that blocks cover 0..m-1 in order with no gap, overlap or empty block.
// Returns an explanation on failure.
std::optional<std::string> validate_partition(const std::vector<SpeechBlock>& blocks,
                                              std::size_t m);

// Stores a validated partition; throws DataError("InvalidPartition").
void save_blocks(Corpus& corpus, const PartitionResult& partition);

// Labels CSV: minute_id,order,label[,source]
struct LabelRow {
  SpeechKey key;
  int label = 0;
  std::string source;  // empty when the file has no source column

  bool operator==(const LabelRow&) const = default;
};
std::vector<LabelRow> read_labels_csv(const std::filesystem::path& path);
std::vector<LabelRow> parse_labels_csv(const std::string& content);
std::string format_labels_csv(const std::vector<LabelRow>& rows, bool with_source);
void write_labels_csv(const std::vector<LabelRow>& rows, const std::filesystem::path& path,
                      bool with_source = false);
// Applies label rows to the corpus label store (keys must resolve).
void apply_labels(Corpus& corpus, const std::vector<LabelRow>& rows);
std::vector<LabelRow> label_rows(const Corpus& corpus);

// Blocks JSONL: {"minute_id":..,"agenda_item":..,"blocks":[[s,e],...]}
std::vector<PartitionResult> read_blocks_jsonl(const std::filesystem::path& path);
void write_blocks_jsonl(const std::vector<PartitionResult>& results,
                        const std::filesystem::path& path);
std::string format_block_line(const PartitionResult& result);
PartitionResult parse_block_line(const std::string& line);

}  // namespace debacer::corpus
