#include "debacer/partition.hpp"

#include <algorithm>
#include <exception>
#include <optional>
#include <set>

#include <fmt/format.h>

#include "debacer/errors.hpp"
#include "debacer/parallel.hpp"

namespace debacer::partition {

bool is_subject_interruption(const models::TrainedPipeline& pipeline, std::string_view text) {
  return pipeline.predict_proba(text) >= pipeline.threshold();
}

Classifier from_pipeline(const models::TrainedPipeline& pipeline) {
  return {[&pipeline](const Speech& s) { return pipeline.predict_proba(s.text); },
          pipeline.threshold(), pipeline.fingerprint()};
}

Classifier from_labels(const std::map<corpus::SpeechKey, int>& labels, std::string fingerprint) {
  return {[&labels](const Speech& s) {
            auto it = labels.find(corpus::key_of(s));
            return it != labels.end() && it->second == 1 ? 1.0 : 0.0;
          },
          0.5, std::move(fingerprint)};
}

PartitionResult partition_agenda(const AgendaItem& item, const Classifier& classifier) {
  PartitionResult out;
  out.key = corpus::key_of(item);
  out.classifier_fingerprint = classifier.fingerprint;
  const std::size_t m = item.speeches.size();
  std::size_t start = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& s = item.speeches[i];
    if (!is_moderator(s)) continue;
    const double p = classifier.score(s);
    const bool interruption = p >= classifier.threshold;
    out.decisions.push_back({i, p, interruption});
    if (interruption && i > start) {
      out.blocks.push_back({start, i - 1});
      start = i;
    }
  }
  if (m > 0) out.blocks.push_back({start, m - 1});
  return out;
}

CorpusPartition partition_corpus(corpus::Corpus& corpus, const Classifier& classifier,
                                 const std::string& agenda_label, std::size_t threads) {
  const auto items = corpus::select_agenda(corpus, agenda_label);
  std::vector<std::optional<PartitionResult>> results(items.size());
  std::vector<std::string> errors(items.size());
  parallel_for(
      items.size(),
      [&](std::size_t i) {
        try {
          results[i] = partition_agenda(items[i], classifier);
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      },
      threads);

  CorpusPartition out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!results[i]) {
      out.errors.push_back({corpus::key_of(items[i]), errors[i]});
      continue;
    }
    if (!results[i]->blocks.empty()) corpus::save_blocks(corpus, *results[i]);
    out.results.push_back(std::move(*results[i]));
  }
  return out;
}

std::vector<std::size_t> boundaries(const std::vector<SpeechBlock>& blocks) {
  std::vector<std::size_t> out;
  for (const auto& b : blocks)
    if (b.start > 0) out.push_back(b.start);
  return out;
}

eval::ConfusionCounts boundary_counts(const std::vector<SpeechBlock>& predicted,
                                      const std::vector<SpeechBlock>& truth, std::size_t m) {
  const auto p = boundaries(predicted);
  const auto t = boundaries(truth);
  const std::set<std::size_t> ps(p.begin(), p.end()), ts(t.begin(), t.end());
  eval::ConfusionCounts c;
  for (auto b : ps) (ts.count(b) ? c.tp : c.fp)++;
  for (auto b : ts)
    if (!ps.count(b)) ++c.fn;
  const std::size_t candidates = m > 0 ? m - 1 : 0;
  c.tn = candidates - std::min(candidates, c.tp + c.fp + c.fn);
  return c;
}

eval::ConfusionCounts boundary_counts(const corpus::Corpus& corpus,
                                      const std::map<corpus::AgendaKey, PartitionResult>& predicted,
                                      const std::map<corpus::AgendaKey, std::vector<SpeechBlock>>& truth) {
  eval::ConfusionCounts total;
  for (const auto& [key, blocks] : truth) {
    const auto* item = corpus.find_agenda(key);
    if (!item) throw DataError("UnknownAgendaItem", fmt::format("{}/{}", key.minute_id, key.agenda_item));
    auto it = predicted.find(key);
    const std::vector<SpeechBlock> none;
    const auto c = boundary_counts(it == predicted.end() ? none : it->second.blocks, blocks,
                                   item->speeches.size());
    total.tp += c.tp;
    total.fp += c.fp;
    total.fn += c.fn;
    total.tn += c.tn;
  }
  return total;
}

namespace {

// First sentence, cut at a code-point boundary.
std::string excerpt(const std::string& text, std::size_t max_chars) {
  std::size_t end = text.size();
  for (std::size_t i = 0; i < text.size(); ++i)
    if ((text[i] == '.' || text[i] == '!' || text[i] == '?') &&
        (i + 1 == text.size() || text[i + 1] == ' ')) {
      end = i + 1;
      break;
    }
  std::size_t chars = 0, i = 0;
  while (i < end && chars < max_chars) {
    ++i;
    while (i < end && (static_cast<unsigned char>(text[i]) & 0xC0) == 0x80) ++i;
    ++chars;
  }
  return text.substr(0, i) + (i < end ? "..." : "");
}

}  // namespace

std::string format_report(const AgendaItem& item, const PartitionResult& result,
                          std::size_t excerpt_chars) {
  std::string out = fmt::format("{} / {}: {} speeches, {} blocks\n", item.minute_id, item.label,
                                item.speeches.size(), result.blocks.size());
  for (std::size_t b = 0; b < result.blocks.size(); ++b) {
    const auto& blk = result.blocks[b];
    if (blk.end >= item.speeches.size())
      throw DataError("InvalidPartition", "block range exceeds the agenda item");
    const auto& s = item.speeches[blk.start];
    out += fmt::format("  [{:>3}..{:>3}] {:<24} {}\n", blk.start, blk.end, s.debater,
                       excerpt(s.text, excerpt_chars));
  }
  return out;
}

}  // namespace debacer::partition
