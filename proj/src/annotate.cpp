#include "debacer/annotate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "debacer/errors.hpp"
#include "debacer/rng.hpp"

namespace debacer::annotate {

using nlohmann::json;

std::string to_string(LabelSource s) {
  switch (s) {
    case LabelSource::Model: return "model";
    case LabelSource::Human: return "human";
    case LabelSource::Reviewed: return "reviewed";
  }
  return "human";
}

LabelSource parse_label_source(const std::string& s) {
  if (s == "model") return LabelSource::Model;
  if (s == "human") return LabelSource::Human;
  if (s == "reviewed") return LabelSource::Reviewed;
  throw DataError("InvalidSource", fmt::format("label source '{}' (expected model, human or reviewed)", s));
}

json key_to_json(const SpeechKey& k) { return {{"minute_id", k.minute_id}, {"order", k.order}}; }

SpeechKey key_from_json(const json& j) {
  if (!j.is_object() || !j.contains("minute_id") || !j.contains("order") ||
      !j["minute_id"].is_string() || !j["order"].is_number_integer())
    throw DataError("MissingField", "key needs a string minute_id and an integer order");
  return {j["minute_id"].get<std::string>(), j["order"].get<std::int64_t>()};
}

json AuditEntry::to_json() const {
  json j{{"seq", seq},
         {"timestamp", timestamp},
         {"key", key_to_json(key)},
         {"label", label},
         {"source", annotate::to_string(source)},
         {"model_fingerprint", model_fingerprint},
         {"previous", nullptr}};
  if (previous)
    j["previous"] = {{"label", previous->label}, {"source", annotate::to_string(previous->source)}};
  return j;
}

AnnotationState::AnnotationState(const corpus::Corpus& corpus, std::string agenda_label)
    : agenda_label_(std::move(agenda_label)) {
  for (const auto& m : corpus.minutes())
    for (const auto& item : m.agenda_items)
      for (const auto& s : item.speeches) {
        const auto key = corpus::key_of(s);
        known_.insert(key);
        if (!s.is_moderator) continue;
        moderators_.insert(key);
        if (item.label == agenda_label_) candidates_.push_back(key);
      }
}

std::optional<LabelEntry> AnnotationState::label_of(const SpeechKey& key) const {
  auto it = labels_.find(key);
  if (it == labels_.end()) return std::nullopt;
  return it->second;
}

const AuditEntry& AnnotationState::apply_label(const SpeechKey& key, int label, LabelSource source,
                                               const std::string& model_fingerprint) {
  if (!known_.count(key))
    throw DataError("UnknownSpeech", fmt::format("{}#{}", key.minute_id, key.order));
  if (!moderators_.count(key))
    throw DataError("NotModeratorSpeech", fmt::format("{}#{} is not a moderator speech", key.minute_id, key.order));
  if (label != 0 && label != 1) throw DataError("InvalidLabel", "label must be 0 or 1");
  const auto previous = label_of(key);
  if (previous && source < previous->source)
    throw DataError("DowngradeForbidden",
                    fmt::format("{}#{} already has a {} label", key.minute_id, key.order,
                                annotate::to_string(previous->source)));
  labels_[key] = {label, source};
  AuditEntry e;
  e.seq = audit_.size() + 1;
  e.timestamp = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                         std::chrono::system_clock::now())));
  e.key = key;
  e.label = label;
  e.source = source;
  e.previous = previous;
  e.model_fingerprint = model_fingerprint;
  audit_.push_back(std::move(e));
  return audit_.back();
}

std::map<SpeechKey, int> AnnotationState::training_labels() const {
  std::map<SpeechKey, int> out;
  for (const auto& [k, e] : labels_)
    if (e.source != LabelSource::Model) out[k] = e.label;
  return out;
}

std::map<SpeechKey, int> AnnotationState::all_labels() const {
  std::map<SpeechKey, int> out;
  for (const auto& [k, e] : labels_) out[k] = e.label;
  return out;
}

std::vector<corpus::LabelRow> AnnotationState::export_rows() const {
  std::vector<corpus::LabelRow> out;
  for (const auto& [k, e] : labels_) out.push_back({k, e.label, annotate::to_string(e.source)});
  return out;
}

void AnnotationState::import_rows(const std::vector<corpus::LabelRow>& rows) {
  for (const auto& r : rows)
    apply_label(r.key, r.label, r.source.empty() ? LabelSource::Human : parse_label_source(r.source));
}

// ---------------------------------------------------------------------------

std::vector<SpeechKey> sample_seed_set(const AnnotationState& state, std::size_t n, std::uint64_t seed) {
  const auto& pool = state.candidates();
  if (n > pool.size())
    throw DataError("NotEnoughSpeeches",
                    fmt::format("asked for {} moderator speeches, {} available", n, pool.size()));
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed, 0x70);
  // Partial Fisher-Yates: the first n positions are a uniform sample.
  for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  std::vector<SpeechKey> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pool[idx[i]]);
  return out;
}

models::PipelineSpec bootstrap_spec(std::uint64_t seed) {
  models::PipelineSpec s;
  s.features.kind = features::FeatureKind::Bow;
  s.features.seed = seed;
  s.classifier.kind = models::ClassifierKind::RandomForest;
  s.classifier.class_weight = models::ClassWeight::BalancedSubsample;
  s.classifier.seed = seed;
  return s;
}

models::TrainedPipeline bootstrap_train(const AnnotationState& state, const corpus::Corpus& corpus,
                                        const models::PipelineSpec& spec,
                                        const textprep::Preprocessor& preprocessor) {
  std::vector<std::string> texts;
  std::vector<int> y;
  std::size_t count[2] = {0, 0};
  for (const auto& [key, label] : state.training_labels()) {
    const auto* s = corpus.find_speech(key);
    if (!s) throw DataError("UnknownSpeech", fmt::format("{}#{}", key.minute_id, key.order));
    texts.push_back(s->text);
    y.push_back(label);
    ++count[label];
  }
  for (int c = 0; c < 2; ++c)
    if (count[c] < 2)
      throw DataError("InsufficientLabels",
                      fmt::format("class {} has {} human or reviewed labels, need at least 2", c, count[c]));
  return models::TrainedPipeline::fit_texts(spec, preprocessor, texts, y);
}

std::map<SpeechKey, double> score_candidates(const AnnotationState& state, const corpus::Corpus& corpus,
                                             const models::TrainedPipeline& pipeline) {
  std::map<SpeechKey, double> out;
  for (const auto& key : state.candidates()) {
    const auto* s = corpus.find_speech(key);
    if (s) out[key] = pipeline.predict_proba(s->text);
  }
  return out;
}

QueueStatus parse_queue_status(const std::string& s) {
  if (s == "unlabeled") return QueueStatus::Unlabeled;
  if (s == "labeled") return QueueStatus::Labeled;
  if (s == "all") return QueueStatus::All;
  throw ConfigError("InvalidConfig", fmt::format("status '{}' (expected unlabeled, labeled or all)", s));
}

std::vector<Suggestion> list_speeches(const AnnotationState& state, const corpus::Corpus& corpus,
                                      const std::map<SpeechKey, double>& scores, QueueStatus status,
                                      std::size_t limit, std::size_t context) {
  std::vector<Suggestion> out;
  for (const auto& key : state.candidates()) {
    const auto current = state.label_of(key);
    const bool settled = current && current->source != LabelSource::Model;
    if ((status == QueueStatus::Unlabeled && settled) || (status == QueueStatus::Labeled && !settled))
      continue;
    Suggestion s;
    s.key = key;
    s.current = current;
    if (auto it = scores.find(key); it != scores.end()) {
      s.probability = it->second;
      s.uncertainty = std::abs(it->second - 0.5);
    }
    out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(), [](const Suggestion& a, const Suggestion& b) {
    if (a.uncertainty.has_value() != b.uncertainty.has_value()) return a.uncertainty.has_value();
    return a.uncertainty && *a.uncertainty < *b.uncertainty;
  });
  if (limit > 0 && out.size() > limit) out.resize(limit);

  for (auto& s : out) {
    const auto where = corpus.locate(s.key);
    if (!where) continue;
    const auto* item = corpus.find_agenda(where->first);
    const std::size_t i = where->second;
    s.speech = &item->speeches[i];
    for (std::size_t j = i >= context ? i - context : 0; j < i; ++j) s.before.push_back(&item->speeches[j]);
    for (std::size_t j = i + 1; j < item->speeches.size() && j <= i + context; ++j)
      s.after.push_back(&item->speeches[j]);
  }
  return out;
}

std::vector<Suggestion> suggest(const AnnotationState& state, const corpus::Corpus& corpus,
                                const std::map<SpeechKey, double>& scores, std::size_t limit,
                                std::size_t context) {
  return list_speeches(state, corpus, scores, QueueStatus::Unlabeled, limit, context);
}

std::vector<Suggestion> suggest(const AnnotationState& state, const corpus::Corpus& corpus,
                                const models::TrainedPipeline& pipeline, std::size_t limit,
                                std::size_t context) {
  return suggest(state, corpus, score_candidates(state, corpus, pipeline), limit, context);
}

std::size_t machine_label(AnnotationState& state, const corpus::Corpus& corpus,
                          const models::TrainedPipeline& pipeline) {
  std::size_t written = 0;
  for (const auto& [key, p] : score_candidates(state, corpus, pipeline)) {
    const auto current = state.label_of(key);
    if (current && current->source != LabelSource::Model) continue;
    state.apply_label(key, pipeline.classify_proba(p), LabelSource::Model, pipeline.fingerprint());
    ++written;
  }
  return written;
}

namespace {

json speech_json(const corpus::Speech& s) {
  return {{"minute_id", s.minute_id}, {"order", s.order},          {"debater", s.debater},
          {"party", s.party ? json(*s.party) : json(nullptr)},     {"text", s.text},
          {"is_moderator", s.is_moderator}};
}

}  // namespace

json suggestion_to_json(const Suggestion& s) {
  json before = json::array(), after = json::array();
  for (const auto* p : s.before) before.push_back(speech_json(*p));
  for (const auto* p : s.after) after.push_back(speech_json(*p));
  json j{{"key", key_to_json(s.key)},
         {"probability", s.probability ? json(*s.probability) : json(nullptr)},
         {"uncertainty", s.uncertainty ? json(*s.uncertainty) : json(nullptr)},
         {"label", nullptr},
         {"source", nullptr},
         {"context", {{"previous", std::move(before)}, {"next", std::move(after)}}}};
  if (s.speech) {
    j["text"] = s.speech->text;
    j["debater"] = s.speech->debater;
    j["date"] = s.speech->date;
    j["agenda_item"] = s.speech->agenda_item;
  }
  if (s.current) {
    j["label"] = s.current->label;
    j["source"] = to_string(s.current->source);
  }
  return j;
}

}  // namespace debacer::annotate
