#include "debacer/corpus.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "csv.hpp"
#include "debacer/errors.hpp"

namespace debacer::corpus {

using nlohmann::json;

namespace {

constexpr const char* kFields[] = {"minute_id", "date",      "order",       "debater",
                                   "party",     "text",      "agenda_item", "is_moderator"};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("FileNotFound", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("WriteFailed", path.string());
  out << content;
  if (!out) throw DataError("WriteFailed", path.string());
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); });
}

[[noreturn]] void missing(std::size_t record, const char* field) {
  throw DataError("MissingField", fmt::format("record {}: field '{}'", record, field));
}

Speech speech_from_json(const json& obj, std::size_t record) {
  if (!obj.is_object()) throw DataError("ParseError", fmt::format("record {}: not an object", record));
  auto req = [&](const char* field) -> const json& {
    auto it = obj.find(field);
    if (it == obj.end() || it->is_null()) missing(record, field);
    return *it;
  };
  auto str = [&](const char* field) {
    const json& v = req(field);
    if (!v.is_string())
      throw DataError("ParseError", fmt::format("record {}: '{}' must be a string", record, field));
    return v.get<std::string>();
  };

  Speech s;
  s.minute_id = str("minute_id");
  s.date = str("date");
  const json& order = req("order");
  if (!order.is_number_integer() || order.get<std::int64_t>() < 0)
    throw DataError("ParseError", fmt::format("record {}: 'order' must be a non-negative integer", record));
  s.order = order.get<std::int64_t>();
  s.debater = str("debater");
  if (auto it = obj.find("party"); it != obj.end() && !it->is_null()) {
    if (!it->is_string())
      throw DataError("ParseError", fmt::format("record {}: 'party' must be a string", record));
    s.party = it->get<std::string>();
  }
  s.text = str("text");
  s.agenda_item = str("agenda_item");
  const json& mod = req("is_moderator");
  if (!mod.is_boolean())
    throw DataError("ParseError", fmt::format("record {}: 'is_moderator' must be a boolean", record));
  s.is_moderator = mod.get<bool>();
  return s;
}

json speech_to_json(const Speech& s) {
  json obj = json::object();
  obj["minute_id"] = s.minute_id;
  obj["date"] = s.date;
  obj["order"] = s.order;
  obj["debater"] = s.debater;
  obj["party"] = s.party ? json(*s.party) : json(nullptr);
  obj["text"] = s.text;
  obj["agenda_item"] = s.agenda_item;
  obj["is_moderator"] = s.is_moderator;
  return obj;
}

bool parse_bool(const std::string& v, bool& out) {
  if (v == "true" || v == "1" || v == "True" || v == "TRUE") {
    out = true;
    return true;
  }
  if (v == "false" || v == "0" || v == "False" || v == "FALSE") {
    out = false;
    return true;
  }
  return false;
}

bool parse_int(const std::string& v, std::int64_t& out) {
  if (v.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stoll(v, &pos);
  } catch (const std::exception&) {
    return false;
  }
  return pos == v.size();
}

std::vector<Speech> parse_jsonl(const std::string& content) {
  std::vector<Speech> out;
  std::istringstream in(content);
  std::string line;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    if (blank(line)) continue;
    ++record;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("ParseError", fmt::format("record {}: {}", record, e.what()));
    }
    out.push_back(speech_from_json(obj, record));
  }
  return out;
}

std::vector<Speech> parse_corpus_csv(const std::string& content) {
  auto rows = detail::parse_csv(content);
  if (rows.empty()) return {};
  const auto& header = rows.front();
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* f : kFields) {
    if (std::string(f) != "party" && !col.count(f)) missing(0, f);
  }

  std::vector<Speech> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t record = r;
    auto get = [&](const char* field) -> std::optional<std::string> {
      auto it = col.find(field);
      if (it == col.end() || it->second >= row.size()) return std::nullopt;
      return row[it->second];
    };
    auto req = [&](const char* field) {
      auto v = get(field);
      if (!v || v->empty()) missing(record, field);
      return *v;
    };

    Speech s;
    s.minute_id = req("minute_id");
    s.date = req("date");
    if (!parse_int(req("order"), s.order) || s.order < 0)
      throw DataError("ParseError", fmt::format("record {}: 'order' must be a non-negative integer", record));
    s.debater = req("debater");
    if (auto p = get("party"); p && !p->empty()) s.party = *p;
    // Empty text is a distinct error from a missing column.
    auto text = get("text");
    if (!text) missing(record, "text");
    s.text = *text;
    s.agenda_item = req("agenda_item");
    if (!parse_bool(req("is_moderator"), s.is_moderator))
      throw DataError("ParseError", fmt::format("record {}: 'is_moderator' must be a boolean", record));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

Format parse_format(const std::string& name) {
  if (name == "jsonl") return Format::Jsonl;
  if (name == "csv") return Format::Csv;
  throw ConfigError("UnknownFormat", name);
}

Format format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? Format::Csv : Format::Jsonl;
}

SpeechKey key_of(const Speech& s) { return {s.minute_id, s.order}; }
AgendaKey key_of(const AgendaItem& a) { return {a.minute_id, a.label}; }

bool is_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (s[i] < '0' || s[i] > '9') return false;
  const int y = std::stoi(s.substr(0, 4));
  const unsigned m = static_cast<unsigned>(std::stoi(s.substr(5, 2)));
  const unsigned d = static_cast<unsigned>(std::stoi(s.substr(8, 2)));
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  return ymd.ok();
}

Corpus::Corpus(std::vector<Minute> minutes) : minutes_(std::move(minutes)) { index(); }

void Corpus::index() {
  speech_index_.clear();
  agenda_index_.clear();
  for (std::size_t mi = 0; mi < minutes_.size(); ++mi) {
    const auto& minute = minutes_[mi];
    for (std::size_t ai = 0; ai < minute.agenda_items.size(); ++ai) {
      const auto& item = minute.agenda_items[ai];
      agenda_index_[key_of(item)] = {mi, ai};
      for (std::size_t si = 0; si < item.speeches.size(); ++si)
        speech_index_[key_of(item.speeches[si])] = {mi, {ai, si}};
    }
  }
}

const Speech* Corpus::find_speech(const SpeechKey& key) const {
  auto it = speech_index_.find(key);
  if (it == speech_index_.end()) return nullptr;
  const auto& [mi, pos] = it->second;
  return &minutes_[mi].agenda_items[pos.first].speeches[pos.second];
}

const AgendaItem* Corpus::find_agenda(const AgendaKey& key) const {
  auto it = agenda_index_.find(key);
  if (it == agenda_index_.end()) return nullptr;
  return &minutes_[it->second.first].agenda_items[it->second.second];
}

std::optional<std::pair<AgendaKey, std::size_t>> Corpus::locate(const SpeechKey& key) const {
  auto it = speech_index_.find(key);
  if (it == speech_index_.end()) return std::nullopt;
  const auto& [mi, pos] = it->second;
  return std::make_pair(key_of(minutes_[mi].agenda_items[pos.first]), pos.second);
}

std::size_t Corpus::speech_count() const { return speech_index_.size(); }

void Corpus::set_label(const SpeechKey& key, int label) {
  if (!find_speech(key))
    throw DataError("UnknownSpeech", fmt::format("({}, {})", key.minute_id, key.order));
  if (label != 0 && label != 1)
    throw DataError("InvalidLabel", fmt::format("label {} is not 0 or 1", label));
  labels_[key] = label;
}

void Corpus::put_blocks(PartitionResult result) {
  auto key = result.key;
  blocks_[key] = std::move(result);
}

Corpus build_corpus(std::vector<Speech> speeches) {
  std::set<SpeechKey> seen;
  for (std::size_t i = 0; i < speeches.size(); ++i) {
    const auto& s = speeches[i];
    const std::size_t record = i + 1;
    if (s.minute_id.empty()) missing(record, "minute_id");
    if (s.debater.empty()) missing(record, "debater");
    if (s.agenda_item.empty()) missing(record, "agenda_item");
    if (blank(s.text)) throw DataError("EmptyText", fmt::format("record {}", record));
    if (!is_iso_date(s.date))
      throw DataError("InvalidDate", fmt::format("record {}: '{}'", record, s.date));
    if (!seen.insert(key_of(s)).second)
      throw DataError("DuplicateOrder", fmt::format("minute {} order {}", s.minute_id, s.order));
  }

  std::map<std::string, std::vector<Speech>> by_minute;
  for (auto& s : speeches) by_minute[s.minute_id].push_back(std::move(s));

  std::vector<Minute> minutes;
  for (auto& [id, list] : by_minute) {
    std::sort(list.begin(), list.end(),
              [](const Speech& a, const Speech& b) { return a.order < b.order; });
    Minute minute;
    minute.minute_id = id;
    minute.date = list.front().date;
    for (const auto& s : list) {
      if (s.date != minute.date)
        throw DataError("InconsistentDate",
                        fmt::format("minute {} has dates {} and {}", id, minute.date, s.date));
    }
    // Agenda items keep the order of their first speech.
    std::map<std::string, std::size_t> slot;
    for (auto& s : list) {
      auto [it, fresh] = slot.try_emplace(s.agenda_item, minute.agenda_items.size());
      if (fresh) minute.agenda_items.push_back(AgendaItem{id, s.agenda_item, {}});
      minute.agenda_items[it->second].speeches.push_back(std::move(s));
    }
    minutes.push_back(std::move(minute));
  }
  std::stable_sort(minutes.begin(), minutes.end(), [](const Minute& a, const Minute& b) {
    return std::tie(a.date, a.minute_id) < std::tie(b.date, b.minute_id);
  });
  return Corpus(std::move(minutes));
}

Corpus load_corpus(const std::filesystem::path& path, Format format) {
  const std::string content = read_file(path);
  auto speeches = format == Format::Jsonl ? parse_jsonl(content) : parse_corpus_csv(content);
  return build_corpus(std::move(speeches));
}

Corpus load_corpus(const std::filesystem::path& path) {
  return load_corpus(path, format_from_path(path));
}

std::vector<Speech> flatten(const Corpus& corpus) {
  std::vector<Speech> out;
  for (const auto& m : corpus.minutes())
    for (const auto& a : m.agenda_items)
      out.insert(out.end(), a.speeches.begin(), a.speeches.end());
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path, Format format) {
  std::string out;
  if (format == Format::Jsonl) {
    for (const auto& s : flatten(corpus)) out += speech_to_json(s).dump() + "\n";
  } else {
    out = detail::csv_row(std::vector<std::string>(std::begin(kFields), std::end(kFields)));
    for (const auto& s : flatten(corpus)) {
      out += detail::csv_row({s.minute_id, s.date, std::to_string(s.order), s.debater,
                              s.party.value_or(""), s.text, s.agenda_item,
                              s.is_moderator ? "true" : "false"});
    }
  }
  write_file(path, out);
}

std::vector<AgendaItem> select_agenda(const Corpus& corpus, const std::string& label) {
  std::vector<AgendaItem> out;
  for (const auto& m : corpus.minutes())
    for (const auto& a : m.agenda_items)
      if (a.label == label) out.push_back(a);
  return out;
}

std::optional<std::string> validate_partition(const std::vector<SpeechBlock>& blocks,
                                              std::size_t m) {
  std::size_t next = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (b.start > b.end) return fmt::format("block {} is empty or reversed", i);
    if (b.start < next) return fmt::format("block {} overlaps its predecessor", i);
    if (b.start > next) return fmt::format("gap before block {}", i);
    if (b.end >= m) return fmt::format("block {} ends past the agenda item ({} speeches)", i, m);
    next = b.end + 1;
  }
  if (next != m) return fmt::format("blocks cover {} of {} speeches", next, m);
  return std::nullopt;
}

void save_blocks(Corpus& corpus, const PartitionResult& partition) {
  const AgendaItem* item = corpus.find_agenda(partition.key);
  if (!item)
    throw DataError("UnknownAgendaItem",
                    fmt::format("({}, {})", partition.key.minute_id, partition.key.agenda_item));
  if (auto err = validate_partition(partition.blocks, item->speeches.size()))
    throw DataError("InvalidPartition", *err);
  corpus.put_blocks(partition);
}

std::vector<LabelRow> parse_labels_csv(const std::string& content) {
  auto rows = detail::parse_csv(content);
  if (rows.empty()) throw DataError("MissingField", "labels file has no header");
  const auto& header = rows.front();
  const bool with_source = header.size() >= 4 && header[3] == "source";
  if (header.size() < 3 || header[0] != "minute_id" || header[1] != "order" || header[2] != "label")
    throw DataError("ParseError", "labels header must be minute_id,order,label[,source]");
  std::vector<LabelRow> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < 3) missing(r, row.size() < 2 ? "order" : "label");
    LabelRow lr;
    lr.key.minute_id = row[0];
    std::int64_t label = 0;
    if (!parse_int(row[1], lr.key.order) || !parse_int(row[2], label) || (label != 0 && label != 1))
      throw DataError("ParseError", fmt::format("labels record {}", r));
    lr.label = static_cast<int>(label);
    if (with_source && row.size() >= 4) lr.source = row[3];
    out.push_back(std::move(lr));
  }
  return out;
}

std::vector<LabelRow> read_labels_csv(const std::filesystem::path& path) {
  return parse_labels_csv(read_file(path));
}

std::string format_labels_csv(const std::vector<LabelRow>& rows, bool with_source) {
  std::string out = with_source ? "minute_id,order,label,source\n" : "minute_id,order,label\n";
  for (const auto& r : rows) {
    std::vector<std::string> fields{r.key.minute_id, std::to_string(r.key.order),
                                    std::to_string(r.label)};
    if (with_source) fields.push_back(r.source);
    out += detail::csv_row(fields);
  }
  return out;
}

void write_labels_csv(const std::vector<LabelRow>& rows, const std::filesystem::path& path,
                      bool with_source) {
  write_file(path, format_labels_csv(rows, with_source));
}

void apply_labels(Corpus& corpus, const std::vector<LabelRow>& rows) {
  for (const auto& r : rows) corpus.set_label(r.key, r.label);
}

std::vector<LabelRow> label_rows(const Corpus& corpus) {
  std::vector<LabelRow> out;
  for (const auto& [key, label] : corpus.labels()) out.push_back({key, label, ""});
  return out;
}

std::string format_block_line(const PartitionResult& r) {
  json obj = json::object();
  obj["minute_id"] = r.key.minute_id;
  obj["agenda_item"] = r.key.agenda_item;
  json blocks = json::array();
  for (const auto& b : r.blocks) blocks.push_back({b.start, b.end});
  obj["blocks"] = std::move(blocks);
  if (!r.classifier_fingerprint.empty()) obj["classifier_fingerprint"] = r.classifier_fingerprint;
  if (!r.decisions.empty()) {
    json dec = json::array();
    for (const auto& d : r.decisions)
      dec.push_back({{"index", d.index}, {"probability", d.probability}, {"interruption", d.interruption}});
    obj["decisions"] = std::move(dec);
  }
  return obj.dump();
}

PartitionResult parse_block_line(const std::string& line) {
  PartitionResult r;
  try {
    const json obj = json::parse(line);
    r.key.minute_id = obj.at("minute_id").get<std::string>();
    r.key.agenda_item = obj.at("agenda_item").get<std::string>();
    for (const auto& b : obj.at("blocks")) {
      if (!b.is_array() || b.size() != 2) throw DataError("ParseError", "block must be [start,end]");
      r.blocks.push_back({b[0].get<std::size_t>(), b[1].get<std::size_t>()});
    }
    r.classifier_fingerprint = obj.value("classifier_fingerprint", "");
    if (auto it = obj.find("decisions"); it != obj.end()) {
      for (const auto& d : *it)
        r.decisions.push_back({d.at("index").get<std::size_t>(), d.at("probability").get<double>(),
                               d.at("interruption").get<bool>()});
    }
  } catch (const json::exception& e) {
    throw DataError("ParseError", e.what());
  }
  return r;
}

std::vector<PartitionResult> read_blocks_jsonl(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<PartitionResult> out;
  std::string line;
  while (std::getline(in, line))
    if (!blank(line)) out.push_back(parse_block_line(line));
  return out;
}

void write_blocks_jsonl(const std::vector<PartitionResult>& results,
                        const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : results) out += format_block_line(r) + "\n";
  write_file(path, out);
}

}  // namespace debacer::corpus
