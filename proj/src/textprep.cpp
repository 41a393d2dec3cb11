#include "debacer/textprep.hpp"

#include <fstream>
#include <sstream>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "bundled_data.hpp"
#include "debacer/errors.hpp"
#include "debacer/fingerprint.hpp"

namespace debacer::textprep {

namespace {

const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || !n) throw ConfigError("IcuUnavailable", u_errorName(status));
  return *n;
}

bool is_word_char(UChar32 c) { return u_isalnum(c) != 0; }

bool is_mark(UChar32 c) { return (U_GET_GC_MASK(c) & U_GC_M_MASK) != 0; }

bool is_hyphen(UChar32 c) { return c == 0x2D || c == 0x2010 || c == 0x2011; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("FileNotFound", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(std::string_view content) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i <= content.size()) {
    std::size_t j = content.find('\n', i);
    if (j == std::string_view::npos) j = content.size();
    std::string line(content.substr(i, j - i));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // Strip surrounding blanks and skip comments.
    const auto b = line.find_first_not_of(" \t");
    if (b != std::string::npos && line[b] != '#') {
      const auto e = line.find_last_not_of(" \t");
      out.push_back(line.substr(b, e - b + 1));
    }
    i = j + 1;
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> parse_tsv_pairs(std::string_view content,
                                                                 const char* what) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t n = 0;
  for (const auto& line : lines_of(content)) {
    ++n;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("ParseError", std::string(what) + " line " + std::to_string(n) + " lacks a tab");
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::size_t code_points(std::string_view utf8) {
  std::size_t n = 0;
  for (unsigned char c : utf8)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

Tokens tokenize(std::string_view text, const TokenizerConfig& config) {
  if (config.min_token_len < 1) throw ConfigError("InvalidConfig", "min_token_len must be >= 1");
  Tokens out;
  if (text.empty()) return out;

  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString us = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  us = nfc().normalize(us, status);
  if (config.lowercase) {
    us.toLower(icu::Locale::getRoot());
    us = nfc().normalize(us, status);
  }
  if (U_FAILURE(status)) throw DataError("InvalidText", u_errorName(status));

  icu::UnicodeString current;
  auto flush = [&] {
    if (current.isEmpty()) return;
    if (static_cast<std::size_t>(current.countChar32()) >= config.min_token_len) {
      std::string utf8;
      current.toUTF8String(utf8);
      out.push_back(std::move(utf8));
    }
    current.remove();
  };

  const int32_t len = us.length();
  for (int32_t i = 0; i < len;) {
    const UChar32 c = us.char32At(i);
    const int32_t next = us.moveIndex32(i, 1);
    if (is_word_char(c) || (is_mark(c) && !current.isEmpty())) {
      current.append(c);
    } else if (is_hyphen(c) && !current.isEmpty() && next < len && is_word_char(us.char32At(next))) {
      current.append(static_cast<UChar32>(0x2D));
    } else {
      flush();
    }
    i = next;
  }
  flush();
  return out;
}

StopwordList::StopwordList(const std::vector<std::string>& words) {
  const TokenizerConfig probe{true, 1};
  for (const auto& w : words) {
    const auto toks = tokenize(w, probe);
    if (toks.size() != 1 || toks[0] != w)
      throw DataError("InvalidStopword", "'" + w + "' does not survive tokenization unchanged");
    words_.insert(w);
  }
}

StopwordList StopwordList::parse(std::string_view content) {
  return StopwordList(lines_of(content));
}

StopwordList StopwordList::from_file(const std::filesystem::path& path) {
  return parse(read_file(path));
}

StopwordList StopwordList::portuguese() { return parse(bundled::stopwords_pt()); }

LemmaTable::LemmaTable(std::map<std::string, std::string> lexicon,
                       std::vector<std::pair<std::string, std::string>> suffix_rules)
    : lexicon_(std::move(lexicon)), rules_(std::move(suffix_rules)) {
  for (const auto& [surface, lemma] : lexicon_)
    if (surface.empty() || lemma.empty()) throw DataError("InvalidLemma", "empty lexicon entry");
  for (const auto& [suffix, repl] : rules_)
    if (suffix.empty()) throw DataError("InvalidLemma", "empty suffix rule");
}

LemmaTable LemmaTable::parse(std::string_view lexicon_tsv, std::string_view suffix_tsv) {
  std::map<std::string, std::string> lexicon;
  for (auto& [k, v] : parse_tsv_pairs(lexicon_tsv, "lemma table")) lexicon[k] = v;
  return LemmaTable(std::move(lexicon), parse_tsv_pairs(suffix_tsv, "suffix rules"));
}

LemmaTable LemmaTable::from_files(const std::filesystem::path& lexicon_tsv,
                                  const std::filesystem::path& suffix_tsv) {
  return parse(read_file(lexicon_tsv), read_file(suffix_tsv));
}

LemmaTable LemmaTable::portuguese() {
  return parse(bundled::lemmas_pt(), bundled::suffixes_pt());
}

std::string LemmaTable::lemma(const std::string& token) const {
  if (auto it = lexicon_.find(token); it != lexicon_.end()) return it->second;

  // Longest suffix wins; earlier rules win among equal lengths. The stem must
  // keep at least two code points.
  const std::pair<std::string, std::string>* best = nullptr;
  for (const auto& rule : rules_) {
    if (!ends_with(token, rule.first)) continue;
    if (code_points(token) < code_points(rule.first) + 2) continue;
    if (!best || rule.first.size() > best->first.size()) best = &rule;
  }
  if (!best) return token;
  std::string out = token.substr(0, token.size() - best->first.size()) + best->second;
  if (auto it = lexicon_.find(out); it != lexicon_.end()) return it->second;
  return out;
}

Tokens remove_stopwords(const Tokens& tokens, const StopwordList& stopwords) {
  Tokens out;
  out.reserve(tokens.size());
  for (const auto& t : tokens)
    if (!stopwords.contains(t)) out.push_back(t);
  return out;
}

Tokens lemmatize(const Tokens& tokens, const LemmaTable& table) {
  Tokens out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(table.lemma(t));
  return out;
}

Tokens preprocess(std::string_view text, const TokenizerConfig& config,
                  const StopwordList& stopwords, const LemmaTable& lemma_table) {
  return lemmatize(remove_stopwords(tokenize(text, config), stopwords), lemma_table);
}

Tokens Preprocessor::operator()(std::string_view text) const {
  return preprocess(text, tokenizer, stopwords, lemmas);
}

std::string Preprocessor::fingerprint() const {
  Fingerprint fp;
  fp.add("preprocess/v1");
  fp.add(static_cast<std::uint64_t>(tokenizer.lowercase));
  fp.add(static_cast<std::uint64_t>(tokenizer.min_token_len));
  for (const auto& w : stopwords.words()) fp.add(w);
  fp.add("|");
  for (const auto& [k, v] : lemmas.lexicon()) fp.add(k).add(v);
  fp.add("|");
  for (const auto& [k, v] : lemmas.suffix_rules()) fp.add(k).add(v);
  return fp.hex();
}

Preprocessor Preprocessor::portuguese() {
  return Preprocessor{TokenizerConfig{}, StopwordList::portuguese(), LemmaTable::portuguese()};
}

std::string join(const Tokens& tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

}  // namespace debacer::textprep
