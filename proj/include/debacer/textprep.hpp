#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace debacer::textprep {

using Tokens = std::vector<std::string>;

struct TokenizerConfig {
  bool lowercase = true;
  std::size_t min_token_len = 2;  // in code points, >= 1
  // Normalization is always NFC.

  bool operator==(const TokenizerConfig&) const = default;
};

// Tokens are maximal runs of letters and digits; a hyphen between two such
// characters stays inside the token ("guarda-chuva").
Tokens tokenize(std::string_view text, const TokenizerConfig& config = {});

class StopwordList {
 public:
  StopwordList() = default;
  // Throws DataError("InvalidStopword") for entries that would not survive
  // the tokenizer unchanged.
  explicit StopwordList(const std::vector<std::string>& words);

  static StopwordList from_file(const std::filesystem::path& path);
  static StopwordList parse(std::string_view content);
  static StopwordList portuguese();

  bool contains(const std::string& token) const { return words_.count(token) > 0; }
  const std::set<std::string>& words() const { return words_; }
  std::size_t size() const { return words_.size(); }

 private:
  std::set<std::string> words_;
};

class LemmaTable {
 public:
  LemmaTable() = default;
  LemmaTable(std::map<std::string, std::string> lexicon,
             std::vector<std::pair<std::string, std::string>> suffix_rules);

  static LemmaTable from_files(const std::filesystem::path& lexicon_tsv,
                               const std::filesystem::path& suffix_tsv);
  static LemmaTable parse(std::string_view lexicon_tsv, std::string_view suffix_tsv);
  static LemmaTable portuguese();

  // Lexicon hit, else the longest matching suffix rule (whose output is then
  // looked up in the lexicon), else the token itself.
  std::string lemma(const std::string& token) const;

  const std::map<std::string, std::string>& lexicon() const { return lexicon_; }
  const std::vector<std::pair<std::string, std::string>>& suffix_rules() const { return rules_; }

 private:
  std::map<std::string, std::string> lexicon_;
  std::vector<std::pair<std::string, std::string>> rules_;
};

Tokens remove_stopwords(const Tokens& tokens, const StopwordList& stopwords);
Tokens lemmatize(const Tokens& tokens, const LemmaTable& table);

// Everything the preprocessing stage needs, shareable and immutable once built.
struct Preprocessor {
  TokenizerConfig tokenizer;
  StopwordList stopwords;
  LemmaTable lemmas;

  Tokens operator()(std::string_view text) const;
  std::string fingerprint() const;

  static Preprocessor portuguese();
};

Tokens preprocess(std::string_view text, const TokenizerConfig& config,
                  const StopwordList& stopwords, const LemmaTable& lemma_table);

std::string join(const Tokens& tokens, std::string_view sep = " ");

// Number of Unicode code points in a UTF-8 string.
std::size_t code_points(std::string_view utf8);

}  // namespace debacer::textprep
