#include "debacer/features.hpp"

#include <algorithm>
#include <set>

#include "debacer/errors.hpp"

namespace debacer::features {

double SparseVector::dot(std::span<const double> dense) const {
  double s = 0.0;
  for (const auto& [i, v] : entries) s += v * dense[i];
  return s;
}

DenseVector SparseVector::to_dense() const {
  DenseVector out(dim, 0.0);
  for (const auto& [i, v] : entries) out[i] = v;
  return out;
}

SparseVector SparseVector::from_dense(std::span<const double> dense) {
  SparseVector out;
  out.dim = dense.size();
  for (std::size_t i = 0; i < dense.size(); ++i)
    if (dense[i] != 0.0) out.entries.emplace_back(static_cast<std::uint32_t>(i), dense[i]);
  return out;
}

std::vector<std::string> ngrams(const Tokens& tokens, std::size_t n_max) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string gram;
    for (std::size_t n = 1; n <= n_max && i + n <= tokens.size(); ++n) {
      if (n > 1) gram.push_back(kNgramSeparator);
      gram += tokens[i + n - 1];
      out.push_back(gram);
    }
  }
  return out;
}

Vocabulary::Vocabulary(std::size_t n_max, std::size_t min_df, std::vector<std::string> terms,
                       std::vector<std::size_t> df)
    : n_max_(n_max), min_df_(min_df), terms_(std::move(terms)), df_(std::move(df)) {
  if (df_.size() != terms_.size()) throw DataError("InvalidVocabulary", "df length mismatch");
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (i > 0 && !(terms_[i - 1] < terms_[i]))
      throw DataError("InvalidVocabulary", "terms must be sorted and unique");
    index_.emplace(terms_[i], static_cast<std::uint32_t>(i));
  }
}

std::optional<std::uint32_t> Vocabulary::find(const std::string& term) const {
  auto it = index_.find(term);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary fit_bong(const std::vector<Tokens>& docs, std::size_t n_max, std::size_t min_df) {
  if (docs.empty()) throw DataError("EmptyCorpus", "no documents to fit a vocabulary on");
  if (n_max < 1) throw ConfigError("InvalidConfig", "n_max must be >= 1");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : docs) {
    auto grams = ngrams(doc, n_max);
    std::sort(grams.begin(), grams.end());
    grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
    for (auto& g : grams) ++df[g];
  }
  std::vector<std::string> terms;
  std::vector<std::size_t> counts;
  for (auto& [term, n] : df) {
    if (n >= min_df) {
      terms.push_back(term);
      counts.push_back(n);
    }
  }
  return Vocabulary(n_max, min_df, std::move(terms), std::move(counts));
}

Vocabulary fit_bow(const std::vector<Tokens>& docs, std::size_t min_df) {
  return fit_bong(docs, 1, min_df);
}

SparseVector transform_bow(const Tokens& tokens, const Vocabulary& vocab) {
  std::map<std::uint32_t, double> counts;
  for (const auto& g : ngrams(tokens, vocab.n_max()))
    if (auto idx = vocab.find(g)) counts[*idx] += 1.0;
  SparseVector out;
  out.dim = vocab.size();
  out.entries.assign(counts.begin(), counts.end());
  return out;
}

}  // namespace debacer::features
