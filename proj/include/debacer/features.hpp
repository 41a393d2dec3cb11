#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "debacer/textprep.hpp"

namespace debacer::features {

using textprep::Tokens;
using DenseVector = std::vector<double>;

// Sorted (index, value) pairs over a fixed dimension. Indices are strictly
// ascending and below dim; zero values are never stored.
struct SparseVector {
  std::vector<std::pair<std::uint32_t, double>> entries;
  std::size_t dim = 0;

  bool empty() const { return entries.empty(); }
  double dot(std::span<const double> dense) const;
  DenseVector to_dense() const;
  static SparseVector from_dense(std::span<const double> dense);

  bool operator==(const SparseVector&) const = default;
};

// Row-major sparse design matrix.
struct SparseMatrix {
  std::size_t cols = 0;
  std::vector<SparseVector> rows;

  std::size_t n_rows() const { return rows.size(); }
};

// Joins the words of an n-gram; tokens never contain a space.
inline constexpr char kNgramSeparator = ' ';

// All contiguous n-grams of length 1..n_max, in order of appearance.
std::vector<std::string> ngrams(const Tokens& tokens, std::size_t n_max);

class Vocabulary {
 public:
  Vocabulary() = default;
  // Terms must be sorted and unique; df is parallel to terms.
  Vocabulary(std::size_t n_max, std::size_t min_df, std::vector<std::string> terms,
             std::vector<std::size_t> df);

  std::size_t size() const { return terms_.size(); }
  std::size_t n_max() const { return n_max_; }
  std::size_t min_df() const { return min_df_; }
  std::optional<std::uint32_t> find(const std::string& term) const;
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<std::size_t>& document_frequency() const { return df_; }

  bool operator==(const Vocabulary& o) const {
    return n_max_ == o.n_max_ && min_df_ == o.min_df_ && terms_ == o.terms_ && df_ == o.df_;
  }

 private:
  std::size_t n_max_ = 1;
  std::size_t min_df_ = 1;
  std::vector<std::string> terms_;
  std::vector<std::size_t> df_;
  std::map<std::string, std::uint32_t> index_;
};

// Unigram vocabulary with document frequency >= min_df, lexicographic order.
// Throws DataError("EmptyCorpus") when docs is empty.
Vocabulary fit_bow(const std::vector<Tokens>& docs, std::size_t min_df = 1);
Vocabulary fit_bong(const std::vector<Tokens>& docs, std::size_t n_max = 3, std::size_t min_df = 1);

// Raw n-gram counts over the vocabulary; unknown n-grams are ignored.
SparseVector transform_bow(const Tokens& tokens, const Vocabulary& vocab);

}  // namespace debacer::features
