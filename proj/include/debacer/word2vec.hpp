#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "debacer/features.hpp"

namespace debacer::features {

struct Word2VecParams {
  std::size_t dim = 100;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  std::size_t min_count = 2;
  double alpha = 0.025;       // initial learning rate, decayed linearly
  double min_alpha = 0.0001;  // floor, as a multiple of alpha
  std::uint64_t seed = 1;

  bool operator==(const Word2VecParams&) const = default;
};

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t dim, std::vector<std::string> tokens, std::vector<double> vectors,
                 Word2VecParams params, std::vector<double> epoch_loss = {});

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<double>& data() const { return vectors_; }
  const Word2VecParams& params() const { return params_; }
  // Mean negative-sampling loss per (center, context) pair, one per epoch.
  const std::vector<double>& epoch_loss() const { return epoch_loss_; }

  // Empty span when the token is not in the table.
  std::span<const double> find(const std::string& token) const;
  std::span<const double> row(std::size_t i) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> tokens_;
  std::vector<double> vectors_;  // size() x dim, row-major
  Word2VecParams params_;
  std::vector<double> epoch_loss_;
  std::map<std::string, std::size_t> index_;
};

// Skip-gram with negative sampling, single-threaded and deterministic per
// seed. Throws DataError("EmptyCorpus") if no token reaches min_count.
EmbeddingTable train_word2vec(const std::vector<Tokens>& docs, const Word2VecParams& params);

// Mean of the in-table token vectors; the zero vector when none is known.
DenseVector embed_sentence(const Tokens& tokens, const EmbeddingTable& table);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace debacer::features
