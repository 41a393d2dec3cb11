#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "debacer/features.hpp"
#include "debacer/svd.hpp"
#include "debacer/word2vec.hpp"

namespace debacer::features {

enum class FeatureKind { Bow, Bong, Word2Vec };

std::string to_string(FeatureKind kind);
FeatureKind parse_feature_kind(const std::string& name);

struct ExtractorConfig {
  FeatureKind kind = FeatureKind::Bong;
  std::size_t n_max = 3;  // BoNG only
  std::size_t min_df = 1;
  // Truncated SVD width for BoW/BoNG; unset keeps raw counts. Clamped to
  // min(documents, vocabulary) at fit time.
  std::optional<std::size_t> svd_k;
  Word2VecParams word2vec;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static ExtractorConfig from_json(const nlohmann::json& j);
  bool operator==(const ExtractorConfig&) const = default;
};

// A fitted, frozen text -> vector transform. Safe to share across threads.
class FeatureExtractor {
 public:
  static FeatureExtractor fit(const ExtractorConfig& config, const std::vector<Tokens>& docs);

  SparseVector transform(const Tokens& tokens) const;
  SparseMatrix transform_all(const std::vector<Tokens>& docs) const;
  std::size_t dim() const;

  const ExtractorConfig& config() const { return config_; }
  const std::optional<Vocabulary>& vocabulary() const { return vocab_; }
  const std::optional<SvdProjection>& svd() const { return svd_; }
  const std::optional<EmbeddingTable>& embeddings() const { return embeddings_; }
  std::size_t effective_svd_k() const { return svd_ ? svd_->k() : 0; }
  const std::string& fingerprint() const { return fingerprint_; }

  // Versioned envelope; from_json verifies the stored fingerprint.
  nlohmann::json to_json() const;
  static FeatureExtractor from_json(const nlohmann::json& j);

 private:
  void seal();

  ExtractorConfig config_;
  std::optional<Vocabulary> vocab_;
  std::optional<SvdProjection> svd_;
  std::optional<EmbeddingTable> embeddings_;
  std::string fingerprint_;
};

}  // namespace debacer::features
