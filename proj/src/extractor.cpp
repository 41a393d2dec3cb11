#include "debacer/extractor.hpp"

#include <algorithm>

#include "debacer/errors.hpp"
#include "debacer/fingerprint.hpp"

namespace debacer::features {

using nlohmann::json;

namespace {
constexpr const char* kFormat = "debacer-extractor";
constexpr int kVersion = 1;
}  // namespace

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Bow: return "bow";
    case FeatureKind::Bong: return "bong";
    case FeatureKind::Word2Vec: return "word2vec";
  }
  return "unknown";
}

FeatureKind parse_feature_kind(const std::string& name) {
  if (name == "bow") return FeatureKind::Bow;
  if (name == "bong") return FeatureKind::Bong;
  if (name == "word2vec" || name == "w2v") return FeatureKind::Word2Vec;
  throw ConfigError("UnknownFeatures", "'" + name + "' (expected bow, bong or word2vec)");
}

json ExtractorConfig::to_json() const {
  json j = {{"kind", to_string(kind)}, {"n_max", n_max}, {"min_df", min_df}, {"seed", seed}};
  j["svd_k"] = svd_k ? json(*svd_k) : json(nullptr);
  j["word2vec"] = {{"dim", word2vec.dim},         {"window", word2vec.window},
                   {"negatives", word2vec.negatives}, {"epochs", word2vec.epochs},
                   {"min_count", word2vec.min_count}, {"alpha", word2vec.alpha},
                   {"min_alpha", word2vec.min_alpha}, {"seed", word2vec.seed}};
  return j;
}

ExtractorConfig ExtractorConfig::from_json(const json& j) {
  ExtractorConfig c;
  c.kind = parse_feature_kind(j.at("kind").get<std::string>());
  c.n_max = j.value("n_max", c.n_max);
  c.min_df = j.value("min_df", c.min_df);
  c.seed = j.value("seed", c.seed);
  if (j.contains("svd_k") && !j["svd_k"].is_null()) c.svd_k = j["svd_k"].get<std::size_t>();
  if (j.contains("word2vec")) {
    const auto& w = j["word2vec"];
    c.word2vec.dim = w.value("dim", c.word2vec.dim);
    c.word2vec.window = w.value("window", c.word2vec.window);
    c.word2vec.negatives = w.value("negatives", c.word2vec.negatives);
    c.word2vec.epochs = w.value("epochs", c.word2vec.epochs);
    c.word2vec.min_count = w.value("min_count", c.word2vec.min_count);
    c.word2vec.alpha = w.value("alpha", c.word2vec.alpha);
    c.word2vec.min_alpha = w.value("min_alpha", c.word2vec.min_alpha);
    c.word2vec.seed = w.value("seed", c.word2vec.seed);
  }
  return c;
}

FeatureExtractor FeatureExtractor::fit(const ExtractorConfig& config,
                                       const std::vector<Tokens>& docs) {
  FeatureExtractor fx;
  fx.config_ = config;
  if (config.kind == FeatureKind::Word2Vec) {
    if (docs.empty()) throw DataError("EmptyCorpus", "no documents to train embeddings on");
    fx.embeddings_ = train_word2vec(docs, config.word2vec);
  } else {
    const std::size_t n_max = config.kind == FeatureKind::Bow ? 1 : config.n_max;
    fx.vocab_ = fit_bong(docs, n_max, config.min_df);
    if (config.svd_k) {
      SparseMatrix m;
      m.cols = fx.vocab_->size();
      m.rows.reserve(docs.size());
      for (const auto& d : docs) m.rows.push_back(transform_bow(d, *fx.vocab_));
      const std::size_t k = std::min({*config.svd_k, docs.size(), fx.vocab_->size()});
      if (k == 0) throw DataError("EmptyCorpus", "vocabulary is empty; cannot fit SVD");
      fx.svd_ = fit_truncated_svd(m, k, config.seed);
    }
  }
  fx.seal();
  return fx;
}

std::size_t FeatureExtractor::dim() const {
  if (embeddings_) return embeddings_->dim();
  if (svd_) return svd_->k();
  return vocab_ ? vocab_->size() : 0;
}

SparseVector FeatureExtractor::transform(const Tokens& tokens) const {
  if (embeddings_) return SparseVector::from_dense(embed_sentence(tokens, *embeddings_));
  SparseVector counts = transform_bow(tokens, *vocab_);
  if (!svd_) return counts;
  SparseVector out = SparseVector::from_dense(project_svd(counts, *svd_));
  return out;
}

SparseMatrix FeatureExtractor::transform_all(const std::vector<Tokens>& docs) const {
  SparseMatrix m;
  m.cols = dim();
  m.rows.reserve(docs.size());
  for (const auto& d : docs) m.rows.push_back(transform(d));
  return m;
}

void FeatureExtractor::seal() {
  Fingerprint fp;
  fp.add(config_.to_json().dump());
  if (vocab_) {
    for (std::size_t i = 0; i < vocab_->size(); ++i)
      fp.add(vocab_->terms()[i]).add(static_cast<std::uint64_t>(vocab_->document_frequency()[i]));
  }
  if (svd_) {
    for (Eigen::Index i = 0; i < svd_->singular_values.size(); ++i) fp.add(svd_->singular_values(i));
    for (Eigen::Index r = 0; r < svd_->components.rows(); ++r)
      for (Eigen::Index c = 0; c < svd_->components.cols(); ++c) fp.add(svd_->components(r, c));
  }
  if (embeddings_) {
    for (const auto& t : embeddings_->tokens()) fp.add(t);
    for (double x : embeddings_->data()) fp.add(x);
  }
  fingerprint_ = fp.hex();
}

json FeatureExtractor::to_json() const {
  json j = {{"format", kFormat}, {"version", kVersion}, {"fingerprint", fingerprint_},
            {"config", config_.to_json()}};
  if (vocab_) {
    json entries = json::array();
    for (std::size_t i = 0; i < vocab_->size(); ++i)
      entries.push_back({vocab_->terms()[i], vocab_->document_frequency()[i]});
    j["vocabulary"] = {{"n_max", vocab_->n_max()}, {"min_df", vocab_->min_df()}, {"entries", entries}};
  }
  if (svd_) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < svd_->components.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(svd_->components.cols()));
      for (Eigen::Index c = 0; c < svd_->components.cols(); ++c)
        row[static_cast<std::size_t>(c)] = svd_->components(r, c);
      rows.push_back(std::move(row));
    }
    std::vector<double> sv(svd_->singular_values.data(),
                           svd_->singular_values.data() + svd_->singular_values.size());
    j["svd"] = {{"singular_values", sv}, {"components", rows}};
  }
  if (embeddings_) {
    json vectors = json::array();
    for (std::size_t i = 0; i < embeddings_->size(); ++i) {
      auto r = embeddings_->row(i);
      vectors.push_back(std::vector<double>(r.begin(), r.end()));
    }
    j["embeddings"] = {{"dim", embeddings_->dim()},
                       {"tokens", embeddings_->tokens()},
                       {"vectors", vectors},
                       {"epoch_loss", embeddings_->epoch_loss()}};
  }
  return j;
}

FeatureExtractor FeatureExtractor::from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kFormat)
      throw DataError("UnsupportedFormat", "not an extractor envelope");
    if (j.at("version").get<int>() != kVersion)
      throw DataError("UnsupportedVersion", "extractor version " + j.at("version").dump());
    FeatureExtractor fx;
    fx.config_ = ExtractorConfig::from_json(j.at("config"));
    if (j.contains("vocabulary")) {
      const auto& v = j["vocabulary"];
      std::vector<std::string> terms;
      std::vector<std::size_t> df;
      for (const auto& e : v.at("entries")) {
        terms.push_back(e.at(0).get<std::string>());
        df.push_back(e.at(1).get<std::size_t>());
      }
      fx.vocab_ = Vocabulary(v.at("n_max").get<std::size_t>(), v.at("min_df").get<std::size_t>(),
                             std::move(terms), std::move(df));
    }
    if (j.contains("svd")) {
      const auto& s = j["svd"];
      const auto sv = s.at("singular_values").get<std::vector<double>>();
      const auto& rows = s.at("components");
      SvdProjection p;
      p.singular_values = Eigen::Map<const Eigen::VectorXd>(sv.data(), static_cast<Eigen::Index>(sv.size()));
      const Eigen::Index cols = rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size());
      p.components.resize(static_cast<Eigen::Index>(rows.size()), cols);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto row = rows[r].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != cols)
          throw DataError("ParseError", "ragged SVD component matrix");
        for (Eigen::Index c = 0; c < cols; ++c)
          p.components(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)];
      }
      fx.svd_ = std::move(p);
    }
    if (j.contains("embeddings")) {
      const auto& e = j["embeddings"];
      const std::size_t dim = e.at("dim").get<std::size_t>();
      std::vector<double> data;
      for (const auto& row : e.at("vectors")) {
        const auto r = row.get<std::vector<double>>();
        if (r.size() != dim) throw DataError("ParseError", "embedding row has wrong dimension");
        data.insert(data.end(), r.begin(), r.end());
      }
      fx.embeddings_ = EmbeddingTable(dim, e.at("tokens").get<std::vector<std::string>>(),
                                      std::move(data), fx.config_.word2vec,
                                      e.value("epoch_loss", std::vector<double>{}));
    }
    fx.seal();
    if (fx.fingerprint_ != j.at("fingerprint").get<std::string>())
      throw DataError("FingerprintMismatch", "extractor content does not match its fingerprint");
    return fx;
  } catch (const json::exception& e) {
    throw DataError("ParseError", e.what());
  }
}

}  // namespace debacer::features
