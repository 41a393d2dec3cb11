#include "debacer/word2vec.hpp"

#include <algorithm>
#include <cmath>

#include "debacer/errors.hpp"
#include "debacer/rng.hpp"

namespace debacer::features {

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// -log(sigmoid(x)) without overflow.
double softplus_neg(double x) {
  return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::size_t dim, std::vector<std::string> tokens,
                               std::vector<double> vectors, Word2VecParams params,
                               std::vector<double> epoch_loss)
    : dim_(dim),
      tokens_(std::move(tokens)),
      vectors_(std::move(vectors)),
      params_(params),
      epoch_loss_(std::move(epoch_loss)) {
  if (vectors_.size() != tokens_.size() * dim_)
    throw DataError("InvalidEmbedding", "vector storage does not match tokens x dim");
  for (double v : vectors_)
    if (!std::isfinite(v)) throw DataError("InvalidEmbedding", "non-finite embedding entry");
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
}

std::span<const double> EmbeddingTable::row(std::size_t i) const {
  return {vectors_.data() + i * dim_, dim_};
}

std::span<const double> EmbeddingTable::find(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return {};
  return row(it->second);
}

EmbeddingTable train_word2vec(const std::vector<Tokens>& docs, const Word2VecParams& p) {
  if (p.dim == 0 || p.window == 0 || p.epochs == 0 || p.min_count == 0)
    throw ConfigError("InvalidConfig", "word2vec dim, window, epochs and min_count must be positive");

  std::map<std::string, std::size_t> counts;
  for (const auto& d : docs)
    for (const auto& t : d) ++counts[t];

  // Vocabulary ordered by descending count, then lexicographically.
  std::vector<std::pair<std::string, std::size_t>> vocab;
  for (auto& [t, c] : counts)
    if (c >= p.min_count) vocab.emplace_back(t, c);
  if (vocab.empty()) throw DataError("EmptyCorpus", "no token reaches min_count");
  std::stable_sort(vocab.begin(), vocab.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::map<std::string, std::uint32_t> id;
  for (std::size_t i = 0; i < vocab.size(); ++i) id.emplace(vocab[i].first, static_cast<std::uint32_t>(i));

  std::vector<std::vector<std::uint32_t>> sentences;
  std::size_t total_words = 0;
  for (const auto& d : docs) {
    std::vector<std::uint32_t> s;
    for (const auto& t : d)
      if (auto it = id.find(t); it != id.end()) s.push_back(it->second);
    total_words += s.size();
    if (s.size() > 1) sentences.push_back(std::move(s));
  }

  // Noise distribution: unigram counts raised to 3/4, sampled by inversion.
  std::vector<double> cdf(vocab.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    acc += std::pow(static_cast<double>(vocab[i].second), 0.75);
    cdf[i] = acc;
  }
  for (auto& c : cdf) c /= acc;

  const std::size_t v = vocab.size();
  const std::size_t dim = p.dim;
  Rng rng(p.seed, 0x77);
  std::vector<double> input(v * dim), output(v * dim, 0.0);
  for (auto& x : input) x = (rng.uniform() - 0.5) / static_cast<double>(dim);

  std::vector<double> grad(dim);
  std::vector<double> epoch_loss;
  const double total = static_cast<double>(p.epochs * total_words) + 1.0;
  std::size_t processed = 0;

  for (std::size_t epoch = 0; epoch < p.epochs; ++epoch) {
    double loss = 0.0;
    std::size_t pairs = 0;
    for (const auto& sentence : sentences) {
      for (std::size_t i = 0; i < sentence.size(); ++i, ++processed) {
        const double alpha =
            std::max(p.alpha * (1.0 - static_cast<double>(processed) / total), p.alpha * p.min_alpha);
        const std::size_t shrink = static_cast<std::size_t>(rng.below(p.window));
        const std::size_t span = p.window - shrink;
        const std::size_t lo = i >= span ? i - span : 0;
        const std::size_t hi = std::min(sentence.size() - 1, i + span);
        const std::uint32_t center = sentence[i];
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == i) continue;
          double* in = &input[sentence[c] * dim];
          std::fill(grad.begin(), grad.end(), 0.0);
          for (std::size_t n = 0; n <= p.negatives; ++n) {
            std::uint32_t target;
            double label;
            if (n == 0) {
              target = center;
              label = 1.0;
            } else {
              const double u = rng.uniform();
              target = static_cast<std::uint32_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
              if (target >= v) target = static_cast<std::uint32_t>(v - 1);
              if (target == center) continue;
              label = 0.0;
            }
            double* out = &output[target * dim];
            double f = 0.0;
            for (std::size_t d = 0; d < dim; ++d) f += in[d] * out[d];
            loss += label > 0 ? softplus_neg(f) : softplus_neg(-f);
            const double g = (label - sigmoid(f)) * alpha;
            for (std::size_t d = 0; d < dim; ++d) {
              grad[d] += g * out[d];
              out[d] += g * in[d];
            }
          }
          for (std::size_t d = 0; d < dim; ++d) in[d] += grad[d];
          ++pairs;
        }
      }
    }
    epoch_loss.push_back(pairs ? loss / static_cast<double>(pairs) : 0.0);
  }

  std::vector<std::string> tokens;
  tokens.reserve(v);
  for (auto& [t, c] : vocab) tokens.push_back(t);
  return EmbeddingTable(dim, std::move(tokens), std::move(input), p, std::move(epoch_loss));
}

DenseVector embed_sentence(const Tokens& tokens, const EmbeddingTable& table) {
  DenseVector out(table.dim(), 0.0);
  std::size_t hits = 0;
  for (const auto& t : tokens) {
    auto vec = table.find(t);
    if (vec.empty()) continue;
    for (std::size_t d = 0; d < out.size(); ++d) out[d] += vec[d];
    ++hits;
  }
  if (hits > 0)
    for (auto& x : out) x /= static_cast<double>(hits);
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

}  // namespace debacer::features
