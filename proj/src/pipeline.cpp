#include "debacer/pipeline.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "debacer/errors.hpp"
#include "debacer/fingerprint.hpp"

namespace debacer::models {

using nlohmann::json;

namespace {
constexpr const char* kFormat = "debacer-model";
constexpr int kVersion = 1;
}  // namespace

std::string to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::LogReg: return "lr";
    case ClassifierKind::LinearSvm: return "svm";
    case ClassifierKind::RandomForest: return "rf";
  }
  return "lr";
}

ClassifierKind parse_classifier_kind(const std::string& s) {
  if (s == "lr" || s == "logreg") return ClassifierKind::LogReg;
  if (s == "svm" || s == "linear_svm") return ClassifierKind::LinearSvm;
  if (s == "rf" || s == "random_forest") return ClassifierKind::RandomForest;
  throw ConfigError("UnknownClassifier", "'" + s + "' (expected lr, svm or rf)");
}

json ClassifierConfig::to_json() const {
  json j = {{"kind", to_string(kind)}, {"seed", seed}};
  switch (kind) {
    case ClassifierKind::LogReg:
      j["penalty"] = to_string(penalty);
      j["C"] = C;
      j["class_weight"] = to_string(class_weight);
      j["tol"] = tol;
      j["max_iter"] = max_iter;
      break;
    case ClassifierKind::LinearSvm:
      j["C"] = C;
      j["tol"] = svm_tol;
      j["max_epochs"] = max_epochs;
      break;
    case ClassifierKind::RandomForest:
      j["n_estimators"] = n_estimators;
      j["criterion"] = to_string(criterion);
      j["class_weight"] = to_string(class_weight);
      j["max_features"] = max_features ? json(*max_features) : json(nullptr);
      break;
  }
  return j;
}

ClassifierConfig ClassifierConfig::from_json(const json& j) {
  ClassifierConfig c;
  c.kind = parse_classifier_kind(j.at("kind").get<std::string>());
  c.seed = j.value("seed", c.seed);
  switch (c.kind) {
    case ClassifierKind::LogReg:
      c.penalty = parse_penalty(j.value("penalty", std::string("l2")));
      c.C = j.value("C", c.C);
      c.class_weight = parse_class_weight(j.value("class_weight", std::string("none")));
      c.tol = j.value("tol", c.tol);
      c.max_iter = j.value("max_iter", c.max_iter);
      break;
    case ClassifierKind::LinearSvm:
      c.C = j.value("C", c.C);
      c.svm_tol = j.value("tol", c.svm_tol);
      c.max_epochs = j.value("max_epochs", c.max_epochs);
      break;
    case ClassifierKind::RandomForest:
      c.n_estimators = j.value("n_estimators", c.n_estimators);
      c.criterion = parse_criterion(j.value("criterion", std::string("gini")));
      c.class_weight = parse_class_weight(j.value("class_weight", std::string("none")));
      if (j.contains("max_features") && !j["max_features"].is_null())
        c.max_features = j["max_features"].get<std::size_t>();
      break;
  }
  if (!(c.C > 0)) throw ConfigError("InvalidConfig", "C must be positive");
  return c;
}

std::string PipelineSpec::label() const {
  std::string f = features::to_string(features.kind);
  if (features.kind != features::FeatureKind::Word2Vec && features.svd_k)
    f += fmt::format("+svd{}", *features.svd_k);
  return f + "/" + to_string(classifier.kind);
}

json PipelineSpec::to_json() const {
  return {{"features", features.to_json()},
          {"classifier", classifier.to_json()},
          {"threshold", threshold}};
}

PipelineSpec PipelineSpec::from_json(const json& j) {
  try {
    PipelineSpec s;
    s.features = ExtractorConfig::from_json(j.at("features"));
    s.classifier = ClassifierConfig::from_json(j.at("classifier"));
    s.threshold = j.value("threshold", 0.5);
    if (!(s.threshold >= 0.0 && s.threshold <= 1.0))
      throw ConfigError("InvalidConfig", "threshold must lie in [0, 1]");
    return s;
  } catch (const json::exception& e) {
    throw ConfigError("InvalidConfig", e.what());
  }
}

std::string PipelineSpec::fingerprint() const { return fingerprint_of(to_json().dump()); }

json preprocessor_to_json(const Preprocessor& p) {
  json rules = json::array();
  for (const auto& [from, to] : p.lemmas.suffix_rules()) rules.push_back({from, to});
  return {{"tokenizer", {{"lowercase", p.tokenizer.lowercase}, {"min_token_len", p.tokenizer.min_token_len}}},
          {"stopwords", p.stopwords.words()},
          {"lemmas", {{"lexicon", p.lemmas.lexicon()}, {"suffix_rules", rules}}},
          {"fingerprint", p.fingerprint()}};
}

Preprocessor preprocessor_from_json(const json& j) {
  Preprocessor p;
  p.tokenizer.lowercase = j.at("tokenizer").at("lowercase").get<bool>();
  p.tokenizer.min_token_len = j.at("tokenizer").at("min_token_len").get<std::size_t>();
  p.stopwords = textprep::StopwordList(j.at("stopwords").get<std::vector<std::string>>());
  std::vector<std::pair<std::string, std::string>> rules;
  for (const auto& r : j.at("lemmas").at("suffix_rules"))
    rules.emplace_back(r.at(0).get<std::string>(), r.at(1).get<std::string>());
  p.lemmas = textprep::LemmaTable(
      j.at("lemmas").at("lexicon").get<std::map<std::string, std::string>>(), std::move(rules));
  if (j.contains("fingerprint") && j["fingerprint"].get<std::string>() != p.fingerprint())
    throw DataError("FingerprintMismatch", "preprocessing tables do not match their fingerprint");
  return p;
}

TrainedPipeline TrainedPipeline::fit(const PipelineSpec& spec, const Preprocessor& preprocessor,
                                     const std::vector<Tokens>& docs, std::span<const int> y,
                                     std::string data_fingerprint) {
  if (docs.size() != y.size())
    throw DataError("DimensionMismatch", "documents and labels differ in length");
  std::size_t pos = 0;
  for (int v : y) {
    if (v != 0 && v != 1) throw DataError("InvalidLabel", "labels must be 0 or 1");
    pos += static_cast<std::size_t>(v);
  }
  if (pos == 0 || pos == y.size())
    throw DataError("SingleClass", "training labels must contain both classes");

  if (data_fingerprint.empty()) {
    Fingerprint fp;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      fp.add(static_cast<std::uint64_t>(docs[i].size()));
      for (const auto& t : docs[i]) fp.add(t);
      fp.add(static_cast<std::uint64_t>(y[i]));
    }
    data_fingerprint = fp.hex();
  }

  TrainedPipeline tp;
  tp.spec_ = spec;
  tp.preprocessor_ = preprocessor;
  tp.extractor_ = FeatureExtractor::fit(spec.features, docs);
  const auto x = tp.extractor_.transform_all(docs);
  const auto& c = spec.classifier;
  tp.info_.seed = c.seed;
  tp.info_.data_fingerprint = std::move(data_fingerprint);
  tp.info_.n_examples = y.size();
  tp.info_.n_positive = pos;
  switch (c.kind) {
    case ClassifierKind::LogReg: {
      LogRegParams p{c.penalty, c.C, c.class_weight == ClassWeight::None ? ClassWeight::None : ClassWeight::Balanced,
                     c.tol, c.max_iter, c.seed};
      auto m = train_logreg(x, y, p);
      tp.info_.converged = m.converged;
      tp.info_.iterations = m.iterations;
      tp.classifier_ = std::move(m);
      break;
    }
    case ClassifierKind::LinearSvm: {
      auto fit = train_linear_svm(x, y, SvmParams{c.C, c.svm_tol, c.max_epochs, c.seed});
      tp.info_.converged = fit.model.converged;
      tp.info_.iterations = fit.model.iterations;
      tp.classifier_ = std::move(fit.model);
      tp.calibrator_ = fit.calibrator;
      break;
    }
    case ClassifierKind::RandomForest: {
      ForestParams p;
      p.n_estimators = c.n_estimators;
      p.criterion = c.criterion;
      p.class_weight = c.class_weight;
      p.max_features = c.max_features;
      p.seed = c.seed;
      tp.classifier_ = train_random_forest(x, y, p);
      break;
    }
  }
  tp.seal();
  return tp;
}

TrainedPipeline TrainedPipeline::fit_texts(const PipelineSpec& spec, const Preprocessor& preprocessor,
                                           std::span<const std::string> texts, std::span<const int> y) {
  std::vector<Tokens> docs;
  docs.reserve(texts.size());
  for (const auto& t : texts) docs.push_back(preprocessor(t));
  return fit(spec, preprocessor, docs, y);
}

double TrainedPipeline::predict_proba_tokens(const Tokens& tokens) const {
  const auto x = extractor_.transform(tokens);
  double p = 0.0;
  if (const auto* lin = std::get_if<LinearModel>(&classifier_)) {
    p = calibrator_ ? (*calibrator_)(lin->decision(x)) : predict_proba_linear(*lin, x);
  } else {
    p = std::get<Forest>(classifier_).predict_proba(x);
  }
  return std::clamp(p, 0.0, 1.0);
}

double TrainedPipeline::predict_proba(std::string_view text) const {
  return predict_proba_tokens(preprocessor_(text));
}

int TrainedPipeline::classify(std::string_view text) const { return classify_proba(predict_proba(text)); }

namespace {

json classifier_to_json(const Classifier& c) {
  if (const auto* lin = std::get_if<LinearModel>(&c)) {
    return {{"type", "linear"},
            {"weights", lin->weights},
            {"bias", lin->bias},
            {"penalty", to_string(lin->penalty)},
            {"C", lin->C},
            {"class_weight", to_string(lin->class_weight)},
            {"converged", lin->converged},
            {"iterations", lin->iterations}};
  }
  const auto& f = std::get<Forest>(c);
  json trees = json::array();
  for (const auto& t : f.trees) {
    json nodes = json::array();
    for (const auto& n : t.nodes)
      nodes.push_back({n.feature, n.threshold, n.left, n.right, n.weight_neg, n.weight_pos, n.samples});
    trees.push_back(std::move(nodes));
  }
  return {{"type", "forest"},
          {"dim", f.dim},
          {"n_estimators", f.params.n_estimators},
          {"criterion", to_string(f.params.criterion)},
          {"class_weight", to_string(f.params.class_weight)},
          {"max_features", f.params.max_features ? json(*f.params.max_features) : json(nullptr)},
          {"seed", f.params.seed},
          {"trees", trees}};
}

Classifier classifier_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "linear") {
    LinearModel m;
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.penalty = parse_penalty(j.at("penalty").get<std::string>());
    m.C = j.at("C").get<double>();
    m.class_weight = parse_class_weight(j.at("class_weight").get<std::string>());
    m.converged = j.value("converged", true);
    m.iterations = j.value("iterations", std::size_t{0});
    return m;
  }
  if (type != "forest") throw DataError("ParseError", "unknown classifier type '" + type + "'");
  Forest f;
  f.dim = j.at("dim").get<std::size_t>();
  f.params.n_estimators = j.at("n_estimators").get<std::size_t>();
  f.params.criterion = parse_criterion(j.at("criterion").get<std::string>());
  f.params.class_weight = parse_class_weight(j.at("class_weight").get<std::string>());
  if (!j.at("max_features").is_null()) f.params.max_features = j["max_features"].get<std::size_t>();
  f.params.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& t : j.at("trees")) {
    DecisionTree tree;
    for (const auto& n : t) {
      TreeNode node;
      node.feature = n.at(0).get<int>();
      node.threshold = n.at(1).get<double>();
      node.left = n.at(2).get<int>();
      node.right = n.at(3).get<int>();
      node.weight_neg = n.at(4).get<double>();
      node.weight_pos = n.at(5).get<double>();
      node.samples = n.at(6).get<std::size_t>();
      tree.nodes.push_back(node);
    }
    const auto size = static_cast<int>(tree.nodes.size());
    if (size == 0) throw DataError("ParseError", "empty decision tree");
    for (const auto& node : tree.nodes)
      if (!node.is_leaf() && (node.left <= 0 || node.right <= 0 || node.left >= size || node.right >= size))
        throw DataError("ParseError", "decision tree child index out of range");
    f.trees.push_back(std::move(tree));
  }
  return f;
}

}  // namespace

void TrainedPipeline::seal() {
  Fingerprint fp;
  fp.add(spec_.fingerprint()).add(preprocessor_.fingerprint()).add(extractor_.fingerprint());
  fp.add(classifier_to_json(classifier_).dump());
  if (calibrator_) fp.add(calibrator_->A).add(calibrator_->B);
  fp.add(info_.data_fingerprint);
  fingerprint_ = fp.hex();
}

json TrainedPipeline::to_json() const {
  return {{"format", kFormat},
          {"version", kVersion},
          {"fingerprint", fingerprint_},
          {"pipeline", spec_.to_json()},
          {"preprocessing", preprocessor_to_json(preprocessor_)},
          {"extractor", extractor_.to_json()},
          {"classifier", classifier_to_json(classifier_)},
          {"calibrator", calibrator_ ? json{{"A", calibrator_->A}, {"B", calibrator_->B}} : json(nullptr)},
          {"threshold", spec_.threshold},
          {"training",
           {{"seed", info_.seed},
            {"data_fingerprint", info_.data_fingerprint},
            {"n_examples", info_.n_examples},
            {"n_positive", info_.n_positive},
            {"converged", info_.converged},
            {"iterations", info_.iterations}}}};
}

TrainedPipeline TrainedPipeline::from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kFormat)
      throw DataError("UnsupportedFormat", "not a model file");
    if (j.at("version").get<int>() != kVersion)
      throw DataError("UnsupportedVersion", "model version " + j.at("version").dump());
    TrainedPipeline tp;
    tp.spec_ = PipelineSpec::from_json(j.at("pipeline"));
    tp.spec_.threshold = j.at("threshold").get<double>();
    tp.preprocessor_ = preprocessor_from_json(j.at("preprocessing"));
    tp.extractor_ = FeatureExtractor::from_json(j.at("extractor"));
    tp.classifier_ = classifier_from_json(j.at("classifier"));
    if (!j.at("calibrator").is_null())
      tp.calibrator_ = PlattCalibrator{j["calibrator"].at("A").get<double>(), j["calibrator"].at("B").get<double>()};
    const auto& t = j.at("training");
    tp.info_.seed = t.at("seed").get<std::uint64_t>();
    tp.info_.data_fingerprint = t.at("data_fingerprint").get<std::string>();
    tp.info_.n_examples = t.at("n_examples").get<std::size_t>();
    tp.info_.n_positive = t.at("n_positive").get<std::size_t>();
    tp.info_.converged = t.at("converged").get<bool>();
    tp.info_.iterations = t.at("iterations").get<std::size_t>();
    const std::size_t d = tp.extractor_.dim();
    if (const auto* lin = std::get_if<LinearModel>(&tp.classifier_); lin && lin->dim() != d)
      throw DataError("DimensionMismatch", "classifier weights do not match extractor dimension");
    if (const auto* f = std::get_if<Forest>(&tp.classifier_); f && f->dim != d)
      throw DataError("DimensionMismatch", "forest dimension does not match extractor dimension");
    tp.seal();
    if (tp.fingerprint_ != j.at("fingerprint").get<std::string>())
      throw DataError("FingerprintMismatch", "model content does not match its fingerprint");
    return tp;
  } catch (const json::exception& e) {
    throw DataError("ParseError", e.what());
  }
}

void TrainedPipeline::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("IoError", "cannot write " + path.string());
  out << to_json().dump() << '\n';
  if (!out) throw DataError("IoError", "failed writing " + path.string());
}

TrainedPipeline TrainedPipeline::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("IoError", "cannot read " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("ParseError", path.string() + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace debacer::models
