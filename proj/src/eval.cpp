#include "debacer/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string_view>

#include <fmt/format.h>

#include "debacer/errors.hpp"
#include "debacer/fingerprint.hpp"
#include "debacer/parallel.hpp"
#include "debacer/rng.hpp"

namespace debacer::eval {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b)
    throw DataError("LengthMismatch", fmt::format("{} labels but {} predictions", a, b));
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// what() is "code: message"; keep only the message part.
std::string bare_message(const Error& e) {
  std::string_view w = e.what();
  const std::string prefix = e.code() + ": ";
  if (w.substr(0, prefix.size()) == prefix) w.remove_prefix(prefix.size());
  return std::string(w);
}

[[noreturn]] void rethrow_with_context(const Error& e, const std::string& context) {
  const auto msg = context + ": " + bare_message(e);
  switch (e.error_class()) {
    case ErrorClass::Config:
      throw ConfigError(e.code(), msg);
    case ErrorClass::Data:
      throw DataError(e.code(), msg);
    case ErrorClass::Training:
      break;
  }
  throw TrainingError(e.code(), msg);
}

}  // namespace

ConfusionCounts confusion(std::span<const int> y, std::span<const int> predicted) {
  check_lengths(y.size(), predicted.size());
  ConfusionCounts c;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 1)
      (predicted[i] == 1 ? c.tp : c.fn)++;
    else
      (predicted[i] == 1 ? c.fp : c.tn)++;
  }
  return c;
}

double precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp); }
double recall(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }

double f1_score(const ConfusionCounts& c) {
  const double p = precision(c), r = recall(c);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double cross_entropy(std::span<const int> y, std::span<const double> p) {
  check_lengths(y.size(), p.size());
  if (y.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double q = std::clamp(p[i], kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
    sum += y[i] == 1 ? std::log(q) : std::log1p(-q);
  }
  return -sum / static_cast<double>(y.size());
}

double brier_positive(std::span<const int> y, std::span<const double> p) {
  check_lengths(y.size(), p.size());
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 1) continue;
    sum += (1.0 - p[i]) * (1.0 - p[i]);
    ++n;
  }
  if (n == 0) throw DataError("NoPositives", "positive-class Brier score needs a positive example");
  return sum / static_cast<double>(n);
}

MetricReport evaluate(std::span<const int> y, std::span<const double> p, double threshold) {
  check_lengths(y.size(), p.size());
  std::vector<int> pred(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) pred[i] = p[i] >= threshold ? 1 : 0;
  MetricReport r;
  r.counts = confusion(y, pred);
  r.precision = precision(r.counts);
  r.recall = recall(r.counts);
  r.f1 = f1_score(r.counts);
  r.cross_entropy = cross_entropy(y, p);
  r.brier_positive = brier_positive(y, p);
  return r;
}

// ---------------------------------------------------------------------------

std::size_t Dataset::positives() const {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
}

std::string Dataset::fingerprint() const {
  Fingerprint fp;
  fp.add(static_cast<std::uint64_t>(size()));
  for (std::size_t i = 0; i < size(); ++i) {
    fp.add(keys.empty() ? std::string{} : keys[i].minute_id);
    fp.add(static_cast<std::uint64_t>(keys.empty() ? 0 : keys[i].order));
    fp.add(texts[i]).add(debaters.empty() ? std::string{} : debaters[i]);
    fp.add(static_cast<std::uint64_t>(y[i]));
  }
  return fp.hex();
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset d;
  for (auto r : rows) {
    if (!keys.empty()) d.keys.push_back(keys[r]);
    d.texts.push_back(texts[r]);
    if (!debaters.empty()) d.debaters.push_back(debaters[r]);
    d.y.push_back(y[r]);
  }
  return d;
}

Dataset make_dataset(const corpus::Corpus& corpus, const std::string& agenda_label,
                     const std::map<corpus::SpeechKey, int>& labels) {
  Dataset d;
  for (const auto& item : corpus::select_agenda(corpus, agenda_label))
    for (const auto& s : item.speeches) {
      if (!s.is_moderator) continue;
      auto it = labels.find(corpus::key_of(s));
      if (it == labels.end()) continue;
      d.keys.push_back(it->first);
      d.texts.push_back(s.text);
      d.debaters.push_back(s.debater);
      d.y.push_back(it->second);
    }
  return d;
}

Dataset make_dataset(const corpus::Corpus& corpus, const std::string& agenda_label) {
  return make_dataset(corpus, agenda_label, corpus.labels());
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> FoldAssignment::test_indices(std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if (fold[i] == f) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldAssignment::train_indices(std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if (fold[i] != f) out.push_back(i);
  return out;
}

std::string FoldAssignment::fingerprint() const {
  Fingerprint fp;
  fp.add(static_cast<std::uint64_t>(k)).add(seed);
  for (auto f : fold) fp.add(static_cast<std::uint64_t>(f));
  return fp.hex();
}

nlohmann::json FoldAssignment::to_json() const {
  return {{"k", k}, {"seed", seed}, {"fingerprint", fingerprint()}, {"assignment", fold}};
}

FoldAssignment FoldAssignment::from_json(const nlohmann::json& j) {
  FoldAssignment f;
  f.k = j.at("k").get<std::size_t>();
  f.seed = j.at("seed").get<std::uint64_t>();
  f.fold = j.at("assignment").get<std::vector<std::size_t>>();
  for (auto v : f.fold)
    if (v >= f.k) throw DataError("InvalidFolds", fmt::format("fold id {} out of range", v));
  return f;
}

FoldAssignment iterative_stratification(const std::vector<std::vector<std::size_t>>& labels,
                                        std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("InvalidConfig", "k must be at least 2");
  const std::size_t n = labels.size();
  if (n < k)
    throw DataError("TooFewExamples", fmt::format("{} examples for {} folds", n, k));

  std::size_t n_labels = 0;
  for (const auto& ls : labels)
    for (auto l : ls) n_labels = std::max(n_labels, l + 1);

  Rng rng(seed, 0x57a7);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<std::vector<std::size_t>> members(n_labels);
  for (auto i : order)
    for (auto l : labels[i]) members[l].push_back(i);

  const double kd = static_cast<double>(k);
  std::vector<double> capacity(k, static_cast<double>(n) / kd);
  std::vector<std::vector<double>> demand(n_labels);
  std::vector<std::size_t> remaining(n_labels);
  for (std::size_t l = 0; l < n_labels; ++l) {
    remaining[l] = members[l].size();
    demand[l].assign(k, static_cast<double>(members[l].size()) / kd);
  }

  FoldAssignment out;
  out.k = k;
  out.seed = seed;
  out.fold.assign(n, k);
  std::vector<std::size_t> ties;

  auto assign = [&](std::size_t i, std::size_t f) {
    out.fold[i] = f;
    capacity[f] -= 1.0;
    for (auto l : labels[i]) {
      demand[l][f] -= 1.0;
      --remaining[l];
    }
  };
  auto pick = [&](const std::vector<double>* label_demand) {
    ties.clear();
    for (std::size_t f = 0; f < k; ++f) {
      if (ties.empty()) {
        ties.push_back(f);
        continue;
      }
      const auto best = ties.front();
      int cmp = 0;
      if (label_demand) cmp = ((*label_demand)[f] > (*label_demand)[best]) - ((*label_demand)[f] < (*label_demand)[best]);
      if (cmp == 0) cmp = (capacity[f] > capacity[best]) - (capacity[f] < capacity[best]);
      if (cmp > 0) ties.assign(1, f);
      else if (cmp == 0) ties.push_back(f);
    }
    return ties.size() == 1 ? ties[0] : ties[rng.below(ties.size())];
  };

  for (;;) {
    // Rarest label still carrying unassigned examples.
    std::size_t label = n_labels;
    for (std::size_t l = 0; l < n_labels; ++l)
      if (remaining[l] > 0 && (label == n_labels || remaining[l] < remaining[label])) label = l;
    if (label == n_labels) break;
    for (auto i : members[label])
      if (out.fold[i] == k) assign(i, pick(&demand[label]));
  }
  for (auto i : order)
    if (out.fold[i] == k) assign(i, pick(nullptr));
  return out;
}

FoldAssignment stratified_multilabel_kfold(std::span<const std::string> debaters,
                                           std::span<const int> y, std::size_t k,
                                           std::uint64_t seed) {
  if (debaters.size() != y.size())
    throw DataError("LengthMismatch", "debater and label columns differ in length");
  std::map<std::string, std::size_t> ids;
  for (const auto& d : debaters) ids.emplace(d, 0);
  std::size_t next = 0;
  for (auto& [name, id] : ids) id = next++;
  const std::size_t positive_label = next;

  std::vector<std::vector<std::size_t>> labels(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    labels[i].push_back(ids.at(debaters[i]));
    if (y[i] == 1) labels[i].push_back(positive_label);
  }
  return iterative_stratification(labels, k, seed);
}

// ---------------------------------------------------------------------------

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  if (values.empty()) return a;
  const double n = static_cast<double>(values.size());
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(ss / (n - 1.0));
  }
  return a;
}

namespace {

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"f1", "precision", "recall", "cross_entropy",
                                              "brier_positive", "fit_time"};
  return names;
}

double metric_value(const MetricReport& r, const std::string& name) {
  if (name == "f1") return r.f1;
  if (name == "precision") return r.precision;
  if (name == "recall") return r.recall;
  if (name == "cross_entropy") return r.cross_entropy;
  if (name == "brier_positive") return r.brier_positive;
  if (name == "fit_time") return r.fit_time;
  throw ConfigError("UnknownMetric", name);
}

nlohmann::json report_to_json(const MetricReport& r) {
  nlohmann::json j;
  for (const auto& m : metric_names()) j[m] = metric_value(r, m);
  j["counts"] = {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"tn", r.counts.tn}};
  return j;
}

MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  r.f1 = j.at("f1").get<double>();
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.cross_entropy = j.at("cross_entropy").get<double>();
  r.brier_positive = j.at("brier_positive").get<double>();
  r.fit_time = j.value("fit_time", 0.0);
  if (j.contains("counts")) {
    const auto& c = j["counts"];
    r.counts = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(),
                c.at("fn").get<std::size_t>(), c.at("tn").get<std::size_t>()};
  }
  return r;
}

}  // namespace

std::vector<double> CvResult::metric(const std::string& name) const {
  std::vector<double> v;
  for (const auto& r : per_fold) v.push_back(metric_value(r, name));
  return v;
}

nlohmann::json CvResult::to_json() const {
  nlohmann::json folds_json = nlohmann::json::array();
  for (std::size_t f = 0; f < per_fold.size(); ++f) {
    auto j = report_to_json(per_fold[f]);
    j["fold"] = f;
    folds_json.push_back(std::move(j));
  }
  nlohmann::json agg;
  for (const auto& [name, a] : aggregates) agg[name] = {{"mean", a.mean}, {"std", a.std}};
  return {{"format", "debacer-cv"},
          {"version", 1},
          {"label", label},
          {"spec", spec.to_json()},
          {"spec_fingerprint", spec_fingerprint},
          {"data_fingerprint", data_fingerprint},
          {"folds", folds.to_json()},
          {"per_fold", std::move(folds_json)},
          {"aggregates", std::move(agg)},
          {"oof_proba", oof_proba},
          {"total_time", total_time}};
}

CvResult CvResult::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "debacer-cv")
    throw DataError("InvalidReport", "not a cross-validation report");
  CvResult r;
  r.label = j.at("label").get<std::string>();
  r.spec = models::PipelineSpec::from_json(j.at("spec"));
  r.spec_fingerprint = j.at("spec_fingerprint").get<std::string>();
  r.data_fingerprint = j.at("data_fingerprint").get<std::string>();
  r.folds = FoldAssignment::from_json(j.at("folds"));
  for (const auto& f : j.at("per_fold")) r.per_fold.push_back(report_from_json(f));
  for (const auto& [name, a] : j.at("aggregates").items())
    r.aggregates[name] = {a.at("mean").get<double>(), a.at("std").get<double>()};
  r.oof_proba = j.value("oof_proba", std::vector<double>{});
  r.total_time = j.value("total_time", 0.0);
  if (r.per_fold.size() != r.folds.k)
    throw DataError("InvalidReport", "fold count does not match the fold assignment");
  return r;
}

CvResult run_cv_tokens(const models::PipelineSpec& spec, const textprep::Preprocessor& preprocessor,
                       const std::vector<textprep::Tokens>& docs, const Dataset& data,
                       const FoldAssignment& folds, std::size_t threads,
                       const FoldObserver& observer) {
  if (docs.size() != data.size() || folds.fold.size() != data.size())
    throw DataError("LengthMismatch", "documents, labels and fold assignment differ in length");
  const auto t0 = std::chrono::steady_clock::now();
  CvResult out;
  out.spec = spec;
  out.label = spec.label();
  out.spec_fingerprint = spec.fingerprint();
  out.data_fingerprint = data.fingerprint();
  out.folds = folds;
  out.per_fold.resize(folds.k);
  out.oof_proba.assign(data.size(), 0.0);

  parallel_for(
      folds.k,
      [&](std::size_t f) {
        try {
          const auto train = folds.train_indices(f);
          const auto test = folds.test_indices(f);
          if (test.empty()) throw DataError("EmptyFold", "no held-out examples");
          std::vector<textprep::Tokens> train_docs;
          std::vector<int> train_y;
          train_docs.reserve(train.size());
          for (auto i : train) {
            train_docs.push_back(docs[i]);
            train_y.push_back(data.y[i]);
          }
          const auto fit_start = std::chrono::steady_clock::now();
          const auto model = models::TrainedPipeline::fit(spec, preprocessor, train_docs, train_y);
          const double fit_time = seconds_since(fit_start);
          if (observer) observer(f, model);
          std::vector<int> test_y;
          std::vector<double> p;
          for (auto i : test) {
            test_y.push_back(data.y[i]);
            p.push_back(model.predict_proba_tokens(docs[i]));
            out.oof_proba[i] = p.back();
          }
          out.per_fold[f] = evaluate(test_y, p, spec.threshold);
          out.per_fold[f].fit_time = fit_time;
        } catch (const Error& e) {
          rethrow_with_context(e, fmt::format("fold {}", f));
        }
      },
      threads);

  for (const auto& m : metric_names()) {
    const auto v = out.metric(m);
    out.aggregates[m] = aggregate(v);
  }
  out.total_time = seconds_since(t0);
  return out;
}

CvResult run_cv(const models::PipelineSpec& spec, const textprep::Preprocessor& preprocessor,
                const Dataset& data, const FoldAssignment& folds, std::size_t threads,
                const FoldObserver& observer) {
  std::vector<textprep::Tokens> docs;
  docs.reserve(data.size());
  for (const auto& t : data.texts) docs.push_back(preprocessor(t));
  return run_cv_tokens(spec, preprocessor, docs, data, folds, threads, observer);
}

// ---------------------------------------------------------------------------

namespace {

bool nearly_equal(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

// Average ranks (1-based) of values in ascending order; near-equal values tie.
std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i + 1;
    while (j < idx.size() && nearly_equal(v[idx[j]], v[idx[i]])) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) rank[idx[t]] = r;
    i = j;
  }
  return rank;
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  check_lengths(a.size(), b.size());
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!nearly_equal(a[i], b[i])) d.push_back(a[i] - b[i]);

  WilcoxonResult r;
  r.n = d.size();
  if (d.empty()) return r;

  std::vector<double> mag(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) mag[i] = std::abs(d[i]);
  const auto ranks = average_ranks(mag);
  for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0 ? r.w_plus : r.w_minus) += ranks[i];

  const std::size_t n = d.size();
  if (n <= 12) {
    // Doubled ranks are integers, so the null distribution is enumerated exactly.
    std::vector<long> r2(n);
    for (std::size_t i = 0; i < n; ++i) r2[i] = std::lround(2.0 * ranks[i]);
    const long observed = std::lround(2.0 * r.w_plus);
    std::uint64_t le = 0, ge = 0;
    const std::uint64_t total = std::uint64_t{1} << n;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      long s = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (mask >> i & 1) s += r2[i];
      le += s <= observed;
      ge += s >= observed;
    }
    const double tail = static_cast<double>(std::min(le, ge)) / static_cast<double>(total);
    r.p_value = std::min(1.0, 2.0 * tail);
    r.exact = true;
    return r;
  }

  const double nd = static_cast<double>(n);
  const double mean = nd * (nd + 1.0) / 4.0;
  double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0;
  std::vector<double> sorted = mag;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && nearly_equal(sorted[j], sorted[i])) ++j;
    const double t = static_cast<double>(j - i);
    var -= (t * t * t - t) / 48.0;
    i = j;
  }
  const double z = std::max(0.0, std::abs(r.w_plus - mean) - 0.5) / std::sqrt(var);
  r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  r.exact = false;
  return r;
}

std::vector<double> holm_adjust(std::span<const double> p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return p[a] < p[b]; });
  std::vector<double> out(m);
  double running = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double adj = std::min(1.0, static_cast<double>(m - i) * p[idx[i]]);
    running = std::max(running, adj);
    out[idx[i]] = running;
  }
  return out;
}

std::vector<std::vector<std::size_t>> maximal_cliques(const std::vector<std::vector<bool>>& adj) {
  const std::size_t n = adj.size();
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> r;
  // Bron-Kerbosch with pivoting.
  auto bk = [&](auto&& self, std::vector<std::size_t> p, std::vector<std::size_t> x) -> void {
    if (p.empty() && x.empty()) {
      auto c = r;
      std::sort(c.begin(), c.end());
      out.push_back(std::move(c));
      return;
    }
    std::size_t pivot = p.empty() ? x.front() : p.front();
    std::size_t best = 0;
    for (const auto* set : {&p, &x})
      for (auto u : *set) {
        std::size_t deg = 0;
        for (auto v : p) deg += adj[u][v];
        if (deg > best) best = deg, pivot = u;
      }
    const auto candidates = p;
    for (auto v : candidates) {
      if (adj[pivot][v]) continue;
      std::vector<std::size_t> np, nx;
      for (auto u : p)
        if (adj[v][u]) np.push_back(u);
      for (auto u : x)
        if (adj[v][u]) nx.push_back(u);
      r.push_back(v);
      self(self, std::move(np), std::move(nx));
      r.pop_back();
      p.erase(std::find(p.begin(), p.end(), v));
      x.push_back(v);
    }
  };
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  if (n > 0) bk(bk, all, {});
  std::sort(out.begin(), out.end());
  return out;
}

PairwiseComparison compare_pipelines(const std::vector<CvResult>& results, double alpha) {
  if (results.size() < 2)
    throw ConfigError("InvalidConfig", "comparison needs at least two results");
  const auto& folds = results.front().folds;
  for (const auto& r : results)
    if (!(r.folds == folds) || r.per_fold.size() != folds.k)
      throw DataError("MismatchedFolds",
                      fmt::format("'{}' was evaluated on a different fold assignment", r.label));

  const std::size_t m = results.size();
  PairwiseComparison c;
  c.alpha = alpha;
  c.folds_fingerprint = folds.fingerprint();
  std::vector<std::vector<double>> f1(m);
  for (std::size_t i = 0; i < m; ++i) {
    c.labels.push_back(results[i].label);
    f1[i] = results[i].metric("f1");
  }

  c.average_rank.assign(m, 0.0);
  for (std::size_t f = 0; f < folds.k; ++f) {
    std::vector<double> neg(m);
    for (std::size_t i = 0; i < m; ++i) neg[i] = -f1[i][f];
    const auto ranks = average_ranks(neg);
    for (std::size_t i = 0; i < m; ++i) c.average_rank[i] += ranks[i];
  }
  for (auto& r : c.average_rank) r /= static_cast<double>(folds.k);

  c.p_raw.assign(m, std::vector<double>(m, 1.0));
  c.p_adjusted = c.p_raw;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> raw;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const double p = wilcoxon_signed_rank(f1[i], f1[j]).p_value;
      c.p_raw[i][j] = c.p_raw[j][i] = p;
      pairs.emplace_back(i, j);
      raw.push_back(p);
    }
  const auto adj = holm_adjust(raw);
  std::vector<std::vector<bool>> same(m, std::vector<bool>(m, false));
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    const auto [i, j] = pairs[t];
    c.p_adjusted[i][j] = c.p_adjusted[j][i] = adj[t];
    same[i][j] = same[j][i] = adj[t] >= alpha;
  }
  c.cliques = maximal_cliques(same);
  auto mean_rank = [&](const std::vector<std::size_t>& cl) {
    double s = 0.0;
    for (auto i : cl) s += c.average_rank[i];
    return s / static_cast<double>(cl.size());
  };
  std::stable_sort(c.cliques.begin(), c.cliques.end(),
                   [&](const auto& a, const auto& b) { return mean_rank(a) < mean_rank(b); });
  return c;
}

nlohmann::json PairwiseComparison::to_json() const {
  nlohmann::json pipelines = nlohmann::json::array();
  for (std::size_t i = 0; i < labels.size(); ++i)
    pipelines.push_back({{"label", labels[i]}, {"average_rank", average_rank[i]}});
  nlohmann::json cl = nlohmann::json::array();
  for (const auto& c : cliques) {
    nlohmann::json names = nlohmann::json::array();
    for (auto i : c) names.push_back(labels[i]);
    cl.push_back({{"members", c}, {"labels", std::move(names)}});
  }
  return {{"format", "debacer-comparison"},
          {"version", 1},
          {"metric", metric},
          {"alpha", alpha},
          {"folds_fingerprint", folds_fingerprint},
          {"pipelines", std::move(pipelines)},
          {"p_raw", p_raw},
          {"p_adjusted", p_adjusted},
          {"cliques", std::move(cl)}};
}

}  // namespace debacer::eval
