#include "cli.hpp"

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <pthread.h>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

#include "debacer/annotate.hpp"
#include "debacer/corpus.hpp"
#include "debacer/errors.hpp"
#include "debacer/eval.hpp"
#include "debacer/fingerprint.hpp"
#include "debacer/partition.hpp"
#include "debacer/pipeline.hpp"
#include "debacer/search.hpp"
#include "debacer/server.hpp"
#include "debacer/synth.hpp"

#ifndef DEBACER_VERSION
#define DEBACER_VERSION "0.0.0"
#endif

namespace debacer::cli {

using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Common {
  std::uint64_t seed = 42;
  std::size_t threads = 0;
  std::string report;
  std::string agenda_label = "political statements";
};

void add_common(CLI::App* sub, Common& c, bool with_agenda = true) {
  sub->add_option("--seed", c.seed, "Random seed (default 42, or $DEBACER_SEED)")->envname("DEBACER_SEED");
  sub->add_option("--threads", c.threads, "Worker threads, 0 = all cores");
  sub->add_option("--report", c.report, "Write the JSON report here instead of stdout");
  if (with_agenda) sub->add_option("--agenda-label", c.agenda_label, "Agenda item label to work on");
}

void require_file(const std::string& path, const std::string& flag) {
  if (path.empty()) throw ConfigError("MissingOption", fmt::format("{} is required", flag));
  if (!fs::is_regular_file(path)) throw ConfigError("MissingFile", fmt::format("{} {} does not exist", flag, path));
}

void require_value(const std::string& v, const std::string& flag) {
  if (v.empty()) throw ConfigError("MissingOption", fmt::format("{} is required", flag));
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("FileNotFound", p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("ParseError", fmt::format("{}: {}", p.string(), e.what()));
  }
}

void write_text(const fs::path& p, const std::string& s) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("WriteFailed", p.string());
  out << s;
}

std::string now_utc() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}",
                     fmt::gmtime(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now())));
}

// Classifier and feature flags shared by train, cv, search and compare.
struct PipelineFlags {
  std::string spec_path;
  std::string features = "bong";
  std::string classifier = "lr";
  double C = 1.0;
  std::string penalty = "l2";
  std::string class_weight = "none";
  std::size_t svd_k = 0;
  std::size_t n_max = 3;
  std::size_t min_df = 1;
  std::size_t n_estimators = 100;
  std::string criterion = "gini";
  double threshold = 0.5;

  CLI::App* sub = nullptr;

  void add(CLI::App* s) {
    sub = s;
    s->add_option("--spec", spec_path, "Pipeline spec JSON; other pipeline flags override it");
    s->add_option("--features", features, "bow, bong or word2vec");
    s->add_option("--classifier", classifier, "lr, svm or rf");
    s->add_option("--C", C, "Inverse regularization strength");
    s->add_option("--penalty", penalty, "l1 or l2 (lr)");
    s->add_option("--class-weight", class_weight, "none, balanced or balanced_subsample");
    s->add_option("--svd-k", svd_k, "Truncated SVD width for bow/bong, 0 = none");
    s->add_option("--n-max", n_max, "Largest n-gram for bong");
    s->add_option("--min-df", min_df, "Minimum document frequency");
    s->add_option("--n-estimators", n_estimators, "Trees (rf)");
    s->add_option("--criterion", criterion, "gini or entropy (rf)");
    s->add_option("--threshold", threshold, "Decision threshold on the probability");
  }

  bool given(const std::string& flag) const { return sub->count(flag) > 0; }

  models::PipelineSpec build(std::uint64_t seed) const {
    models::PipelineSpec s;
    const bool from_file = !spec_path.empty();
    if (from_file) {
      require_file(spec_path, "--spec");
      auto j = read_json(spec_path);
      s = models::PipelineSpec::from_json(j.contains("spec") ? j["spec"] : j);
    }
    auto use = [&](const std::string& flag) { return !from_file || given(flag); };
    if (use("--features")) s.features.kind = features::parse_feature_kind(features);
    if (use("--classifier")) s.classifier.kind = models::parse_classifier_kind(classifier);
    if (use("--C")) s.classifier.C = C;
    if (use("--penalty")) s.classifier.penalty = models::parse_penalty(penalty);
    if (use("--class-weight")) s.classifier.class_weight = models::parse_class_weight(class_weight);
    if (use("--svd-k")) s.features.svd_k = svd_k > 0 ? std::optional<std::size_t>(svd_k) : std::nullopt;
    if (use("--n-max")) s.features.n_max = n_max;
    if (use("--min-df")) s.features.min_df = min_df;
    if (use("--n-estimators")) s.classifier.n_estimators = n_estimators;
    if (use("--criterion")) s.classifier.criterion = models::parse_criterion(criterion);
    if (use("--threshold")) s.threshold = threshold;
    if (!(s.classifier.C > 0)) throw ConfigError("InvalidConfig", "--C must be positive");
    if (!(s.threshold > 0 && s.threshold < 1)) throw ConfigError("InvalidConfig", "--threshold must be in (0, 1)");
    s.features.seed = seed;
    s.classifier.seed = seed;
    return s;
  }
};

struct DataFlags {
  std::string corpus;
  std::string labels;

  void add(CLI::App* s) {
    s->add_option("--corpus", corpus, "Corpus file (.jsonl or .csv)");
    s->add_option("--labels", labels, "Labels CSV: minute_id,order,label[,source]");
  }

  void check() const {
    require_file(corpus, "--corpus");
    require_file(labels, "--labels");
  }

  eval::Dataset load(const std::string& agenda_label, corpus::Corpus* keep = nullptr) const {
    auto c = corpus::load_corpus(corpus);
    std::map<corpus::SpeechKey, int> y;
    for (const auto& r : corpus::read_labels_csv(labels)) y[r.key] = r.label;
    auto data = eval::make_dataset(c, agenda_label, y);
    if (keep) *keep = std::move(c);
    return data;
  }
};

json dataset_summary(const eval::Dataset& d) {
  return {{"examples", d.size()}, {"positives", d.positives()}, {"fingerprint", d.fingerprint()}};
}

// Shared envelope of every JSON report.
class Report {
 public:
  Report(std::string command, const Common& common) : command_(std::move(command)), common_(common) {
    started_ = now_utc();
  }

  json& config() { return config_; }
  json& result() { return result_; }
  void phase(const std::string& name, double seconds) { timings_[name] = seconds; }

  void emit(std::ostream& out) {
    const double total = std::chrono::duration<double>(Clock::now() - t0_).count();
    timings_["total"] = total;
    json j{{"command", command_},
           {"version", DEBACER_VERSION},
           {"seed", common_.seed},
           {"config", config_},
           {"config_fingerprint", fingerprint_of(config_.dump())},
           {"started_at", started_},
           {"timings", timings_},
           {"result", result_}};
    const auto text = j.dump(2) + "\n";
    if (common_.report.empty())
      out << text;
    else
      write_text(common_.report, text);
  }

 private:
  std::string command_;
  const Common& common_;
  Clock::time_point t0_ = Clock::now();
  std::string started_;
  json config_ = json::object();
  json result_ = json::object();
  json timings_ = json::object();
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// ---------------------------------------------------------------------------

struct IngestCmd {
  Common common;
  std::string input, format, output, labels;
  void add(CLI::App& app) {
    auto* s = app.add_subcommand("ingest", "Validate structured minutes and write a normalized corpus");
    add_common(s, common, false);
    s->add_option("--input", input, "Speech records (.jsonl or .csv)");
    s->add_option("--format", format, "jsonl or csv (default: from the extension)");
    s->add_option("--output", output, "Normalized corpus output path");
    s->add_option("--labels", labels, "Optional labels CSV to validate against the corpus");
  }
  void run(std::ostream& out) {
    require_file(input, "--input");
    require_value(output, "--output");
    Report rep("ingest", common);
    rep.config() = {{"input", input}, {"format", format}, {"output", output}, {"labels", labels}};
    auto t = Clock::now();
    auto c = format.empty() ? corpus::load_corpus(input) : corpus::load_corpus(input, corpus::parse_format(format));
    std::size_t labels_ok = 0;
    if (!labels.empty()) {
      require_file(labels, "--labels");
      const auto rows = corpus::read_labels_csv(labels);
      corpus::apply_labels(c, rows);
      labels_ok = rows.size();
    }
    rep.phase("load", seconds_since(t));
    if (fs::path(output).has_parent_path()) fs::create_directories(fs::path(output).parent_path());
    corpus::save_corpus(c, output, corpus::format_from_path(output));
    std::size_t items = 0, moderators = 0;
    for (const auto& m : c.minutes()) {
      items += m.agenda_items.size();
      for (const auto& it : m.agenda_items)
        for (const auto& s : it.speeches) moderators += s.is_moderator;
    }
    std::ifstream written(output, std::ios::binary);
    std::stringstream ss;
    ss << written.rdbuf();
    rep.result() = {{"minutes", c.minutes().size()},
                    {"agenda_items", items},
                    {"speeches", c.speech_count()},
                    {"moderator_speeches", moderators},
                    {"labels", labels_ok},
                    {"output_fingerprint", fingerprint_of(ss.str())}};
    rep.emit(out);
  }
};

struct SynthCmd {
  Common common;
  std::string output_dir;
  double noise = 0.1;
  std::size_t minutes = 0;
  void add(CLI::App& app) {
    auto* s = app.add_subcommand("synth", "Generate a synthetic corpus with ground-truth labels and blocks");
    add_common(s, common, false);
    s->add_option("--output-dir", output_dir, "Writes corpus.jsonl, labels.csv and blocks.jsonl here");
    s->add_option("--noise", noise, "Per-utterance probability of one content-word swap");
    s->add_option("--minutes", minutes, "Number of minutes (default: the annotated-set shape)");
  }
  void run(std::ostream& out) {
    require_value(output_dir, "--output-dir");
    auto cfg = corpus::annotated_set_config(common.seed, noise);
    if (minutes > 0) cfg.n_minutes = minutes;
    corpus::validate(cfg);
    Report rep("synth", common);
    rep.config() = {{"output_dir", output_dir}, {"noise", noise}, {"minutes", cfg.n_minutes},
                    {"agenda_label", cfg.agenda_label}};
    const auto r = corpus::generate_synthetic(cfg);
    const fs::path dir(output_dir);
    fs::create_directories(dir);
    corpus::save_corpus(r.corpus, dir / "corpus.jsonl", corpus::Format::Jsonl);
    std::vector<corpus::LabelRow> rows;
    std::size_t positives = 0;
    for (const auto& [k, y] : r.truth.labels) {
      rows.push_back({k, y, ""});
      positives += y;
    }
    corpus::write_labels_csv(rows, dir / "labels.csv");
    std::vector<corpus::PartitionResult> blocks;
    for (const auto& [k, b] : r.truth.blocks) blocks.push_back({k, b, "synthetic", {}});
    corpus::write_blocks_jsonl(blocks, dir / "blocks.jsonl");
    json files = json::object();
    for (const char* f : {"corpus.jsonl", "labels.csv", "blocks.jsonl"}) {
      std::ifstream in(dir / f, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      files[f] = fingerprint_of(ss.str());
    }
    rep.result() = {{"minutes", r.corpus.minutes().size()},
                    {"speeches", r.corpus.speech_count()},
                    {"moderator_speeches", r.truth.labels.size()},
                    {"positives", positives},
                    {"agenda_items", r.truth.blocks.size()},
                    {"files", files}};
    rep.emit(out);
  }
};

struct TrainCmd {
  Common common;
  DataFlags data;
  PipelineFlags pipe;
  std::string output;
  void add(CLI::App& app) {
    auto* s = app.add_subcommand("train", "Fit a pipeline on all labeled moderator speeches");
    add_common(s, common);
    data.add(s);
    pipe.add(s);
    s->add_option("--output", output, "Model file (JSON)");
  }
  void run(std::ostream& out) {
    data.check();
    require_value(output, "--output");
    const auto spec = pipe.build(common.seed);
    Report rep("train", common);
    rep.config() = {{"corpus", data.corpus}, {"labels", data.labels}, {"agenda_label", common.agenda_label},
                    {"spec", spec.to_json()}, {"output", output}};
    auto t = Clock::now();
    const auto d = data.load(common.agenda_label);
    rep.phase("load", seconds_since(t));
    t = Clock::now();
    const auto tp = models::TrainedPipeline::fit_texts(spec, textprep::Preprocessor::portuguese(), d.texts, d.y);
    rep.phase("fit", seconds_since(t));
    if (fs::path(output).has_parent_path()) fs::create_directories(fs::path(output).parent_path());
    tp.save(output);
    rep.result() = {{"label", spec.label()},
                    {"spec_fingerprint", spec.fingerprint()},
                    {"model_fingerprint", tp.fingerprint()},
                    {"data", dataset_summary(d)},
                    {"converged", tp.info().converged},
                    {"iterations", tp.info().iterations}};
    rep.emit(out);
  }
};

struct CvCmd {
  Common common;
  DataFlags data;
  PipelineFlags pipe;
  std::size_t k = 5;
  void add(CLI::App& app) {
    auto* s = app.add_subcommand("cv", "Stratified k-fold cross-validation of one pipeline");
    add_common(s, common);
    data.add(s);
    pipe.add(s);
    s->add_option("--k", k, "Number of folds");
  }
  void run(std::ostream& out) {
    data.check();
    const auto spec = pipe.build(common.seed);
    Report rep("cv", common);
    rep.config() = {{"corpus", data.corpus}, {"labels", data.labels}, {"agenda_label", common.agenda_label},
                    {"spec", spec.to_json()}, {"k", k}};
    auto t = Clock::now();
    const auto d = data.load(common.agenda_label);
    const auto folds = eval::stratified_multilabel_kfold(d.debaters, d.y, k, common.seed);
    rep.phase("load", seconds_since(t));
    t = Clock::now();
    const auto cv = eval::run_cv(spec, textprep::Preprocessor::portuguese(), d, folds, common.threads);
    rep.phase("cv", seconds_since(t));
    rep.result() = cv.to_json();
    rep.result()["data"] = dataset_summary(d);
    rep.emit(out);
  }
};

struct SearchCmd {
  Common common;
  DataFlags data;
  PipelineFlags pipe;
  std::string space_path, model_path;
  std::size_t budget = 20, k = 5;
  void add(CLI::App& app) {
    auto* s = app.add_subcommand("search", "Seeded random hyperparameter search scored by cross-validation");
    add_common(s, common);
    data.add(s);
    pipe.add(s);
    s->add_option("--space", space_path, "Search space JSON (default: built-in space for the pipeline)");
    s->add_option("--budget", budget, "Number of trials");
    s->add_option("--k", k, "Number of folds");
    s->add_option("--model", model_path, "Refit the best trial on all data and save it here");
  }
  void run(std::ostream& out) {
    data.check();
    search::ParamSpace space;
    if (!space_path.empty()) {
      require_file(space_path, "--space");
      space = search::ParamSpace::load(space_path);
    } else {
      const auto base = pipe.build(common.seed);
      space = search::default_space(base.features.kind, base.classifier.kind);
      space.base = base;
    }
    space.base.features.seed = common.seed;
    space.base.classifier.seed = common.seed;
    space.validate();
    Report rep("search", common);
    rep.config() = {{"corpus", data.corpus}, {"labels", data.labels}, {"agenda_label", common.agenda_label},
                    {"space", space.to_json()}, {"budget", budget}, {"k", k}, {"model", model_path}};
    auto t = Clock::now();
    const auto d = data.load(common.agenda_label);
    const auto folds = eval::stratified_multilabel_kfold(d.debaters, d.y, k, common.seed);
    rep.phase("load", seconds_since(t));
    t = Clock::now();
    const auto pre = textprep::Preprocessor::portuguese();
    const auto res = search::random_search(space, budget, pre, d, folds, common.seed, common.threads);
    rep.phase("search", seconds_since(t));
    rep.result() = res.to_json();
    if (!model_path.empty()) {
      t = Clock::now();
      const auto tp = search::best_pipeline(res.trials, pre, d);
      tp.save(model_path);
      rep.phase("refit", seconds_since(t));
      rep.result()["best_model_fingerprint"] = tp.fingerprint();
    }
    rep.emit(out);
  }
};

struct CompareCmd {
  Common common;
  DataFlags data;
  PipelineFlags pipe;
  std::vector<std::string> inputs, pipelines;
  std::size_t k = 10;
  double alpha = 0.05;
  void add(CLI::App& app) {
    auto* s = app.add_subcommand("compare", "Rank pipelines over shared folds with Holm-adjusted Wilcoxon tests");
    add_common(s, common);
    data.add(s);
    pipe.add(s);
    s->add_option("--inputs", inputs, "CV reports sharing one fold assignment");
    s->add_option("--pipelines", pipelines, "features/classifier pairs to cross-validate, e.g. bow/lr bong/lr");
    s->add_option("--k", k, "Folds when running --pipelines");
    s->add_option("--alpha", alpha, "Significance level");
  }
  void run(std::ostream& out) {
    if (inputs.empty() == pipelines.empty())
      throw ConfigError("InvalidConfig", "give either --inputs or --pipelines");
    if (!(alpha > 0 && alpha < 1)) throw ConfigError("InvalidConfig", "--alpha must be in (0, 1)");
    Report rep("compare", common);
    std::vector<eval::CvResult> results;
    auto t = Clock::now();
    if (!inputs.empty()) {
      for (const auto& p : inputs) require_file(p, "--inputs");
      rep.config() = {{"inputs", inputs}, {"alpha", alpha}};
      for (const auto& p : inputs) {
        const auto j = read_json(p);
        results.push_back(eval::CvResult::from_json(j.contains("result") ? j["result"] : j));
      }
    } else {
      data.check();
      std::vector<models::PipelineSpec> specs;
      for (const auto& p : pipelines) {
        const auto slash = p.find('/');
        if (slash == std::string::npos) throw ConfigError("InvalidConfig", fmt::format("pipeline '{}' (expected features/classifier)", p));
        auto s = pipe.build(common.seed);
        s.features.kind = features::parse_feature_kind(p.substr(0, slash));
        s.classifier.kind = models::parse_classifier_kind(p.substr(slash + 1));
        specs.push_back(s);
      }
      json spec_json = json::array();
      for (const auto& s : specs) spec_json.push_back(s.to_json());
      rep.config() = {{"corpus", data.corpus}, {"labels", data.labels}, {"agenda_label", common.agenda_label},
                      {"pipelines", spec_json}, {"k", k}, {"alpha", alpha}};
      const auto d = data.load(common.agenda_label);
      const auto folds = eval::stratified_multilabel_kfold(d.debaters, d.y, k, common.seed);
      const auto pre = textprep::Preprocessor::portuguese();
      for (const auto& s : specs) results.push_back(eval::run_cv(s, pre, d, folds, common.threads));
    }
    rep.phase("cv", seconds_since(t));
    const auto cmp = eval::compare_pipelines(results, alpha);
    rep.result() = cmp.to_json();
    auto& listed = rep.result()["pipelines"];
    for (std::size_t i = 0; i < results.size(); ++i) {
      json agg = json::object();
      for (const auto& [name, a] : results[i].aggregates) agg[name] = {{"mean", a.mean}, {"std", a.std}};
      listed[i]["spec_fingerprint"] = results[i].spec_fingerprint;
      listed[i]["aggregates"] = agg;
    }
    rep.emit(out);
  }
};

struct PartitionCmd {
  Common common;
  std::string corpus_path, model, output, truth, text;
  void add(CLI::App& app) {
    auto* s = app.add_subcommand("partition", "Split agenda items into subject blocks with a trained model");
    add_common(s, common);
    s->add_option("--corpus", corpus_path, "Corpus file");
    s->add_option("--model", model, "Trained model file (required)");
    s->add_option("--output", output, "Blocks JSONL output");
    s->add_option("--truth", truth, "Reference blocks JSONL for boundary scores");
    s->add_option("--text", text, "Also write the human-readable report here");
  }
  void run(std::ostream& out) {
    if (model.empty()) throw ConfigError("MissingModel", "partition needs --model (train one with `debacer train`)");
    require_file(model, "--model");
    require_file(corpus_path, "--corpus");
    require_value(output, "--output");
    if (!truth.empty()) require_file(truth, "--truth");
    Report rep("partition", common);
    rep.config() = {{"corpus", corpus_path}, {"model", model}, {"output", output}, {"truth", truth},
                    {"agenda_label", common.agenda_label}};
    auto t = Clock::now();
    auto c = corpus::load_corpus(corpus_path);
    const auto tp = models::TrainedPipeline::load(model);
    rep.phase("load", seconds_since(t));
    t = Clock::now();
    const auto res = partition::partition_corpus(c, partition::from_pipeline(tp), common.agenda_label, common.threads);
    rep.phase("partition", seconds_since(t));
    if (fs::path(output).has_parent_path()) fs::create_directories(fs::path(output).parent_path());
    corpus::write_blocks_jsonl(res.results, output);
    std::size_t blocks = 0;
    for (const auto& r : res.results) blocks += r.blocks.size();
    json errors = json::array();
    for (const auto& e : res.errors)
      errors.push_back({{"minute_id", e.key.minute_id}, {"agenda_item", e.key.agenda_item}, {"message", e.message}});
    rep.result() = {{"model_fingerprint", tp.fingerprint()},
                    {"agenda_items", res.results.size()},
                    {"blocks", blocks},
                    {"errors", errors}};
    if (!truth.empty()) {
      std::map<corpus::AgendaKey, std::vector<corpus::SpeechBlock>> ref;
      for (const auto& r : corpus::read_blocks_jsonl(truth)) ref[r.key] = r.blocks;
      const auto counts = partition::boundary_counts(c, c.blocks(), ref);
      rep.result()["boundaries"] = {{"tp", counts.tp},
                                    {"fp", counts.fp},
                                    {"fn", counts.fn},
                                    {"tn", counts.tn},
                                    {"precision", eval::precision(counts)},
                                    {"recall", eval::recall(counts)},
                                    {"f1", eval::f1_score(counts)}};
    }
    if (!text.empty()) {
      std::string s;
      for (const auto& r : res.results) s += partition::format_report(*c.find_agenda(r.key), r) + "\n";
      write_text(text, s);
    }
    rep.emit(out);
  }
};

struct ReportCmd {
  Common common;
  std::string corpus_path, blocks, minute, output;
  std::size_t excerpt = 80;
  void add(CLI::App& app) {
    auto* s = app.add_subcommand("report", "Print stored partitions as text, one line per block");
    add_common(s, common, false);
    s->add_option("--corpus", corpus_path, "Corpus file");
    s->add_option("--blocks", blocks, "Blocks JSONL");
    s->add_option("--minute", minute, "Only this minute");
    s->add_option("--excerpt", excerpt, "Excerpt length in characters");
    s->add_option("--output", output, "Text output (default stdout)");
  }
  void run(std::ostream& out) {
    require_file(corpus_path, "--corpus");
    require_file(blocks, "--blocks");
    const auto c = corpus::load_corpus(corpus_path);
    std::string text;
    std::size_t items = 0;
    for (const auto& r : corpus::read_blocks_jsonl(blocks)) {
      if (!minute.empty() && r.key.minute_id != minute) continue;
      const auto* item = c.find_agenda(r.key);
      if (!item) throw DataError("UnknownAgendaItem", fmt::format("{}/{}", r.key.minute_id, r.key.agenda_item));
      text += partition::format_report(*item, r, excerpt) + "\n";
      ++items;
    }
    if (!minute.empty() && items == 0) throw DataError("UnknownMinute", minute);
    if (output.empty())
      out << text;
    else
      write_text(output, text);
    if (!common.report.empty()) {
      Report rep("report", common);
      rep.config() = {{"corpus", corpus_path}, {"blocks", blocks}, {"minute", minute}, {"excerpt", excerpt}};
      rep.result() = {{"agenda_items", items}, {"text_fingerprint", fingerprint_of(text)}};
      rep.emit(out);
    }
  }
};

struct ServeCmd {
  Common common;
  annotate::ServerConfig server;
  std::string corpus_path, labels, audit, model, static_dir;
  std::uint16_t port = 8080;
  void add(CLI::App* parent) {
    auto* s = parent->add_subcommand("serve", "Serve the annotation HTTP API until interrupted");
    add_common(s, common);
    s->add_option("--corpus", corpus_path, "Corpus file");
    s->add_option("--labels", labels, "Labels CSV; loaded if present and rewritten after every write");
    s->add_option("--audit", audit, "Append-only audit log (JSONL)");
    s->add_option("--model", model, "Initial model file");
    s->add_option("--host", server.host, "Bind address");
    s->add_option("--port", port, "Port, 0 = any free port");
    s->add_option("--token", server.token, "Static API token")->envname("DEBACER_TOKEN");
    s->add_option("--static-dir", static_dir, "Directory of UI assets served at /");
    s->add_option("--context", server.context, "Speeches of context on each side");
    s->add_flag("--machine-label", server.machine_label_on_retrain, "Write model labels after each retrain");
  }
  void run(std::ostream& out, std::ostream& err) {
    require_file(corpus_path, "--corpus");
    if (!model.empty()) require_file(model, "--model");
    auto c = corpus::load_corpus(corpus_path);
    annotate::AnnotationState state(c, common.agenda_label);
    if (!labels.empty() && fs::exists(labels)) state.import_rows(corpus::read_labels_csv(labels));
    if (!labels.empty()) server.labels_path = labels;
    if (!audit.empty()) server.audit_path = audit;
    if (!static_dir.empty()) server.static_dir = static_dir;
    server.port = port;
    server.retrain_spec = annotate::bootstrap_spec(common.seed);
    std::optional<models::TrainedPipeline> tp;
    if (!model.empty()) tp = models::TrainedPipeline::load(model);

    // SIGINT/SIGTERM are taken synchronously by a watcher thread.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    annotate::AnnotationServer srv(std::move(c), std::move(state), server, std::move(tp));
    const int bound = srv.bind();
    err << fmt::format("listening on http://{}:{}\n", server.host, bound) << std::flush;
    std::thread([&srv, set] {
      int sig = 0;
      sigwait(&set, &sig);
      srv.stop();
    }).detach();
    srv.run();
    Report rep("annotate serve", common);
    rep.config() = {{"corpus", corpus_path}, {"labels", labels}, {"audit", audit}, {"host", server.host},
                    {"port", bound}};
    rep.result() = {{"model_fingerprint", srv.model_fingerprint()}};
    rep.emit(out);
  }
};

struct SampleCmd {
  Common common;
  std::string corpus_path, output;
  std::size_t n = 70;
  void add(CLI::App* parent) {
    auto* s = parent->add_subcommand("sample", "Draw the seed set of moderator speeches for manual labeling");
    add_common(s, common);
    s->add_option("--corpus", corpus_path, "Corpus file");
    s->add_option("--n", n, "Sample size");
    s->add_option("--output", output, "CSV: minute_id,order,debater,text");
  }
  void run(std::ostream& out) {
    require_file(corpus_path, "--corpus");
    require_value(output, "--output");
    const auto c = corpus::load_corpus(corpus_path);
    const annotate::AnnotationState state(c, common.agenda_label);
    const auto keys = annotate::sample_seed_set(state, n, common.seed);
    std::string csv = "minute_id,order,debater,text\n";
    auto quote = [](const std::string& s) {
      std::string q = "\"";
      for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      return q + "\"";
    };
    for (const auto& k : keys) {
      const auto* s = c.find_speech(k);
      csv += fmt::format("{},{},{},{}\n", quote(k.minute_id), k.order, quote(s->debater), quote(s->text));
    }
    write_text(output, csv);
    Report rep("annotate sample", common);
    rep.config() = {{"corpus", corpus_path}, {"n", n}, {"output", output}, {"agenda_label", common.agenda_label}};
    rep.result() = {{"candidates", state.candidates().size()}, {"sampled", keys.size()},
                    {"fingerprint", fingerprint_of(csv)}};
    rep.emit(out);
  }
};

int exit_code(const Error& e) {
  switch (e.error_class()) {
    case ErrorClass::Config: return kExitConfig;
    case ErrorClass::Data: return kExitData;
    case ErrorClass::Training: return kExitTraining;
  }
  return kExitUsage;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Moderated-debate partitioning toolkit", "debacer"};
  app.set_version_flag("--version", DEBACER_VERSION);
  app.set_config("--config", "", "TOML file with option values; command-line flags win");
  app.require_subcommand(1);
  app.fallthrough();  // --config may follow the command name

  IngestCmd ingest;
  SynthCmd synth;
  TrainCmd train;
  CvCmd cv;
  SearchCmd search;
  CompareCmd compare;
  PartitionCmd part;
  ReportCmd report;
  ServeCmd serve;
  SampleCmd sample;
  ingest.add(app);
  synth.add(app);
  auto* ann = app.add_subcommand("annotate", "Annotation workflow");
  ann->require_subcommand(1);
  serve.add(ann);
  sample.add(ann);
  train.add(app);
  cv.add(app);
  search.add(app);
  compare.add(app);
  part.add(app);
  report.add(app);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const auto name = sub->get_name();
    if (name == "ingest") ingest.run(out);
    else if (name == "synth") synth.run(out);
    else if (name == "train") train.run(out);
    else if (name == "cv") cv.run(out);
    else if (name == "search") search.run(out);
    else if (name == "compare") compare.run(out);
    else if (name == "partition") part.run(out);
    else if (name == "report") report.run(out);
    else if (name == "annotate") {
      if (ann->got_subcommand("serve")) serve.run(out, err);
      else sample.run(out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const json::exception& e) {
    err << "error: ParseError: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: FileSystem: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace debacer::cli
