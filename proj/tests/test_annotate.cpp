#include <doctest.h>

#include <json.hpp>

#include <set>
#include <thread>

#include "debacer/annotate.hpp"
#include "debacer/server.hpp"
#include "debacer/synth.hpp"
#include "helpers.hpp"

// after Eigen: <resolv.h> defines _res
#include <httplib.h>

using namespace debacer::annotate;
using nlohmann::json;
using testutil::error_code_of;
namespace corpus = debacer::corpus;

namespace {

struct Fixture {
  corpus::SynthConfig cfg;
  corpus::SynthResult synth;

  explicit Fixture(std::uint64_t seed) : cfg(corpus::annotated_set_config(seed)), synth(corpus::generate_synthetic(cfg)) {}

  AnnotationState state() const { return AnnotationState(synth.corpus, cfg.agenda_label); }

  // Human labels from ground truth for the seed sample.
  void label_seed(AnnotationState& st, std::size_t n = 70, std::uint64_t seed = 42) const {
    for (const auto& k : sample_seed_set(st, n, seed)) st.apply_label(k, synth.truth.labels.at(k), LabelSource::Human);
  }

  SpeechKey first_non_moderator() const {
    for (const auto& m : synth.corpus.minutes())
      for (const auto& item : m.agenda_items)
        for (const auto& s : item.speeches)
          if (!s.is_moderator) return corpus::key_of(s);
    return {};
  }
};

}  // namespace

TEST_CASE("seed sample") {
  Fixture f(42);
  const auto st = f.state();
  CHECK(st.candidates().size() == f.synth.truth.labels.size());
  CHECK(st.candidates().size() >= 560);

  const auto a = sample_seed_set(st, 70, 9);
  const auto b = sample_seed_set(st, 70, 9);
  CHECK(a == b);
  CHECK(std::set<SpeechKey>(a.begin(), a.end()).size() == 70);
  for (const auto& k : a) CHECK(f.synth.corpus.find_speech(k)->is_moderator);
  CHECK(sample_seed_set(st, 70, 10) != a);
  CHECK(error_code_of([&] { sample_seed_set(st, st.candidates().size() + 1, 1); }) == "NotEnoughSpeeches");
  CHECK(sample_seed_set(st, st.candidates().size(), 1).size() == st.candidates().size());
}

TEST_CASE("label precedence and audit log") {
  Fixture f(3);
  auto st = f.state();
  const auto k = st.candidates()[0];

  st.apply_label(k, 1, LabelSource::Model, "fp1");
  st.apply_label(k, 0, LabelSource::Human);  // human over model
  CHECK(st.label_of(k) == LabelEntry{0, LabelSource::Human});
  CHECK(error_code_of([&] { st.apply_label(k, 1, LabelSource::Model); }) == "DowngradeForbidden");
  st.apply_label(k, 1, LabelSource::Human);  // equal precedence overwrites
  st.apply_label(k, 1, LabelSource::Reviewed);
  CHECK(error_code_of([&] { st.apply_label(k, 0, LabelSource::Model); }) == "DowngradeForbidden");
  CHECK(error_code_of([&] { st.apply_label(k, 0, LabelSource::Human); }) == "DowngradeForbidden");
  CHECK(st.label_of(k) == LabelEntry{1, LabelSource::Reviewed});

  REQUIRE(st.audit().size() == 4);
  CHECK(st.audit()[0].model_fingerprint == "fp1");
  CHECK_FALSE(st.audit()[0].previous.has_value());
  CHECK(st.audit()[1].previous == LabelEntry{1, LabelSource::Model});
  for (std::size_t i = 0; i < st.audit().size(); ++i) CHECK(st.audit()[i].seq == i + 1);
  const auto j = st.audit()[3].to_json();
  CHECK(j["source"] == "reviewed");
  CHECK(j["previous"]["source"] == "human");
  CHECK(j["timestamp"].get<std::string>().size() == 20);

  CHECK(error_code_of([&] { st.apply_label(f.first_non_moderator(), 1, LabelSource::Human); }) ==
        "NotModeratorSpeech");
  CHECK(error_code_of([&] { st.apply_label({"nope", 1}, 1, LabelSource::Human); }) == "UnknownSpeech");
  CHECK(error_code_of([&] { st.apply_label(k, 2, LabelSource::Reviewed); }) == "InvalidLabel");
  CHECK(st.audit().size() == 4);

  // model labels stay out of training
  st.apply_label(st.candidates()[1], 1, LabelSource::Model);
  CHECK(st.training_labels().size() == 1);
  CHECK(st.all_labels().size() == 2);
}

TEST_CASE("labels CSV round trip keeps sources") {
  Fixture f(4);
  auto st = f.state();
  st.apply_label(st.candidates()[0], 1, LabelSource::Model);
  st.apply_label(st.candidates()[1], 0, LabelSource::Human);
  st.apply_label(st.candidates()[2], 1, LabelSource::Reviewed);
  testutil::TempDir tmp;
  corpus::write_labels_csv(st.export_rows(), tmp / "labels.csv", true);
  auto back = f.state();
  back.import_rows(corpus::read_labels_csv(tmp / "labels.csv"));
  CHECK(back.labels() == st.labels());

  // files without a source column load as human labels
  corpus::write_labels_csv(st.export_rows(), tmp / "plain.csv", false);
  auto plain = f.state();
  plain.import_rows(corpus::read_labels_csv(tmp / "plain.csv"));
  for (const auto& [k, e] : plain.labels()) CHECK(e.source == LabelSource::Human);
  CHECK(error_code_of([] { parse_label_source("robot"); }) == "InvalidSource");
}

TEST_CASE("bootstrap training") {
  Fixture f(5);
  auto st = f.state();
  CHECK(error_code_of([&] { bootstrap_train(st, f.synth.corpus); }) == "InsufficientLabels");
  for (std::size_t i = 0; i < 10; ++i) st.apply_label(st.candidates()[i], 0, LabelSource::Human);
  CHECK(error_code_of([&] { bootstrap_train(st, f.synth.corpus); }) == "InsufficientLabels");

  // model labels do not count toward the minimum
  std::vector<SpeechKey> positives;
  for (const auto& [k, y] : f.synth.truth.labels)
    if (y == 1) positives.push_back(k);
  st.apply_label(positives[0], 1, LabelSource::Model);
  st.apply_label(positives[1], 1, LabelSource::Model);
  CHECK(error_code_of([&] { bootstrap_train(st, f.synth.corpus); }) == "InsufficientLabels");

  auto seeded = f.state();
  f.label_seed(seeded);
  const auto tp = bootstrap_train(seeded, f.synth.corpus);
  CHECK(tp.spec().classifier.kind == debacer::models::ClassifierKind::RandomForest);
  CHECK(tp.spec().features.kind == debacer::features::FeatureKind::Bow);

  // ten more reviews change the model
  std::size_t added = 0;
  for (const auto& k : seeded.candidates()) {
    if (seeded.label_of(k)) continue;
    seeded.apply_label(k, f.synth.truth.labels.at(k), LabelSource::Reviewed);
    if (++added == 10) break;
  }
  CHECK(bootstrap_train(seeded, f.synth.corpus).fingerprint() != tp.fingerprint());
}

TEST_CASE("suggestions are ordered by uncertainty") {
  Fixture f(6);
  auto st = f.state();
  const auto& c = st.candidates();
  const std::map<SpeechKey, double> scores{{c[0], 0.9}, {c[1], 0.52}, {c[2], 0.1}};
  auto q = suggest(st, f.synth.corpus, scores, 0);
  REQUIRE(q.size() == c.size());
  CHECK(q[0].key == c[1]);
  CHECK(q[0].uncertainty.value() == doctest::Approx(0.02));
  // equal uncertainty keeps corpus order; unscored speeches come last
  CHECK(q[1].key == c[0]);
  CHECK(q[2].key == c[2]);
  CHECK_FALSE(q[3].probability.has_value());

  // context: the speeches on either side in the same agenda item
  const auto where = f.synth.corpus.locate(q[0].key);
  const auto* item = f.synth.corpus.find_agenda(where->first);
  CHECK(q[0].speech == &item->speeches[where->second]);
  if (where->second > 0) {
    REQUIRE(q[0].before.size() == 1);
    CHECK(q[0].before[0] == &item->speeches[where->second - 1]);
  }
  CHECK(suggest(st, f.synth.corpus, scores, 2, 0)[0].before.empty());

  const auto j = suggestion_to_json(q[0]);
  CHECK(j["probability"] == 0.52);
  CHECK(j["label"].is_null());
  CHECK(j["text"] == q[0].speech->text);

  // each accepted human label removes exactly one entry; model labels do not
  const auto before = suggest(st, f.synth.corpus, scores, 0).size();
  st.apply_label(c[5], 0, LabelSource::Model);
  CHECK(suggest(st, f.synth.corpus, scores, 0).size() == before);
  st.apply_label(c[5], 0, LabelSource::Human);
  CHECK(suggest(st, f.synth.corpus, scores, 0).size() == before - 1);
  st.apply_label(c[6], 1, LabelSource::Reviewed);
  CHECK(suggest(st, f.synth.corpus, scores, 0).size() == before - 2);
  CHECK(list_speeches(st, f.synth.corpus, scores, QueueStatus::Labeled, 0).size() == 2);
  CHECK(list_speeches(st, f.synth.corpus, scores, QueueStatus::All, 0).size() == c.size());
  CHECK(error_code_of([] { parse_queue_status("pending"); }) == "InvalidConfig");

  for (const auto& k : c)
    if (!st.label_of(k) || st.label_of(k)->source == LabelSource::Model)
      st.apply_label(k, 0, LabelSource::Human);
  CHECK(suggest(st, f.synth.corpus, scores, 0).empty());
}

TEST_CASE("bootstrap loop converges to ground truth") {
  Fixture f(42);
  auto st = f.state();
  f.label_seed(st);
  int rounds = 0;
  std::size_t corrected = 0;
  while (true) {
    const auto tp = bootstrap_train(st, f.synth.corpus);
    machine_label(st, f.synth.corpus, tp);
    const auto queue = suggest(st, f.synth.corpus, tp, 0);
    if (queue.empty()) break;
    for (std::size_t i = 1; i < queue.size(); ++i) CHECK(*queue[i - 1].uncertainty <= *queue[i].uncertainty);
    // review the 150 least certain model labels against the truth
    for (std::size_t i = 0; i < queue.size() && i < 150; ++i) {
      const auto truth = f.synth.truth.labels.at(queue[i].key);
      corrected += queue[i].current->label != truth;
      st.apply_label(queue[i].key, truth, LabelSource::Reviewed);
    }
    REQUIRE(++rounds < 20);
  }
  MESSAGE("rounds " << rounds << ", model labels corrected " << corrected);
  CHECK(st.all_labels() == f.synth.truth.labels);
  for (const auto& [k, e] : st.labels()) CHECK(e.source != LabelSource::Model);
}

// ---------------------------------------------------------------------------

namespace {

struct Running {
  AnnotationServer server;
  int port;
  std::thread thread;

  Running(corpus::Corpus c, AnnotationState st, ServerConfig cfg)
      : server(std::move(c), std::move(st), std::move(cfg)), port(server.bind()), thread([this] { server.run(); }) {}
  ~Running() {
    server.stop();
    thread.join();
  }

  httplib::Client client(const std::string& token = "secret") const {
    httplib::Client cli("127.0.0.1", port);
    if (!token.empty()) cli.set_default_headers({{"Authorization", "Bearer " + token}});
    return cli;
  }
};

json post_label(httplib::Client& cli, const SpeechKey& k, int label, const std::string& source, int& status) {
  const json body{{"key", key_to_json(k)}, {"label", label}, {"source", source}};
  auto r = cli.Post("/api/labels", body.dump(), "application/json");
  REQUIRE(r);
  status = r->status;
  return json::parse(r->body);
}

}  // namespace

TEST_CASE("HTTP API") {
  Fixture f(42);
  testutil::TempDir tmp;
  testutil::write_text(tmp / "index.html", "<html>review</html>");
  ServerConfig cfg;
  cfg.port = 0;
  cfg.token = "secret";
  cfg.static_dir = tmp.path();
  cfg.labels_path = tmp / "labels.csv";
  cfg.audit_path = tmp / "audit.jsonl";
  Running run(f.synth.corpus, f.state(), cfg);
  auto cli = run.client();

  SUBCASE("token") {
    auto anon = run.client("");
    auto r = anon.Get("/api/status");
    REQUIRE(r);
    CHECK(r->status == 401);
    CHECK(json::parse(r->body)["error"]["code"] == "Unauthorized");
    auto r2 = anon.Get("/api/status", {{"X-Api-Token", "secret"}});
    CHECK(r2->status == 200);
    auto page = anon.Get("/index.html");  // static assets need no token
    REQUIRE(page);
    CHECK(page->body == "<html>review</html>");
  }

  SUBCASE("full session") {
    auto r = cli.Get("/api/status");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(r->get_header_value("X-Model-Fingerprint") == "none");
    auto j = json::parse(r->body);
    CHECK(j["model_fingerprint"].is_null());
    CHECK(j["candidates"] == f.synth.truth.labels.size());
    CHECK(j["retrain"]["state"] == "idle");

    r = cli.Get("/api/speeches?status=unlabeled&limit=5");
    j = json::parse(r->body);
    CHECK(j["items"].size() == 5);
    CHECK(j["total"] == f.synth.truth.labels.size());
    CHECK(j["items"][0]["probability"].is_null());
    CHECK(j["items"][0].contains("context"));
    CHECK(cli.Get("/api/speeches?limit=x")->status == 400);
    CHECK(cli.Get("/api/speeches?status=bogus")->status == 400);

    // retrain before any labels
    r = cli.Post("/api/retrain");
    CHECK(r->status == 422);
    CHECK(json::parse(r->body)["error"]["code"] == "InsufficientLabels");

    int status = 0;
    auto st = f.state();
    const auto seed = sample_seed_set(st, 70, 42);
    std::set<SpeechKey> taken(seed.begin(), seed.end());
    for (const auto& k : seed) {
      post_label(cli, k, f.synth.truth.labels.at(k), "human", status);
      CHECK(status == 200);
    }
    SpeechKey k0;
    for (const auto& k : st.candidates())
      if (!taken.count(k)) {
        k0 = k;
        break;
      }
    taken.insert(k0);
    j = post_label(cli, k0, 1, "reviewed", status);
    CHECK(status == 200);
    CHECK(j["audit"]["seq"] == 71);
    post_label(cli, k0, 0, "human", status);
    CHECK(status == 409);
    j = post_label(cli, f.first_non_moderator(), 0, "human", status);
    CHECK(status == 422);
    CHECK(j["error"]["code"] == "NotModeratorSpeech");
    post_label(cli, {"missing", 3}, 0, "human", status);
    CHECK(status == 404);
    post_label(cli, k0, 1, "oracle", status);
    CHECK(status == 400);
    CHECK(cli.Post("/api/labels", "{not json", "application/json")->status == 400);
    CHECK(cli.Post("/api/labels", R"({"label":1})", "application/json")->status == 400);

    j = json::parse(cli.Get("/api/speeches?status=labeled&limit=0")->body);
    CHECK(j["total"] == 71);
    CHECK(json::parse(cli.Get("/api/speeches?limit=0")->body)["total"] == f.synth.truth.labels.size() - 71);

    r = cli.Post("/api/retrain");
    CHECK(r->status == 202);
    CHECK(json::parse(r->body)["retrain"]["training_labels"] == 71);
    REQUIRE(run.server.wait_for_retrain(std::chrono::seconds(60)));
    const auto fp = run.server.model_fingerprint();
    CHECK_FALSE(fp.empty());
    r = cli.Get("/api/status");
    CHECK(r->get_header_value("X-Model-Fingerprint") == fp);
    j = json::parse(r->body);
    CHECK(j["retrain"]["state"] == "succeeded");
    CHECK(j["model_fingerprint"] == fp);

    j = json::parse(cli.Get("/api/speeches?limit=50")->body);
    REQUIRE(j["items"].size() == 50);
    for (std::size_t i = 1; i < 50; ++i)
      CHECK(j["items"][i - 1]["uncertainty"].get<double>() <= j["items"][i]["uncertainty"].get<double>());

    // partitions under the current model
    const auto minute = f.synth.corpus.minutes()[0].minute_id;
    r = cli.Get("/api/partitions/" + minute);
    CHECK(r->status == 200);
    j = json::parse(r->body);
    CHECK(j["minute_id"] == minute);
    REQUIRE_FALSE(j["items"].empty());
    const auto& item = j["items"][0];
    CHECK(item["origin"] == "model");
    CHECK(item["classifier_fingerprint"] == fp);
    CHECK(item["boundaries"].size() + 1 == item["blocks"].size());
    for (const auto& s : item["speeches"]) CHECK(s["probability"].is_null() != s["is_moderator"].get<bool>());
    CHECK(cli.Get("/api/partitions/no-such-minute")->status == 404);

    // a second retrain reflects new reviews
    std::size_t added = 0;
    for (const auto& k : st.candidates()) {
      if (taken.count(k)) continue;
      post_label(cli, k, f.synth.truth.labels.at(k), "reviewed", status);
      CHECK(status == 200);
      if (++added == 10) break;
    }
    CHECK(cli.Post("/api/retrain")->status == 202);
    REQUIRE(run.server.wait_for_retrain(std::chrono::seconds(60)));
    CHECK(run.server.model_fingerprint() != fp);

    r = cli.Get("/api/export/labels");
    CHECK(r->status == 200);
    CHECK(r->get_header_value("X-Model-Fingerprint") == run.server.model_fingerprint());
    const auto rows = corpus::parse_labels_csv(r->body);
    CHECK(rows.size() == 81);
    CHECK(rows == corpus::read_labels_csv(tmp / "labels.csv"));

    j = json::parse(cli.Get("/api/audit")->body);
    const auto entries = j["entries"].size();
    CHECK(entries == 81);
    CHECK(json::parse(cli.Get("/api/audit?since=80")->body)["entries"].size() == 1);
    std::size_t lines = 0;
    for (char c : testutil::read_text(tmp / "audit.jsonl")) lines += c == '\n';
    CHECK(lines == entries);
  }
}

TEST_CASE("HTTP server serves stored partitions without a model") {
  Fixture f(8);
  auto c = f.synth.corpus;
  for (const auto& [key, blocks] : f.synth.truth.blocks) corpus::save_blocks(c, {key, blocks, "truth", {}});
  ServerConfig cfg;
  cfg.port = 0;
  Running run(c, AnnotationState(c, f.cfg.agenda_label), cfg);
  httplib::Client cli("127.0.0.1", run.port);
  const auto minute = c.minutes()[0].minute_id;
  auto j = json::parse(cli.Get("/api/partitions/" + minute)->body);
  REQUIRE_FALSE(j["items"].empty());
  CHECK(j["items"][0]["origin"] == "stored");
  CHECK(j["items"][0]["classifier_fingerprint"] == "truth");

  ServerConfig bad;
  bad.port = 0;
  bad.static_dir = "/nonexistent/dir";
  CHECK(error_code_of([&] { AnnotationServer(c, AnnotationState(c, f.cfg.agenda_label), bad); }) == "InvalidConfig");
}
