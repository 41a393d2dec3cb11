#include "debacer/server.hpp"

#include <condition_variable>
#include <fstream>
#include <mutex>
#include <shared_mutex>
#include <thread>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "debacer/errors.hpp"
#include "debacer/partition.hpp"

namespace debacer::annotate {

using nlohmann::json;

namespace {

struct Snapshot {
  std::optional<models::TrainedPipeline> model;
  std::map<SpeechKey, double> scores;

  std::string fingerprint() const { return model ? model->fingerprint() : std::string(); }
};

std::string now_utc() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}",
                     fmt::gmtime(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now())));
}

int http_status(const Error& e) {
  const auto& c = e.code();
  if (c == "Unauthorized") return 401;
  if (c == "UnknownSpeech" || c == "UnknownMinute" || c == "NotFound") return 404;
  if (c == "DowngradeForbidden" || c == "RetrainInProgress") return 409;
  if (c == "NotModeratorSpeech" || c == "InsufficientLabels") return 422;
  return e.error_class() == ErrorClass::Training ? 422 : 400;
}

const char* class_name(ErrorClass c) {
  switch (c) {
    case ErrorClass::Config: return "config";
    case ErrorClass::Data: return "data";
    case ErrorClass::Training: return "training";
  }
  return "data";
}

}  // namespace

struct RetrainJob {
  std::string state = "idle";  // idle, running, succeeded, failed
  std::string started_at, finished_at, error;
  std::string model_fingerprint;
  std::size_t training_labels = 0;

  json to_json() const {
    return {{"state", state},
            {"started_at", started_at.empty() ? json(nullptr) : json(started_at)},
            {"finished_at", finished_at.empty() ? json(nullptr) : json(finished_at)},
            {"error", error.empty() ? json(nullptr) : json(error)},
            {"model_fingerprint", model_fingerprint.empty() ? json(nullptr) : json(model_fingerprint)},
            {"training_labels", training_labels}};
  }
};

struct AnnotationServer::Impl {
  corpus::Corpus corpus;
  ServerConfig config;

  std::shared_mutex state_mu;
  AnnotationState state;

  mutable std::mutex snap_mu;
  std::shared_ptr<const Snapshot> snap;

  std::mutex job_mu;
  std::condition_variable job_cv;
  RetrainJob job;
  std::thread worker;

  httplib::Server http;
  int port = -1;

  std::shared_ptr<const Snapshot> snapshot() const {
    std::lock_guard lk(snap_mu);
    return snap;
  }

  void install(std::shared_ptr<const Snapshot> s) {
    std::lock_guard lk(snap_mu);
    snap = std::move(s);
  }

  void reply(httplib::Response& res, int status, json body) {
    const auto fp = snapshot()->fingerprint();
    body["model_fingerprint"] = fp.empty() ? json(nullptr) : json(fp);
    res.status = status;
    res.set_header("X-Model-Fingerprint", fp.empty() ? "none" : fp);
    res.set_content(body.dump(), "application/json");
  }

  void reply_error(httplib::Response& res, int status, const std::string& cls, const std::string& code,
                   const std::string& message) {
    reply(res, status, {{"error", {{"class", cls}, {"code", code}, {"message", message}}}});
  }

  // Called with the state lock held exclusively.
  void persist(std::size_t first_new_audit) {
    if (config.labels_path) {
      auto tmp = *config.labels_path;
      tmp += ".tmp";
      corpus::write_labels_csv(state.export_rows(), tmp, true);
      std::filesystem::rename(tmp, *config.labels_path);
    }
    if (config.audit_path) {
      std::ofstream out(*config.audit_path, std::ios::app);
      if (!out) throw DataError("WriteFailed", config.audit_path->string());
      for (std::size_t i = first_new_audit; i < state.audit().size(); ++i)
        out << state.audit()[i].to_json().dump() << '\n';
    }
  }

  static json body_of(const httplib::Request& req) {
    try {
      return json::parse(req.body);
    } catch (const json::parse_error& e) {
      throw DataError("InvalidJson", e.what());
    }
  }

  void handle_status(httplib::Response& res) {
    json labels{{"model", 0}, {"human", 0}, {"reviewed", 0}};
    json body;
    {
      std::shared_lock lk(state_mu);
      for (const auto& [k, e] : state.labels()) {
        auto& n = labels[to_string(e.source)];
        n = n.get<int>() + 1;
      }
      body = {{"agenda_label", state.agenda_label()},
              {"candidates", state.candidates().size()},
              {"labels", labels},
              {"audit_entries", state.audit().size()}};
    }
    {
      std::lock_guard lk(job_mu);
      body["retrain"] = job.to_json();
    }
    reply(res, 200, body);
  }

  std::size_t parse_limit(const httplib::Request& req) {
    if (!req.has_param("limit")) return config.default_limit;
    const auto s = req.get_param_value("limit");
    std::size_t used = 0;
    long long v = -1;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
    }
    if (v < 0 || used != s.size()) throw ConfigError("InvalidConfig", fmt::format("limit '{}'", s));
    return static_cast<std::size_t>(v);
  }

  void handle_speeches(const httplib::Request& req, httplib::Response& res) {
    const auto status = parse_queue_status(req.has_param("status") ? req.get_param_value("status") : "unlabeled");
    const auto limit = parse_limit(req);
    const auto s = snapshot();
    json items = json::array();
    std::size_t total = 0;
    {
      std::shared_lock lk(state_mu);
      auto list = list_speeches(state, corpus, s->scores, status, 0, config.context);
      total = list.size();
      if (limit > 0 && list.size() > limit) list.resize(limit);
      for (const auto& sg : list) items.push_back(suggestion_to_json(sg));
    }
    reply(res, 200, {{"status", req.has_param("status") ? req.get_param_value("status") : "unlabeled"},
                     {"total", total},
                     {"items", std::move(items)}});
  }

  void handle_label(const httplib::Request& req, httplib::Response& res) {
    const auto body = body_of(req);
    if (!body.is_object() || !body.contains("key") || !body.contains("label"))
      throw DataError("MissingField", "body needs key and label");
    const auto key = key_from_json(body["key"]);
    if (!body["label"].is_number_integer()) throw DataError("InvalidLabel", "label must be 0 or 1");
    const int label = body["label"].get<int>();
    const auto source = parse_label_source(body.value("source", std::string("human")));
    const auto fp = snapshot()->fingerprint();
    json entry;
    {
      std::unique_lock lk(state_mu);
      const auto first = state.audit().size();
      entry = state.apply_label(key, label, source, fp).to_json();
      persist(first);
    }
    reply(res, 200, {{"audit", entry}});
  }

  void run_retrain(AnnotationState copy) {
    std::shared_ptr<Snapshot> next;
    std::string error;
    try {
      next = std::make_shared<Snapshot>();
      next->model = bootstrap_train(copy, corpus, config.retrain_spec);
      next->scores = score_candidates(copy, corpus, *next->model);
    } catch (const std::exception& e) {
      error = e.what();
    }
    if (error.empty()) {
      install(next);
      if (config.machine_label_on_retrain) {
        try {
          std::unique_lock lk(state_mu);
          const auto first = state.audit().size();
          machine_label(state, corpus, *next->model);
          persist(first);
        } catch (const std::exception& e) {
          error = e.what();
        }
      }
    }
    std::lock_guard lk(job_mu);
    job.finished_at = now_utc();
    job.state = error.empty() ? "succeeded" : "failed";
    job.error = error;
    if (error.empty()) job.model_fingerprint = next->fingerprint();
    job_cv.notify_all();
  }

  void handle_retrain(httplib::Response& res) {
    AnnotationState copy;
    {
      std::shared_lock lk(state_mu);
      copy = state;
    }
    const auto training = copy.training_labels();
    std::size_t count[2] = {0, 0};
    for (const auto& [k, y] : training) ++count[y];
    for (int c = 0; c < 2; ++c)
      if (count[c] < 2)
        throw DataError("InsufficientLabels",
                        fmt::format("class {} has {} human or reviewed labels, need at least 2", c, count[c]));
    json status;
    {
      std::lock_guard lk(job_mu);
      if (job.state == "running") throw TrainingError("RetrainInProgress", "a retrain job is already running");
      if (worker.joinable()) worker.join();
      job = RetrainJob{};
      job.state = "running";
      job.started_at = now_utc();
      job.training_labels = training.size();
      status = job.to_json();
      worker = std::thread([this, copy = std::move(copy)]() mutable { run_retrain(std::move(copy)); });
    }
    reply(res, 202, {{"retrain", status}});
  }

  void handle_partitions(const httplib::Request& req, httplib::Response& res) {
    const auto minute_id = req.path_params.at("minute_id");
    const corpus::Minute* minute = nullptr;
    for (const auto& m : corpus.minutes())
      if (m.minute_id == minute_id) minute = &m;
    if (!minute) throw DataError("UnknownMinute", minute_id);
    const auto s = snapshot();
    std::shared_lock lk(state_mu);
    json items = json::array();
    for (const auto& item : minute->agenda_items) {
      if (item.label != state.agenda_label()) continue;
      std::optional<corpus::PartitionResult> result;
      std::string origin;
      if (s->model) {
        const auto& model = *s->model;
        partition::Classifier c{[&](const corpus::Speech& sp) {
                                  auto it = s->scores.find(corpus::key_of(sp));
                                  return it != s->scores.end() ? it->second : model.predict_proba(sp.text);
                                },
                                model.threshold(), model.fingerprint()};
        result = partition::partition_agenda(item, c);
        origin = "model";
      } else if (auto it = corpus.blocks().find(corpus::key_of(item)); it != corpus.blocks().end()) {
        result = it->second;
        origin = "stored";
      }
      std::map<std::size_t, corpus::Decision> decisions;
      json blocks = json::array(), cuts = json::array();
      if (result) {
        for (const auto& d : result->decisions) decisions[d.index] = d;
        for (const auto& b : result->blocks) blocks.push_back({b.start, b.end});
        for (auto b : partition::boundaries(result->blocks)) cuts.push_back(b);
      }
      json speeches = json::array();
      for (std::size_t i = 0; i < item.speeches.size(); ++i) {
        const auto& sp = item.speeches[i];
        json j{{"index", i},          {"order", sp.order},   {"debater", sp.debater},
               {"is_moderator", sp.is_moderator}, {"text", sp.text}, {"probability", nullptr},
               {"interruption", nullptr}, {"label", nullptr}, {"source", nullptr}};
        if (auto it = decisions.find(i); it != decisions.end()) {
          j["probability"] = it->second.probability;
          j["interruption"] = it->second.interruption;
        }
        if (auto l = state.label_of(corpus::key_of(sp))) {
          j["label"] = l->label;
          j["source"] = to_string(l->source);
        }
        speeches.push_back(std::move(j));
      }
      items.push_back({{"agenda_item", item.label},
                       {"origin", origin.empty() ? json(nullptr) : json(origin)},
                       {"classifier_fingerprint", result ? json(result->classifier_fingerprint) : json(nullptr)},
                       {"blocks", std::move(blocks)},
                       {"boundaries", std::move(cuts)},
                       {"speeches", std::move(speeches)}});
    }
    lk.unlock();
    reply(res, 200, {{"minute_id", minute->minute_id}, {"date", minute->date}, {"items", std::move(items)}});
  }

  void handle_export(httplib::Response& res) {
    std::string csv;
    {
      std::shared_lock lk(state_mu);
      csv = corpus::format_labels_csv(state.export_rows(), true);
    }
    const auto fp = snapshot()->fingerprint();
    res.set_header("X-Model-Fingerprint", fp.empty() ? "none" : fp);
    res.set_header("Content-Disposition", "attachment; filename=\"labels.csv\"");
    res.set_content(csv, "text/csv");
  }

  void handle_audit(const httplib::Request& req, httplib::Response& res) {
    std::size_t since = 0;
    if (req.has_param("since")) {
      try {
        since = std::stoull(req.get_param_value("since"));
      } catch (const std::exception&) {
        throw ConfigError("InvalidConfig", "since must be a non-negative integer");
      }
    }
    json entries = json::array();
    {
      std::shared_lock lk(state_mu);
      for (const auto& e : state.audit())
        if (e.seq > since) entries.push_back(e.to_json());
    }
    reply(res, 200, {{"entries", std::move(entries)}});
  }

  void routes() {
    http.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      if (config.token.empty() || req.path.rfind("/api/", 0) != 0) return httplib::Server::HandlerResponse::Unhandled;
      const auto bearer = req.get_header_value("Authorization");
      if (bearer == "Bearer " + config.token || req.get_header_value("X-Api-Token") == config.token)
        return httplib::Server::HandlerResponse::Unhandled;
      reply_error(res, 401, "config", "Unauthorized", "missing or wrong API token");
      return httplib::Server::HandlerResponse::Handled;
    });
    http.set_exception_handler([this](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        reply_error(res, http_status(e), class_name(e.error_class()), e.code(), e.what());
      } catch (const std::exception& e) {
        reply_error(res, 500, "internal", "InternalError", e.what());
      } catch (...) {
        reply_error(res, 500, "internal", "InternalError", "unknown failure");
      }
    });

    http.Get("/api/status", [this](const httplib::Request&, httplib::Response& res) { handle_status(res); });
    http.Get("/api/speeches", [this](const httplib::Request& q, httplib::Response& r) { handle_speeches(q, r); });
    http.Post("/api/labels", [this](const httplib::Request& q, httplib::Response& r) { handle_label(q, r); });
    http.Post("/api/retrain", [this](const httplib::Request&, httplib::Response& r) { handle_retrain(r); });
    http.Get("/api/partitions/:minute_id",
             [this](const httplib::Request& q, httplib::Response& r) { handle_partitions(q, r); });
    http.Get("/api/export/labels", [this](const httplib::Request&, httplib::Response& r) { handle_export(r); });
    http.Get("/api/audit", [this](const httplib::Request& q, httplib::Response& r) { handle_audit(q, r); });

    if (config.static_dir && !http.set_mount_point("/", config.static_dir->string()))
      throw ConfigError("InvalidConfig", fmt::format("static directory {} not found", config.static_dir->string()));
  }
};

AnnotationServer::AnnotationServer(corpus::Corpus corpus, AnnotationState state, ServerConfig config,
                                   std::optional<models::TrainedPipeline> model)
    : impl_(std::make_unique<Impl>()) {
  impl_->corpus = std::move(corpus);
  impl_->state = std::move(state);
  impl_->config = std::move(config);
  auto snap = std::make_shared<Snapshot>();
  if (model) {
    snap->scores = score_candidates(impl_->state, impl_->corpus, *model);
    snap->model = std::move(model);
    impl_->job.model_fingerprint = snap->fingerprint();
  }
  impl_->snap = std::move(snap);
  impl_->routes();
}

AnnotationServer::~AnnotationServer() {
  stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

int AnnotationServer::bind() {
  const auto& c = impl_->config;
  if (c.port == 0) {
    impl_->port = impl_->http.bind_to_any_port(c.host);
  } else {
    impl_->port = impl_->http.bind_to_port(c.host, c.port) ? c.port : -1;
  }
  if (impl_->port < 0) throw ConfigError("BindFailed", fmt::format("cannot listen on {}:{}", c.host, c.port));
  return impl_->port;
}

void AnnotationServer::run() { impl_->http.listen_after_bind(); }

void AnnotationServer::stop() { impl_->http.stop(); }

bool AnnotationServer::wait_for_retrain(std::chrono::milliseconds timeout) {
  std::unique_lock lk(impl_->job_mu);
  return impl_->job_cv.wait_for(lk, timeout, [this] { return impl_->job.state != "running"; });
}

std::string AnnotationServer::model_fingerprint() const { return impl_->snapshot()->fingerprint(); }

}  // namespace debacer::annotate
