#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "debacer/annotate.hpp"
#include "debacer/corpus.hpp"
#include "debacer/pipeline.hpp"

namespace debacer::annotate {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  // When set, /api/* requires "Authorization: Bearer <token>" or "X-Api-Token".
  std::string token;
  std::optional<std::filesystem::path> static_dir;
  models::PipelineSpec retrain_spec = bootstrap_spec();
  // After a retrain, write model labels for candidates that have no human or
  // reviewed label.
  bool machine_label_on_retrain = false;
  // Rewritten (labels CSV with sources) after every accepted write.
  std::optional<std::filesystem::path> labels_path;
  // One JSON line per accepted write.
  std::optional<std::filesystem::path> audit_path;
  std::size_t context = 1;
  std::size_t default_limit = 20;
};

// HTTP JSON API over an annotation session. Reads run concurrently, label
// writes are serialized, and retraining runs on a background thread; queries
// always use the last completed model.
class AnnotationServer {
 public:
  AnnotationServer(corpus::Corpus corpus, AnnotationState state, ServerConfig config,
                   std::optional<models::TrainedPipeline> model = std::nullopt);
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Returns the bound port. Throws ConfigError("BindFailed").
  int bind();
  // Serves until stop() is called.
  void run();
  void stop();
  // Waits for a running retrain job; false on timeout.
  bool wait_for_retrain(std::chrono::milliseconds timeout);
  std::string model_fingerprint() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace debacer::annotate
