#pragma once

#include <memory>
#include <string>

#include "factcheck/config.hpp"
#include "factcheck/verification.hpp"

namespace factcheck::app {

// JSON-over-HTTP verification service.
//   GET  /health            -> readiness + configured providers
//   POST /generate          -> {claim, backend?, n?} -> question set (or null)
//   POST /verify            -> {claim, method?} -> full audit structure
// Malformed requests answer 400 with a structured error body; provider
// outages answer 502 carrying the failing stage; everything else is 500.
class Service {
 public:
  Service(verification::PipelineProviders providers, verification::PipelineOptions options,
          PipelineConfig config);
  ~Service();

  // Blocking; serves until stop() from another thread.
  void listen(const std::string& host, int port);

  // Binds an ephemeral port and serves on a background thread (tests).
  int start(const std::string& host = "127.0.0.1");
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace factcheck::app
