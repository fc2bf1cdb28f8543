#include "factcheck/service.hpp"

#include <thread>

#include <httplib.h>

#include "factcheck/cache.hpp"
#include "factcheck/error.hpp"
#include "factcheck/text.hpp"

namespace factcheck::app {

namespace {

using nlohmann::json;

json error_body(const std::string& message, const char* kind) {
  json body;
  body["error"] = message;
  body["kind"] = kind;
  return body;
}

// Requests carry claim text, not ids; derive a stable id from the content.
datasets::Claim claim_from_text(const std::string& text) {
  datasets::Claim claim;
  claim.text = text;
  claim.id = "adhoc-" + sha256_hex(text).substr(0, 12);
  claim.source = "api";
  return claim;
}

}  // namespace

struct Service::Impl {
  verification::PipelineProviders providers;
  verification::PipelineOptions options;
  PipelineConfig config;
  httplib::Server server;
  std::thread thread;

  Impl(verification::PipelineProviders p, verification::PipelineOptions o, PipelineConfig c)
      : providers(std::move(p)), options(std::move(o)), config(std::move(c)) {
    register_routes();
  }

  void respond_error(httplib::Response& res, const Error& e) {
    switch (e.kind()) {
      case ErrorKind::validation:
      case ErrorKind::parse:
        res.status = 400;
        res.set_content(error_body(e.what(), "validation").dump(), "application/json");
        break;
      case ErrorKind::provider:
      case ErrorKind::retrieval:
      case ErrorKind::verification:
        res.status = 502;
        res.set_content(error_body(e.what(), "provider").dump(), "application/json");
        break;
      default:
        res.status = 500;
        res.set_content(error_body(e.what(), "internal").dump(), "application/json");
        break;
    }
  }

  json parse_request(const httplib::Request& req) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      throw ValidationError("request body must be a JSON object");
    }
    return body;
  }

  std::string required_claim(const json& body) {
    if (!body.contains("claim") || !body["claim"].is_string()) {
      throw ValidationError("request needs a string 'claim'");
    }
    const std::string claim = body["claim"].get<std::string>();
    if (text::trim(claim).empty()) throw ValidationError("claim text is empty");
    return claim;
  }

  void register_routes() {
    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      json body;
      body["status"] = "ok";
      json providers_info;
      providers_info["search"] = json::array();
      for (const auto& provider : providers.search) {
        providers_info["search"].push_back(provider->name());
      }
      providers_info["embedding"] = providers.embedder != nullptr;
      providers_info["nli"] = providers.nli != nullptr;
      providers_info["backends"] = json::array();
      for (const auto& [id, _] : providers.backends) providers_info["backends"].push_back(id);
      body["providers"] = providers_info;
      res.set_content(body.dump(), "application/json");
    });

    server.Post("/generate", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        json body = parse_request(req);
        const auto claim = claim_from_text(required_claim(body));
        std::string backend_id = body.value("backend", "");
        if (backend_id.empty()) {
          if (providers.backends.empty()) {
            throw ValidationError("no generation backends configured");
          }
          backend_id = providers.backends.begin()->first;
        }
        auto backend_it = providers.backends.find(backend_id);
        auto client_it = providers.generators.find(backend_id);
        if (backend_it == providers.backends.end() || client_it == providers.generators.end()) {
          throw ValidationError("unknown backend '" + backend_id + "'");
        }
        const int n = body.value("n", options.questions_per_claim);
        std::optional<questiongen::SamplingConfig> sampling = options.sampling;
        if (!sampling &&
            backend_it->second.kind == questiongen::BackendKind::fine_tuned_seq2seq) {
          sampling = questiongen::SamplingConfig::seq2seq_defaults();
        }
        const auto set = questiongen::generate_questions(
            claim, backend_it->second, *client_it->second, sampling, n, options.prompt);
        json out;
        out["claim_id"] = set.claim_id;
        out["backend"] = set.backend_id;
        out["null"] = set.is_null();
        if (!set.is_null()) out["questions"] = *set.questions;
        res.set_content(out.dump(), "application/json");
      } catch (const Error& e) {
        respond_error(res, e);
      } catch (const std::exception& e) {
        respond_error(res, Error(ErrorKind::internal, e.what()));
      }
    });

    server.Post("/verify", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        json body = parse_request(req);
        const auto claim = claim_from_text(required_claim(body));
        const auto method =
            verification::Method::parse(body.value("method", "claim_only"));
        const auto outcome = verification::verify_claim(claim, method, providers, options);
        res.set_content(verification::outcome_to_json(outcome).dump(), "application/json");
      } catch (const Error& e) {
        respond_error(res, e);
      } catch (const std::exception& e) {
        respond_error(res, Error(ErrorKind::internal, e.what()));
      }
    });
  }
};

Service::Service(verification::PipelineProviders providers,
                 verification::PipelineOptions options, PipelineConfig config)
    : impl_(std::make_unique<Impl>(std::move(providers), std::move(options),
                                   std::move(config))) {}

Service::~Service() { stop(); }

void Service::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw Error(ErrorKind::internal,
                "cannot bind " + host + ":" + std::to_string(port));
  }
}

int Service::start(const std::string& host) {
  const int port = impl_->server.bind_to_any_port(host);
  if (port <= 0) throw Error(ErrorKind::internal, "cannot bind ephemeral port");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace factcheck::app
