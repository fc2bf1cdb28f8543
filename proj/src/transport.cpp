#include "factcheck/transport.hpp"

#include <algorithm>
#include <thread>

#include <httplib.h>

#include "factcheck/error.hpp"

namespace factcheck::app {

namespace {

using nlohmann::json;

// scheme://host[:port] base and the path remainder.
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("endpoint must include a scheme: " + endpoint);
  }
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

RateLimiter::RateLimiter(double requests_per_second) {
  if (requests_per_second > 0.0) {
    min_interval_ = std::chrono::microseconds(
        static_cast<long long>(1e6 / requests_per_second));
  }
  next_allowed_ = std::chrono::steady_clock::now();
}

void RateLimiter::acquire() {
  if (min_interval_.count() == 0) return;
  std::chrono::steady_clock::time_point wake;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    wake = std::max(next_allowed_, now);
    next_allowed_ = wake + min_interval_;
  }
  std::this_thread::sleep_until(wake);
}

HttpTransport::HttpTransport(std::chrono::milliseconds timeout, double rate_limit_per_sec)
    : timeout_(timeout), limiter_(rate_limit_per_sec) {}

json HttpTransport::post_json(const std::string& kind, const std::string& endpoint,
                              const json& body) {
  limiter_.acquire();
  const auto [base, path] = split_endpoint(endpoint);
  httplib::Client client(base);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  client.set_connection_timeout(seconds.count(), 0);
  client.set_read_timeout(seconds.count(), 0);
  client.set_write_timeout(seconds.count(), 0);

  auto result = client.Post(path, body.dump(), "application/json");
  if (!result) {
    throw ProviderError(kind, "transport failure for " + endpoint + ": " +
                                  httplib::to_string(result.error()));
  }
  if (result->status < 200 || result->status >= 300) {
    throw ProviderError(kind, "HTTP " + std::to_string(result->status) + " from " + endpoint);
  }
  json parsed = json::parse(result->body, nullptr, false);
  if (parsed.is_discarded()) {
    throw ProviderError(kind, "non-JSON response from " + endpoint);
  }
  return parsed;
}

CachingTransport::CachingTransport(std::shared_ptr<Transport> inner,
                                   std::shared_ptr<Cache> cache, bool bypass)
    : inner_(std::move(inner)), cache_(std::move(cache)), bypass_(bypass) {}

json CachingTransport::post_json(const std::string& kind, const std::string& endpoint,
                                 const json& body) {
  // The endpoint participates in the cache key so two providers sharing a
  // wire protocol cannot alias.
  json request;
  request["endpoint"] = endpoint;
  request["body"] = body;
  if (!bypass_) {
    if (auto hit = cache_->lookup(kind, request)) {
      hits_.fetch_add(1);
      return *hit;
    }
  }
  misses_.fetch_add(1);
  json response = inner_->post_json(kind, endpoint, body);
  cache_->store(kind, request, response);
  return response;
}

json OfflineTransport::post_json(const std::string& kind, const std::string& endpoint,
                                 const json&) {
  calls_.fetch_add(1);
  throw ProviderError(kind, "offline transport: live call to " + endpoint + " refused");
}

json post_with_retries(Transport& transport, const std::string& kind,
                       const std::string& endpoint, const json& body, int max_retries,
                       std::chrono::milliseconds base_delay) {
  std::chrono::milliseconds delay = base_delay;
  for (int attempt = 0;; ++attempt) {
    try {
      return transport.post_json(kind, endpoint, body);
    } catch (const ProviderError&) {
      if (attempt >= max_retries) throw;
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
}

}  // namespace factcheck::app
