#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

#include "factcheck/cache.hpp"

namespace factcheck::app {

// Enforces a minimum spacing between acquisitions. 0 requests/s = unlimited.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_second = 0.0);
  void acquire();

 private:
  std::chrono::microseconds min_interval_{0};
  std::chrono::steady_clock::time_point next_allowed_;
  std::mutex mutex_;
};

// JSON-over-HTTP request surface shared by every provider adapter. `kind`
// names the interface (search/embed/nli/generate) and participates in cache
// keys; it is not sent on the wire.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual nlohmann::json post_json(const std::string& kind, const std::string& endpoint,
                                   const nlohmann::json& body) = 0;
};

class HttpTransport : public Transport {
 public:
  // rate_limit_per_sec caps live calls through this transport (0 = no cap);
  // cache hits never pass through here, so they spend no budget.
  explicit HttpTransport(std::chrono::milliseconds timeout = std::chrono::milliseconds(30000),
                         double rate_limit_per_sec = 0.0);
  nlohmann::json post_json(const std::string& kind, const std::string& endpoint,
                           const nlohmann::json& body) override;

 private:
  std::chrono::milliseconds timeout_;
  RateLimiter limiter_;
};

// Serves hits from the cache and stores every miss it fetches through the
// inner transport. `bypass` forces live calls (responses are still stored).
class CachingTransport : public Transport {
 public:
  CachingTransport(std::shared_ptr<Transport> inner, std::shared_ptr<Cache> cache,
                   bool bypass = false);
  nlohmann::json post_json(const std::string& kind, const std::string& endpoint,
                           const nlohmann::json& body) override;

  std::size_t hits() const { return hits_.load(); }
  std::size_t misses() const { return misses_.load(); }

 private:
  std::shared_ptr<Transport> inner_;
  std::shared_ptr<Cache> cache_;
  bool bypass_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

// Refuses all network traffic; used for cache-only replays and to prove a
// warm-cache run performs zero live calls.
class OfflineTransport : public Transport {
 public:
  nlohmann::json post_json(const std::string& kind, const std::string& endpoint,
                           const nlohmann::json& body) override;
  std::size_t attempted_calls() const { return calls_.load(); }

 private:
  std::atomic<std::size_t> calls_{0};
};

// Retries on ProviderError with exponential backoff (base_delay, doubled per
// attempt). Non-transport failures are never retried here; structured-output
// problems are handled by parse_generation's null rule instead.
nlohmann::json post_with_retries(Transport& transport, const std::string& kind,
                                 const std::string& endpoint, const nlohmann::json& body,
                                 int max_retries,
                                 std::chrono::milliseconds base_delay =
                                     std::chrono::milliseconds(100));

}  // namespace factcheck::app
