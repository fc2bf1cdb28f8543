#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

namespace factcheck::app {

// Exact-match provider-response cache. The key is the SHA-256 of the
// interface kind plus the canonicalized request (compact dump with sorted
// object keys), so identical requests replay without network I/O and a
// one-character change is a miss. Entries are immutable once written; a
// corrupt entry reads as a miss with a warning on stderr.
class Cache {
 public:
  explicit Cache(std::filesystem::path dir);

  static std::string key_for(const std::string& kind, const nlohmann::json& request);

  std::optional<nlohmann::json> lookup(const std::string& kind,
                                       const nlohmann::json& request) const;
  void store(const std::string& kind, const nlohmann::json& request,
             const nlohmann::json& response) const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

std::string sha256_hex(const std::string& data);

}  // namespace factcheck::app
