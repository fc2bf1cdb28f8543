#include "factcheck/cache.hpp"

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <openssl/evp.h>

#include "factcheck/error.hpp"

namespace factcheck::app {

namespace {

using nlohmann::json;

std::string canonical_request(const std::string& kind, const json& request) {
  // nlohmann objects keep keys sorted; compact dump has no whitespace.
  return kind + "\n" + request.dump();
}

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr)) {
    throw Error(ErrorKind::internal, "sha256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

Cache::Cache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create cache directory: " + dir_.string());
}

std::string Cache::key_for(const std::string& kind, const json& request) {
  return sha256_hex(canonical_request(kind, request));
}

std::optional<json> Cache::lookup(const std::string& kind, const json& request) const {
  const auto path = dir_ / (key_for(kind, request) + ".json");
  std::ifstream in(path);
  if (!in) return std::nullopt;
  json entry = json::parse(in, nullptr, false);
  if (entry.is_discarded() || !entry.is_object() || !entry.contains("response") ||
      !entry.contains("kind") || entry["kind"] != kind || entry["request"] != request) {
    std::cerr << "warning: corrupt cache entry treated as miss: " << path << '\n';
    return std::nullopt;
  }
  return entry["response"];
}

void Cache::store(const std::string& kind, const json& request,
                  const json& response) const {
  const auto path = dir_ / (key_for(kind, request) + ".json");
  if (std::filesystem::exists(path)) return;  // entries are immutable
  // Write-then-rename so concurrent readers never see a partial entry.
  const auto tmp = path.string() + ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write cache entry: " + path.string());
    json entry;
    entry["kind"] = kind;
    entry["request"] = request;
    entry["response"] = response;
    entry["created_at"] = iso8601_now();
    out << entry.dump() << '\n';
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot finalize cache entry: " + path.string());
  }
}

}  // namespace factcheck::app
