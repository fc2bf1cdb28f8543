#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "factcheck/evidence.hpp"
#include "factcheck/questiongen.hpp"
#include "factcheck/transport.hpp"
#include "factcheck/verification.hpp"

namespace factcheck::app {

struct ProviderEndpoint {
  std::string name;
  std::string endpoint;
  int max_retries = 2;
  double rate_limit_per_sec = 0.0;  // live-call cap; 0 = unlimited
};

// Whole-pipeline configuration, loaded from a strict JSON file: unknown keys
// are rejected and referenced files must exist at load time.
struct PipelineConfig {
  std::vector<questiongen::GenerationBackend> backends;
  std::vector<ProviderEndpoint> search_providers;
  std::optional<ProviderEndpoint> embedding;
  std::optional<ProviderEndpoint> nli;
  std::optional<std::filesystem::path> blocklist_path;
  bool use_default_blocklist = true;
  std::optional<questiongen::SamplingConfig> sampling;  // override for all backends
  int top_k = 20;
  verification::TieRule tie_rule = verification::TieRule::higher_mean_confidence;
  verification::VoteWeighting vote_weighting = verification::VoteWeighting::equal;
  evidence::RankAnchor rank_anchor = evidence::RankAnchor::claim;
  int parallelism = 4;
  int max_results_per_query = 10;
  int questions_per_claim = 3;
  std::optional<std::filesystem::path> cache_dir;
  bool cache_bypass = false;
  std::chrono::milliseconds timeout{30000};
  std::optional<std::filesystem::path> template_path;
  std::optional<std::filesystem::path> audit_dir;

  static PipelineConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;  // snapshot persisted with benchmark runs
};

// The domains the blocklist ships with; config files extend (or disable) it.
evidence::Blocklist default_blocklist();

// HTTP adapters over the generic JSON wire protocols. Concrete engines hide
// behind these shapes:
//   search:   {query, max_results} -> {results: [{title, url, snippet}]}
//   embed:    {texts: [..]} -> {embeddings: [[..], ..]}
//   nli:      {pairs: [{premise, hypothesis}, ..]} -> {results: [{label, score}, ..]}
//   generate: {prompt, temperature?, top_p?, top_k?, tfs_z?, max_new_tokens?,
//              repetition_penalty?} -> {text}
class HttpSearchProvider : public evidence::SearchProvider {
 public:
  HttpSearchProvider(ProviderEndpoint endpoint, std::shared_ptr<Transport> transport);
  std::string name() const override { return endpoint_.name; }
  std::vector<evidence::SearchResult> search(const std::string& query,
                                             int max_results) override;

 private:
  ProviderEndpoint endpoint_;
  std::shared_ptr<Transport> transport_;
};

class HttpEmbeddingProvider : public evidence::EmbeddingProvider {
 public:
  HttpEmbeddingProvider(ProviderEndpoint endpoint, std::shared_ptr<Transport> transport);
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

 private:
  ProviderEndpoint endpoint_;
  std::shared_ptr<Transport> transport_;
};

// Maps provider labels onto the binary contract: entailment-flavored labels
// become Supporting, contradiction-flavored become Refuting, anything else
// (neutral included) is dropped per item with a diagnostic.
class HttpNliProvider : public verification::NliProvider {
 public:
  HttpNliProvider(ProviderEndpoint endpoint, std::shared_ptr<Transport> transport);
  std::vector<verification::NliOutcome> classify(
      const std::vector<verification::NliInput>& inputs) override;

 private:
  ProviderEndpoint endpoint_;
  std::shared_ptr<Transport> transport_;
};

class HttpGenerationClient : public questiongen::GenerationClient {
 public:
  HttpGenerationClient(questiongen::GenerationBackend backend,
                       std::shared_ptr<Transport> transport);
  std::string generate(const std::string& prompt,
                       const std::optional<questiongen::SamplingConfig>& sampling) override;

 private:
  questiongen::GenerationBackend backend_;
  std::shared_ptr<Transport> transport_;
};

struct BuiltProviders {
  verification::PipelineProviders providers;
  std::shared_ptr<Cache> cache;               // null when caching disabled
  std::shared_ptr<CachingTransport> caching;  // first caching layer, for counters
  std::shared_ptr<OfflineTransport> offline;  // set in offline mode
};

// Wires the provider graph from config. offline = true swaps the HTTP layer
// for a transport that refuses (and counts) live calls, so a warm cache is
// the only data source.
BuiltProviders build_providers(const PipelineConfig& config, bool offline = false);

// Materializes blocklist, prompt template, and the scalar knobs.
verification::PipelineOptions build_options(const PipelineConfig& config);

}  // namespace factcheck::app
