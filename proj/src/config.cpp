#include "factcheck/config.hpp"

#include <fstream>
#include <set>

#include "factcheck/error.hpp"
#include "factcheck/text.hpp"

namespace factcheck::app {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& context) {
  for (const auto& [key, _] : obj.items()) {
    if (!known.count(key)) {
      throw ValidationError("config: unknown key '" + key + "' in " + context);
    }
  }
}

void require_file(const std::filesystem::path& path, const char* what) {
  if (!std::filesystem::exists(path)) {
    throw ValidationError(std::string("config: ") + what + " does not exist: " +
                          path.string());
  }
}

// ${VAR} occurrences in endpoint strings are replaced from the environment,
// so credentials (API keys in URLs) stay out of config files.
std::string expand_env(const std::string& value) {
  std::string out;
  std::size_t pos = 0;
  while (pos < value.size()) {
    const auto begin = value.find("${", pos);
    if (begin == std::string::npos) {
      out.append(value, pos, std::string::npos);
      break;
    }
    const auto end = value.find('}', begin + 2);
    if (end == std::string::npos) {
      out.append(value, pos, std::string::npos);
      break;
    }
    out.append(value, pos, begin - pos);
    const std::string name = value.substr(begin + 2, end - begin - 2);
    const char* resolved = std::getenv(name.c_str());
    if (!resolved) {
      throw ValidationError("config: environment variable '" + name + "' is not set");
    }
    out += resolved;
    pos = end + 1;
  }
  return out;
}

ProviderEndpoint parse_endpoint(const json& obj, const std::string& context) {
  reject_unknown_keys(obj, {"name", "endpoint", "max_retries", "rate_limit_per_sec"},
                      context);
  ProviderEndpoint endpoint;
  if (!obj.contains("name") || !obj["name"].is_string()) {
    throw ValidationError("config: " + context + " needs a string 'name'");
  }
  if (!obj.contains("endpoint") || !obj["endpoint"].is_string()) {
    throw ValidationError("config: " + context + " needs a string 'endpoint'");
  }
  endpoint.name = obj["name"].get<std::string>();
  endpoint.endpoint = expand_env(obj["endpoint"].get<std::string>());
  if (obj.contains("max_retries")) endpoint.max_retries = obj["max_retries"].get<int>();
  if (endpoint.max_retries < 0) {
    throw ValidationError("config: " + context + " max_retries must be >= 0");
  }
  if (obj.contains("rate_limit_per_sec")) {
    endpoint.rate_limit_per_sec = obj["rate_limit_per_sec"].get<double>();
  }
  if (endpoint.rate_limit_per_sec < 0.0) {
    throw ValidationError("config: " + context + " rate_limit_per_sec must be >= 0");
  }
  return endpoint;
}

questiongen::SamplingConfig parse_sampling(const json& obj) {
  reject_unknown_keys(obj,
                      {"temperature", "top_p", "top_k", "tfs_z", "max_new_tokens",
                       "repetition_penalty"},
                      "sampling");
  questiongen::SamplingConfig defaults;
  return questiongen::SamplingConfig(
      obj.value("temperature", defaults.temperature), obj.value("top_p", defaults.top_p),
      obj.value("top_k", defaults.top_k), obj.value("tfs_z", defaults.tfs_z),
      obj.value("max_new_tokens", defaults.max_new_tokens),
      obj.value("repetition_penalty", defaults.repetition_penalty));
}

json sampling_to_json(const questiongen::SamplingConfig& sampling) {
  json obj;
  obj["temperature"] = sampling.temperature;
  obj["top_p"] = sampling.top_p;
  obj["top_k"] = sampling.top_k;
  obj["tfs_z"] = sampling.tfs_z;
  obj["max_new_tokens"] = sampling.max_new_tokens;
  obj["repetition_penalty"] = sampling.repetition_penalty;
  return obj;
}

}  // namespace

evidence::Blocklist default_blocklist() {
  evidence::Blocklist list;
  for (const char* domain :
       {"politifact.com", "snopes.com", "factcheck.org", "fullfact.org",
        "factcheck.afp.com", "leadstories.com", "checkyourfact.com",
        "truthorfiction.com", "factcheckni.org", "africacheck.org", "faktisk.no",
        "factiverse.ai"}) {
    list.add(domain);
  }
  return list;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  json obj = json::parse(in, nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) {
    throw ParseError("config is not a JSON object: " + path.string());
  }
  reject_unknown_keys(obj,
                      {"backends", "search_providers", "embedding", "nli",
                       "blocklist_path", "use_default_blocklist", "sampling", "top_k",
                       "tie_rule", "vote_weighting", "rank_anchor", "parallelism",
                       "max_results_per_query", "questions_per_claim", "cache_dir",
                       "cache_bypass", "timeout_ms", "template_path", "audit_dir"},
                      "config");

  PipelineConfig config;
  if (obj.contains("backends")) {
    for (const auto& item : obj["backends"]) {
      reject_unknown_keys(item, {"id", "kind", "endpoint", "timeout_ms", "max_retries"},
                          "backend");
      questiongen::GenerationBackend backend;
      backend.id = item.value("id", "");
      if (backend.id.empty()) throw ValidationError("config: backend without id");
      backend.kind = questiongen::parse_backend_kind(item.value("kind", ""));
      backend.endpoint = expand_env(item.value("endpoint", ""));
      if (backend.endpoint.empty()) {
        throw ValidationError("config: backend '" + backend.id + "' without endpoint");
      }
      backend.timeout = std::chrono::milliseconds(item.value("timeout_ms", 30000));
      backend.max_retries = item.value("max_retries", 3);
      for (const auto& existing : config.backends) {
        if (existing.id == backend.id) {
          throw ValidationError("config: duplicate backend id '" + backend.id + "'");
        }
      }
      config.backends.push_back(std::move(backend));
    }
  }
  if (obj.contains("search_providers")) {
    for (const auto& item : obj["search_providers"]) {
      config.search_providers.push_back(parse_endpoint(item, "search provider"));
    }
  }
  if (obj.contains("embedding")) config.embedding = parse_endpoint(obj["embedding"], "embedding");
  if (obj.contains("nli")) config.nli = parse_endpoint(obj["nli"], "nli");
  if (obj.contains("blocklist_path")) {
    config.blocklist_path = std::filesystem::path(obj["blocklist_path"].get<std::string>());
    require_file(*config.blocklist_path, "blocklist");
  }
  if (obj.contains("use_default_blocklist")) {
    config.use_default_blocklist = obj["use_default_blocklist"].get<bool>();
  }
  if (obj.contains("sampling")) config.sampling = parse_sampling(obj["sampling"]);
  if (obj.contains("top_k")) config.top_k = obj["top_k"].get<int>();
  if (config.top_k < 1) throw ValidationError("config: top_k must be >= 1");
  if (obj.contains("tie_rule")) {
    config.tie_rule = verification::parse_tie_rule(obj["tie_rule"].get<std::string>());
  }
  if (obj.contains("vote_weighting")) {
    config.vote_weighting =
        verification::parse_vote_weighting(obj["vote_weighting"].get<std::string>());
  }
  if (obj.contains("rank_anchor")) {
    config.rank_anchor = evidence::parse_rank_anchor(obj["rank_anchor"].get<std::string>());
  }
  if (obj.contains("parallelism")) config.parallelism = obj["parallelism"].get<int>();
  if (config.parallelism < 1) throw ValidationError("config: parallelism must be >= 1");
  if (obj.contains("max_results_per_query")) {
    config.max_results_per_query = obj["max_results_per_query"].get<int>();
  }
  if (obj.contains("questions_per_claim")) {
    config.questions_per_claim = obj["questions_per_claim"].get<int>();
  }
  if (config.questions_per_claim < 1) {
    throw ValidationError("config: questions_per_claim must be >= 1");
  }
  if (obj.contains("cache_dir")) {
    config.cache_dir = std::filesystem::path(obj["cache_dir"].get<std::string>());
  }
  if (obj.contains("cache_bypass")) config.cache_bypass = obj["cache_bypass"].get<bool>();
  if (obj.contains("timeout_ms")) {
    config.timeout = std::chrono::milliseconds(obj["timeout_ms"].get<int>());
  }
  if (obj.contains("template_path")) {
    config.template_path = std::filesystem::path(obj["template_path"].get<std::string>());
    require_file(*config.template_path, "prompt template");
  }
  if (obj.contains("audit_dir")) {
    config.audit_dir = std::filesystem::path(obj["audit_dir"].get<std::string>());
  }
  return config;
}

json PipelineConfig::to_json() const {
  json obj;
  obj["backends"] = json::array();
  for (const auto& backend : backends) {
    obj["backends"].push_back({{"id", backend.id},
                               {"kind", questiongen::backend_kind_name(backend.kind)},
                               {"endpoint", backend.endpoint},
                               {"timeout_ms", backend.timeout.count()},
                               {"max_retries", backend.max_retries}});
  }
  auto endpoint_json = [](const ProviderEndpoint& provider) {
    return json{{"name", provider.name},
                {"endpoint", provider.endpoint},
                {"max_retries", provider.max_retries},
                {"rate_limit_per_sec", provider.rate_limit_per_sec}};
  };
  obj["search_providers"] = json::array();
  for (const auto& provider : search_providers) {
    obj["search_providers"].push_back(endpoint_json(provider));
  }
  if (embedding) obj["embedding"] = endpoint_json(*embedding);
  if (nli) obj["nli"] = endpoint_json(*nli);
  if (blocklist_path) obj["blocklist_path"] = blocklist_path->string();
  obj["use_default_blocklist"] = use_default_blocklist;
  if (sampling) obj["sampling"] = sampling_to_json(*sampling);
  obj["top_k"] = top_k;
  obj["tie_rule"] = verification::tie_rule_name(tie_rule);
  obj["vote_weighting"] = verification::vote_weighting_name(vote_weighting);
  obj["rank_anchor"] = evidence::rank_anchor_name(rank_anchor);
  obj["parallelism"] = parallelism;
  obj["max_results_per_query"] = max_results_per_query;
  obj["questions_per_claim"] = questions_per_claim;
  if (cache_dir) obj["cache_dir"] = cache_dir->string();
  obj["cache_bypass"] = cache_bypass;
  obj["timeout_ms"] = timeout.count();
  if (template_path) obj["template_path"] = template_path->string();
  if (audit_dir) obj["audit_dir"] = audit_dir->string();
  return obj;
}

HttpSearchProvider::HttpSearchProvider(ProviderEndpoint endpoint,
                                       std::shared_ptr<Transport> transport)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport)) {}

std::vector<evidence::SearchResult> HttpSearchProvider::search(const std::string& query,
                                                               int max_results) {
  json body;
  body["query"] = query;
  body["max_results"] = max_results;
  json response = post_with_retries(*transport_, "search:" + endpoint_.name,
                                    endpoint_.endpoint, body, endpoint_.max_retries);
  if (!response.is_object() || !response.contains("results") ||
      !response["results"].is_array()) {
    throw ProviderError(endpoint_.name, "malformed search response (missing results)");
  }
  std::vector<evidence::SearchResult> results;
  for (const auto& item : response["results"]) {
    evidence::SearchResult result;
    result.title = item.value("title", "");
    result.url = item.value("url", "");
    result.snippet = item.value("snippet", "");
    results.push_back(std::move(result));
  }
  return results;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(ProviderEndpoint endpoint,
                                             std::shared_ptr<Transport> transport)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport)) {}

std::vector<std::vector<double>> HttpEmbeddingProvider::embed(
    const std::vector<std::string>& texts) {
  json body;
  body["texts"] = texts;
  json response = post_with_retries(*transport_, "embed:" + endpoint_.name,
                                    endpoint_.endpoint, body, endpoint_.max_retries);
  if (!response.is_object() || !response.contains("embeddings") ||
      !response["embeddings"].is_array()) {
    throw ProviderError(endpoint_.name, "malformed embedding response");
  }
  std::vector<std::vector<double>> vectors;
  for (const auto& item : response["embeddings"]) {
    if (!item.is_array()) throw ProviderError(endpoint_.name, "non-array embedding");
    vectors.push_back(item.get<std::vector<double>>());
  }
  return vectors;
}

HttpNliProvider::HttpNliProvider(ProviderEndpoint endpoint,
                                 std::shared_ptr<Transport> transport)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport)) {}

std::vector<verification::NliOutcome> HttpNliProvider::classify(
    const std::vector<verification::NliInput>& inputs) {
  json pairs = json::array();
  for (const auto& input : inputs) {
    pairs.push_back({{"premise", input.premise}, {"hypothesis", input.hypothesis}});
  }
  json body;
  body["pairs"] = pairs;
  json response = post_with_retries(*transport_, "nli:" + endpoint_.name,
                                    endpoint_.endpoint, body, endpoint_.max_retries);
  if (!response.is_object() || !response.contains("results") ||
      !response["results"].is_array() || response["results"].size() != inputs.size()) {
    throw ProviderError(endpoint_.name, "malformed NLI response");
  }
  static const std::set<std::string> supporting = {"supporting", "supports", "true",
                                                   "entailment"};
  static const std::set<std::string> refuting = {"refuting", "refutes", "false",
                                                 "contradiction"};
  std::vector<verification::NliOutcome> outcomes;
  for (const auto& item : response["results"]) {
    const std::string label = text::lowercase_ascii(item.value("label", ""));
    verification::StanceLabel stance;
    stance.confidence = item.value("score", 1.0);
    if (supporting.count(label)) {
      stance.label = verification::Stance::supporting;
      outcomes.emplace_back(stance);
    } else if (refuting.count(label)) {
      stance.label = verification::Stance::refuting;
      outcomes.emplace_back(stance);
    } else {
      outcomes.emplace_back("unmapped NLI label '" + item.value("label", "") + "'");
    }
  }
  return outcomes;
}

HttpGenerationClient::HttpGenerationClient(questiongen::GenerationBackend backend,
                                           std::shared_ptr<Transport> transport)
    : backend_(std::move(backend)), transport_(std::move(transport)) {}

std::string HttpGenerationClient::generate(
    const std::string& prompt, const std::optional<questiongen::SamplingConfig>& sampling) {
  json body;
  body["prompt"] = prompt;
  if (sampling) {
    body["temperature"] = sampling->temperature;
    body["top_p"] = sampling->top_p;
    body["top_k"] = sampling->top_k;
    body["tfs_z"] = sampling->tfs_z;
    body["max_new_tokens"] = sampling->max_new_tokens;
    body["repetition_penalty"] = sampling->repetition_penalty;
  }
  json response;
  try {
    response = post_with_retries(*transport_, "generate:" + backend_.id, backend_.endpoint,
                                 body, backend_.max_retries);
  } catch (const ProviderError& e) {
    throw ProviderError(backend_.id, e.what());
  }
  if (!response.is_object() || !response.contains("text") || !response["text"].is_string()) {
    throw ProviderError(backend_.id, "malformed generation response (missing text)");
  }
  return response["text"].get<std::string>();
}

BuiltProviders build_providers(const PipelineConfig& config, bool offline) {
  BuiltProviders built;

  if (offline) {
    if (!config.cache_dir) throw ValidationError("offline mode requires a cache_dir");
    built.offline = std::make_shared<OfflineTransport>();
  }
  if (config.cache_dir) built.cache = std::make_shared<Cache>(*config.cache_dir);

  // One transport per endpoint so rate caps and timeouts are per provider;
  // all of them share one cache. Offline swaps every live layer for the same
  // counting transport.
  auto transport_for = [&](std::chrono::milliseconds timeout,
                           double rate_limit) -> std::shared_ptr<Transport> {
    std::shared_ptr<Transport> base =
        offline ? std::static_pointer_cast<Transport>(built.offline)
                : std::make_shared<HttpTransport>(timeout, rate_limit);
    if (!built.cache) return base;
    auto caching = std::make_shared<CachingTransport>(base, built.cache, config.cache_bypass);
    if (!built.caching) built.caching = caching;
    return caching;
  };

  for (const auto& endpoint : config.search_providers) {
    built.providers.search.push_back(std::make_shared<HttpSearchProvider>(
        endpoint, transport_for(config.timeout, endpoint.rate_limit_per_sec)));
  }
  if (config.embedding) {
    built.providers.embedder = std::make_shared<HttpEmbeddingProvider>(
        *config.embedding, transport_for(config.timeout, config.embedding->rate_limit_per_sec));
  }
  if (config.nli) {
    built.providers.nli = std::make_shared<HttpNliProvider>(
        *config.nli, transport_for(config.timeout, config.nli->rate_limit_per_sec));
  }
  for (const auto& backend : config.backends) {
    built.providers.backends[backend.id] = backend;
    built.providers.generators[backend.id] = std::make_shared<HttpGenerationClient>(
        backend, transport_for(backend.timeout, 0.0));
  }
  return built;
}

verification::PipelineOptions build_options(const PipelineConfig& config) {
  verification::PipelineOptions options;
  options.top_k = config.top_k;
  options.tie_rule = config.tie_rule;
  options.vote_weighting = config.vote_weighting;
  options.rank_anchor = config.rank_anchor;
  options.parallelism = config.parallelism;
  options.max_results_per_query = config.max_results_per_query;
  options.questions_per_claim = config.questions_per_claim;
  options.sampling = config.sampling;
  options.audit_dir = config.audit_dir;
  options.blocklist = config.use_default_blocklist ? default_blocklist()
                                                   : evidence::Blocklist{};
  if (config.blocklist_path) {
    const evidence::Blocklist extra = evidence::Blocklist::load(*config.blocklist_path);
    for (const auto& domain : extra.domains()) options.blocklist.add(domain);
  }
  options.prompt = config.template_path ? questiongen::PromptTemplate::load(*config.template_path)
                                        : questiongen::PromptTemplate::builtin_default();
  return options;
}

}  // namespace factcheck::app
