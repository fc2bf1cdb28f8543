#include "factcheck/evidence.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "factcheck/error.hpp"
#include "factcheck/text.hpp"

namespace factcheck::evidence {

namespace {

bool is_host_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-';
}

}  // namespace

std::string url_host(std::string_view url) {
  const auto scheme_end = url.find("://");
  std::string_view rest = scheme_end == std::string_view::npos
                              ? url
                              : url.substr(scheme_end + 3);
  std::size_t end = 0;
  while (end < rest.size() && rest[end] != '/' && rest[end] != '?' && rest[end] != '#' &&
         rest[end] != ':') {
    ++end;
  }
  std::string host = text::lowercase_ascii(rest.substr(0, end));
  for (char c : host) {
    if (!is_host_char(c)) return "";
  }
  return host;
}

bool url_is_valid(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos || scheme_end == 0) return false;
  for (char c : url.substr(0, scheme_end)) {
    if (!std::isalpha(static_cast<unsigned char>(c))) return false;
  }
  return !url_host(url).empty();
}

Blocklist Blocklist::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open blocklist: " + path.string());
  Blocklist list;
  std::string line;
  while (std::getline(in, line)) {
    const std::string entry = text::trim(line);
    if (entry.empty() || entry[0] == '#') continue;
    list.add(entry);
  }
  return list;
}

void Blocklist::add(std::string_view domain) {
  std::string entry = text::lowercase_ascii(text::trim(domain));
  if (entry.empty()) throw ValidationError("blocklist: empty domain");
  if (entry.find("://") != std::string::npos || entry.find('/') != std::string::npos) {
    throw ValidationError("blocklist: entry must be a bare domain: " + entry);
  }
  for (char c : entry) {
    if (!is_host_char(c)) {
      throw ValidationError("blocklist: invalid character in domain: " + entry);
    }
  }
  if (std::find(domains_.begin(), domains_.end(), entry) == domains_.end()) {
    domains_.push_back(entry);
  }
}

bool Blocklist::blocks_host(std::string_view host) const {
  for (const auto& domain : domains_) {
    if (host == domain) return true;
    if (host.size() > domain.size() &&
        host.compare(host.size() - domain.size(), domain.size(), domain) == 0 &&
        host[host.size() - domain.size() - 1] == '.') {
      return true;  // subdomain of a blocked registrable domain
    }
  }
  return false;
}

bool Blocklist::blocks_url(const std::string& url) const {
  const std::string host = url_host(url);
  return !host.empty() && blocks_host(host);
}

std::vector<SearchQuery> build_queries(const datasets::Claim& claim,
                                       const questiongen::GeneratedQuestionSet* questions) {
  if (questions == nullptr || questions->is_null()) {
    return build_queries(claim, std::vector<std::string>{});
  }
  return build_queries(claim, *questions->questions);
}

std::vector<SearchQuery> build_queries(const datasets::Claim& claim,
                                       const std::vector<std::string>& questions) {
  std::vector<SearchQuery> queries;
  queries.push_back({claim.text, std::nullopt});
  for (std::size_t i = 0; i < questions.size(); ++i) {
    queries.push_back({questions[i], i});
  }
  return queries;
}

std::vector<EvidenceSnippet> search_all(
    const std::vector<SearchQuery>& queries,
    const std::vector<std::shared_ptr<SearchProvider>>& providers,
    const Blocklist& blocklist, int max_results_per_query, int parallelism,
    SearchDiagnostics* diagnostics) {
  if (providers.empty()) throw ValidationError("search_all: no providers configured");
  if (queries.empty()) throw ValidationError("search_all: no queries");
  if (parallelism < 1) parallelism = 1;

  struct Slot {
    std::vector<SearchResult> results;
    std::string error;
    bool failed = false;
  };
  // One slot per (query, provider); merge order is fixed by index, never by
  // completion order.
  const std::size_t n_slots = queries.size() * providers.size();
  std::vector<Slot> slots(n_slots);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t slot = next.fetch_add(1); slot < n_slots; slot = next.fetch_add(1)) {
      const std::size_t query_index = slot / providers.size();
      const std::size_t provider_index = slot % providers.size();
      try {
        slots[slot].results = providers[provider_index]->search(queries[query_index].text,
                                                                max_results_per_query);
      } catch (const std::exception& e) {
        slots[slot].failed = true;
        slots[slot].error = e.what();
      }
    }
  };

  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(parallelism), n_slots);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  SearchDiagnostics local;
  SearchDiagnostics& diag = diagnostics ? *diagnostics : local;
  diag.requests_attempted += n_slots;

  std::vector<EvidenceSnippet> merged;
  std::unordered_set<std::string> seen;
  std::size_t failures = 0;
  for (std::size_t query_index = 0; query_index < queries.size(); ++query_index) {
    for (std::size_t provider_index = 0; provider_index < providers.size();
         ++provider_index) {
      const Slot& slot = slots[query_index * providers.size() + provider_index];
      if (slot.failed) {
        ++failures;
        diag.failures.push_back({providers[provider_index]->name(),
                                 queries[query_index].text, slot.error});
        continue;
      }
      ++diag.requests_succeeded;
      for (const auto& result : slot.results) {
        if (text::trim(result.snippet).empty() || !url_is_valid(result.url)) continue;
        if (blocklist.blocks_url(result.url)) {
          ++diag.snippets_blocked;
          continue;
        }
        const std::string key = result.url + "\x1f" + text::normalize_whitespace(result.snippet);
        if (!seen.insert(key).second) {
          ++diag.snippets_deduped;
          continue;
        }
        EvidenceSnippet snippet;
        snippet.text = result.snippet;
        snippet.url = result.url;
        snippet.title = result.title;
        snippet.provider = providers[provider_index]->name();
        snippet.query_origin = queries[query_index];
        merged.push_back(std::move(snippet));
      }
    }
  }

  if (failures == n_slots) {
    throw RetrievalError("all providers failed for all queries (" +
                         std::to_string(failures) + " requests)");
  }
  return merged;
}

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.size() != v.size()) {
    throw ComputationError("cosine_similarity: dimension mismatch (" +
                           std::to_string(u.size()) + " vs " + std::to_string(v.size()) +
                           ")");
  }
  if (u.empty()) throw ComputationError("cosine_similarity: empty vectors");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw ComputationError("cosine_similarity: zero-norm vector");
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

std::string rank_anchor_name(RankAnchor anchor) {
  return anchor == RankAnchor::claim ? "claim" : "origin_query";
}

RankAnchor parse_rank_anchor(std::string_view name) {
  if (name == "claim") return RankAnchor::claim;
  if (name == "origin_query") return RankAnchor::origin_query;
  throw ValidationError("unknown rank anchor '" + std::string(name) + "'");
}

std::vector<EvidenceSnippet> embed_and_rank(const datasets::Claim& claim,
                                            std::vector<EvidenceSnippet> snippets,
                                            EmbeddingProvider& embedder, int k,
                                            RankAnchor anchor) {
  if (k < 1) throw ValidationError("embed_and_rank: k must be >= 1");
  if (snippets.empty()) return snippets;

  // Anchor text per snippet: the claim, or the query that retrieved it.
  std::vector<std::string> anchor_texts = {claim.text};
  std::vector<std::size_t> anchor_index(snippets.size(), 0);
  if (anchor == RankAnchor::origin_query) {
    std::unordered_map<std::string, std::size_t> index_of;
    index_of[claim.text] = 0;
    for (std::size_t i = 0; i < snippets.size(); ++i) {
      const std::string& query = snippets[i].query_origin.text.empty()
                                     ? claim.text
                                     : snippets[i].query_origin.text;
      auto [it, inserted] = index_of.try_emplace(query, anchor_texts.size());
      if (inserted) anchor_texts.push_back(query);
      anchor_index[i] = it->second;
    }
  }

  std::vector<std::string> texts = anchor_texts;
  texts.reserve(anchor_texts.size() + snippets.size());
  for (const auto& snippet : snippets) texts.push_back(snippet.text);

  std::vector<EmbeddingVector> vectors;
  try {
    vectors = embedder.embed(texts);
  } catch (const ProviderError& e) {
    throw RetrievalError(std::string("embedding failed: ") + e.what());
  }
  if (vectors.size() != texts.size()) {
    throw RetrievalError("embedder returned " + std::to_string(vectors.size()) +
                         " vectors for " + std::to_string(texts.size()) + " texts");
  }

  for (std::size_t i = 0; i < snippets.size(); ++i) {
    snippets[i].similarity = cosine_similarity(vectors[anchor_index[i]],
                                               vectors[anchor_texts.size() + i]);
  }
  std::sort(snippets.begin(), snippets.end(),
            [](const EvidenceSnippet& a, const EvidenceSnippet& b) {
              if (*a.similarity != *b.similarity) return *a.similarity > *b.similarity;
              if (a.provider != b.provider) return a.provider < b.provider;
              return a.url < b.url;
            });
  if (snippets.size() > static_cast<std::size_t>(k)) {
    snippets.resize(static_cast<std::size_t>(k));
  }
  return snippets;
}

}  // namespace factcheck::evidence
