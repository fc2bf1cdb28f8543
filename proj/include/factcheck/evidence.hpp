#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "factcheck/datasets.hpp"
#include "factcheck/questiongen.hpp"

namespace factcheck::evidence {

struct SearchQuery {
  std::string text;
  // Disengaged = the claim itself; otherwise the 0-based question index.
  std::optional<std::size_t> question_index;

  bool from_claim() const { return !question_index.has_value(); }
};

struct EvidenceSnippet {
  std::string text;
  std::string url;
  std::string title;
  std::string provider;
  SearchQuery query_origin;
  std::optional<double> similarity;  // set by ranking only
};

// Fact-checker domains excluded from retrieval so verification cannot lean on
// published verdicts. Entries are registrable domains, lowercase, no scheme or
// path; a URL is blocked when its host equals an entry or is a subdomain of one.
class Blocklist {
 public:
  Blocklist() = default;
  static Blocklist load(const std::filesystem::path& path);  // one domain per line, '#' comments

  void add(std::string_view domain);  // throws ValidationError on scheme/path/uppercase-only junk
  bool blocks_url(const std::string& url) const;
  bool blocks_host(std::string_view host) const;
  std::size_t size() const { return domains_.size(); }
  const std::vector<std::string>& domains() const { return domains_; }

 private:
  std::vector<std::string> domains_;
};

// Lowercased host of a URL (port stripped); empty when the URL has no
// recognizable authority.
std::string url_host(std::string_view url);
bool url_is_valid(std::string_view url);

struct SearchResult {
  std::string title;
  std::string url;
  std::string snippet;
};

class SearchProvider {
 public:
  virtual ~SearchProvider() = default;
  virtual std::string name() const = 0;
  // Throws ProviderError on failure; search_all degrades per provider.
  virtual std::vector<SearchResult> search(const std::string& query, int max_results) = 0;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // One vector per input text, all of one dimension. Throws ProviderError.
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

// First query is always the claim text; one query per question in order. A
// null (or absent) question set degrades to the claim-only query list.
std::vector<SearchQuery> build_queries(const datasets::Claim& claim,
                                       const questiongen::GeneratedQuestionSet* questions);
std::vector<SearchQuery> build_queries(const datasets::Claim& claim,
                                       const std::vector<std::string>& questions);

struct SearchDiagnostics {
  struct Failure {
    std::string provider;
    std::string query;
    std::string message;
  };
  std::vector<Failure> failures;
  std::size_t requests_attempted = 0;
  std::size_t requests_succeeded = 0;
  std::size_t snippets_blocked = 0;
  std::size_t snippets_deduped = 0;
};

// Fans provider x query requests out (bounded by `parallelism`), then merges
// deterministically: results are consumed in (query, provider) order no matter
// how the requests complete. Blocklisted domains are removed and snippets are
// deduplicated by (url, whitespace-normalized text), first occurrence kept.
// Raises RetrievalError only when every request failed.
std::vector<EvidenceSnippet> search_all(
    const std::vector<SearchQuery>& queries,
    const std::vector<std::shared_ptr<SearchProvider>>& providers,
    const Blocklist& blocklist, int max_results_per_query = 10, int parallelism = 4,
    SearchDiagnostics* diagnostics = nullptr);

using EmbeddingVector = std::vector<double>;

// dot(u,v) / (|u||v|). Dimension mismatch or a zero norm raises
// ComputationError.
double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

// What a snippet is scored against: the claim text (default; the one anchor
// common to every retrieval method, keeping method comparisons fair) or the
// text of the query that retrieved the snippet.
enum class RankAnchor { claim, origin_query };

std::string rank_anchor_name(RankAnchor anchor);
RankAnchor parse_rank_anchor(std::string_view name);

// Scores every snippet by cosine similarity between its text embedding and
// the anchor embedding, sorts non-increasing with (provider, url)
// lexicographic tie-breaks, and returns min(k, |snippets|). Embeddings are
// fetched in one batched call: anchors first, snippets after, in input order.
std::vector<EvidenceSnippet> embed_and_rank(const datasets::Claim& claim,
                                            std::vector<EvidenceSnippet> snippets,
                                            EmbeddingProvider& embedder, int k = 20,
                                            RankAnchor anchor = RankAnchor::claim);

}  // namespace factcheck::evidence
