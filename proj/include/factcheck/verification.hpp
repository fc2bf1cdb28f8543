#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "factcheck/datasets.hpp"
#include "factcheck/evidence.hpp"
#include "factcheck/metrics.hpp"
#include "factcheck/questiongen.hpp"

namespace factcheck::verification {

using metrics::VerdictLabel;

std::string verdict_label_name(VerdictLabel label);

enum class Stance { supporting, refuting };

struct StanceLabel {
  Stance label = Stance::supporting;
  double confidence = 1.0;  // providers without scores report 1.0
};

struct NliInput {
  std::string premise;     // snippet text
  std::string hypothesis;  // claim text
};

// One outcome per input: a stance, or a diagnostic string for an item the
// provider could not classify (that snippet is dropped, never silently).
using NliOutcome = std::variant<StanceLabel, std::string>;

class NliProvider {
 public:
  virtual ~NliProvider() = default;
  // Throws ProviderError when the whole batch fails (after retries).
  virtual std::vector<NliOutcome> classify(const std::vector<NliInput>& inputs) = 0;
};

struct StanceDiagnostics {
  std::vector<std::string> dropped;  // one message per dropped snippet
};

// One stance per snippet, input order preserved; per-item failures drop the
// snippet with a diagnostic. Empty snippet list is a verification error.
std::vector<std::pair<evidence::EvidenceSnippet, StanceLabel>> classify_stances(
    const datasets::Claim& claim, const std::vector<evidence::EvidenceSnippet>& snippets,
    NliProvider& nli, StanceDiagnostics* diagnostics = nullptr);

// Majority tie handling; higher_mean_confidence falls back to False when the
// means are equal too.
enum class TieRule { higher_mean_confidence, always_false, always_true };

std::string tie_rule_name(TieRule rule);
TieRule parse_tie_rule(std::string_view name);

// equal: every stance counts 1 (the default plain majority). confidence:
// stances vote with their confidence as weight; vote counts are still
// reported as plain counts.
enum class VoteWeighting { equal, confidence };

std::string vote_weighting_name(VoteWeighting weighting);
VoteWeighting parse_vote_weighting(std::string_view name);

struct AggregateResult {
  VerdictLabel label = VerdictLabel::False;
  int supporting_votes = 0;
  int refuting_votes = 0;
  bool tie_broken = false;
};

// Majority vote over the stances; zero stances is a verification error
// (claim unverifiable with no evidence).
AggregateResult aggregate_verdict(const std::vector<StanceLabel>& stances,
                                  TieRule rule = TieRule::higher_mean_confidence,
                                  VoteWeighting weighting = VoteWeighting::equal);

struct Verdict {
  std::string claim_id;
  VerdictLabel label = VerdictLabel::False;
  int supporting_votes = 0;
  int refuting_votes = 0;
  std::vector<std::pair<evidence::EvidenceSnippet, StanceLabel>> per_snippet;
  std::string method;
  bool tie_broken = false;
  std::vector<std::string> notes;  // fallbacks and tie logging
};

// How questions are obtained for retrieval.
struct Method {
  enum class Kind { claim_only, human_questions, backend };
  Kind kind = Kind::claim_only;
  std::vector<std::string> human_questions;
  std::string backend_id;

  static Method claim_only() { return Method{}; }
  static Method human(std::vector<std::string> questions);
  static Method with_backend(std::string id);
  // "claim_only" | "human:<path>" | "backend:<id>"; human loads one question
  // per non-empty line.
  static Method parse(std::string_view spec);

  std::string describe() const;
};

struct PipelineProviders {
  std::vector<std::shared_ptr<evidence::SearchProvider>> search;
  std::shared_ptr<evidence::EmbeddingProvider> embedder;
  std::shared_ptr<NliProvider> nli;
  std::map<std::string, questiongen::GenerationBackend> backends;
  std::map<std::string, std::shared_ptr<questiongen::GenerationClient>> generators;
};

struct PipelineOptions {
  int top_k = 20;
  TieRule tie_rule = TieRule::higher_mean_confidence;
  VoteWeighting vote_weighting = VoteWeighting::equal;
  evidence::RankAnchor rank_anchor = evidence::RankAnchor::claim;
  evidence::Blocklist blocklist;
  int max_results_per_query = 10;
  int parallelism = 4;
  int questions_per_claim = 3;
  questiongen::PromptTemplate prompt = questiongen::PromptTemplate::builtin_default();
  std::optional<questiongen::SamplingConfig> sampling;  // backend-kind default applied when unset
  std::optional<std::filesystem::path> audit_dir;
};

// Everything verify_claim saw, for audit persistence and the service response.
struct VerificationAudit {
  std::vector<evidence::SearchQuery> queries;
  evidence::SearchDiagnostics search;
  StanceDiagnostics stances;
  std::optional<questiongen::GeneratedQuestionSet> generation;
  bool fell_back_to_claim_only = false;
};

struct VerificationOutcome {
  Verdict verdict;
  VerificationAudit audit;
};

nlohmann::json outcome_to_json(const VerificationOutcome& outcome);

// Full per-claim pipeline: questions -> queries -> search -> rank(top_k) ->
// stances -> majority verdict. A Null generation falls back to claim-only
// queries and records the fallback. Stage errors propagate with the stage
// name prefixed. When audit_dir is set the outcome JSON is persisted there.
VerificationOutcome verify_claim(const datasets::Claim& claim, const Method& method,
                                 PipelineProviders& providers,
                                 const PipelineOptions& options);

}  // namespace factcheck::verification
