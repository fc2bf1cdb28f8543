#include "factcheck/verification.hpp"

#include <fstream>

#include "factcheck/error.hpp"
#include "factcheck/text.hpp"

namespace factcheck::verification {

namespace {

using nlohmann::json;

[[noreturn]] void rethrow_with_stage(const char* stage, const Error& e) {
  const std::string message = std::string("[") + stage + "] " + e.what();
  switch (e.kind()) {
    case ErrorKind::validation:
      throw ValidationError(message);
    case ErrorKind::parse:
      throw ParseError(message);
    case ErrorKind::io:
      throw IoError(message);
    case ErrorKind::computation:
      throw ComputationError(message);
    case ErrorKind::provider:
      throw ProviderError(stage, message);
    case ErrorKind::retrieval:
      throw RetrievalError(message);
    case ErrorKind::verification:
      throw VerificationError(message);
    case ErrorKind::internal:
      break;
  }
  throw Error(ErrorKind::internal, message);
}

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    rethrow_with_stage(stage, e);
  }
}

std::string sanitize_for_filename(std::string_view s) {
  std::string out;
  for (char c : s) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  }
  return out;
}

}  // namespace

std::string verdict_label_name(VerdictLabel label) {
  return label == VerdictLabel::True ? "True" : "False";
}

std::vector<std::pair<evidence::EvidenceSnippet, StanceLabel>> classify_stances(
    const datasets::Claim& claim, const std::vector<evidence::EvidenceSnippet>& snippets,
    NliProvider& nli, StanceDiagnostics* diagnostics) {
  if (snippets.empty()) {
    throw VerificationError("classify_stances: no snippets to classify");
  }
  std::vector<NliInput> inputs;
  inputs.reserve(snippets.size());
  for (const auto& snippet : snippets) {
    inputs.push_back({snippet.text, claim.text});
  }
  std::vector<NliOutcome> outcomes = nli.classify(inputs);
  if (outcomes.size() != inputs.size()) {
    throw VerificationError("NLI provider returned " + std::to_string(outcomes.size()) +
                            " outcomes for " + std::to_string(inputs.size()) + " pairs");
  }
  std::vector<std::pair<evidence::EvidenceSnippet, StanceLabel>> stances;
  stances.reserve(snippets.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (const auto* stance = std::get_if<StanceLabel>(&outcomes[i])) {
      stances.emplace_back(snippets[i], *stance);
    } else if (diagnostics) {
      diagnostics->dropped.push_back("snippet " + std::to_string(i) + " (" +
                                     snippets[i].url + "): " +
                                     std::get<std::string>(outcomes[i]));
    }
  }
  return stances;
}

std::string tie_rule_name(TieRule rule) {
  switch (rule) {
    case TieRule::higher_mean_confidence:
      return "higher_mean_confidence";
    case TieRule::always_false:
      return "always_false";
    case TieRule::always_true:
      return "always_true";
  }
  return "?";
}

TieRule parse_tie_rule(std::string_view name) {
  if (name == "higher_mean_confidence") return TieRule::higher_mean_confidence;
  if (name == "always_false") return TieRule::always_false;
  if (name == "always_true") return TieRule::always_true;
  throw ValidationError("unknown tie rule '" + std::string(name) + "'");
}

std::string vote_weighting_name(VoteWeighting weighting) {
  return weighting == VoteWeighting::equal ? "equal" : "confidence";
}

VoteWeighting parse_vote_weighting(std::string_view name) {
  if (name == "equal") return VoteWeighting::equal;
  if (name == "confidence") return VoteWeighting::confidence;
  throw ValidationError("unknown vote weighting '" + std::string(name) + "'");
}

AggregateResult aggregate_verdict(const std::vector<StanceLabel>& stances, TieRule rule,
                                  VoteWeighting weighting) {
  if (stances.empty()) {
    throw VerificationError("aggregate_verdict: no stances (claim unverifiable)");
  }
  AggregateResult result;
  double supporting_confidence = 0.0;
  double refuting_confidence = 0.0;
  for (const auto& stance : stances) {
    if (stance.label == Stance::supporting) {
      ++result.supporting_votes;
      supporting_confidence += stance.confidence;
    } else {
      ++result.refuting_votes;
      refuting_confidence += stance.confidence;
    }
  }
  const double supporting_weight = weighting == VoteWeighting::equal
                                       ? result.supporting_votes
                                       : supporting_confidence;
  const double refuting_weight = weighting == VoteWeighting::equal
                                     ? result.refuting_votes
                                     : refuting_confidence;
  if (supporting_weight > refuting_weight) {
    result.label = VerdictLabel::True;
  } else if (refuting_weight > supporting_weight) {
    result.label = VerdictLabel::False;
  } else {
    result.tie_broken = true;
    switch (rule) {
      case TieRule::always_false:
        result.label = VerdictLabel::False;
        break;
      case TieRule::always_true:
        result.label = VerdictLabel::True;
        break;
      case TieRule::higher_mean_confidence: {
        // Equal weights on both sides; equal counts means comparing sums
        // compares means. Exact ties go to False.
        result.label = supporting_confidence > refuting_confidence ? VerdictLabel::True
                                                                   : VerdictLabel::False;
        break;
      }
    }
  }
  return result;
}

Method Method::human(std::vector<std::string> questions) {
  Method method;
  method.kind = Kind::human_questions;
  method.human_questions = std::move(questions);
  return method;
}

Method Method::with_backend(std::string id) {
  Method method;
  method.kind = Kind::backend;
  method.backend_id = std::move(id);
  return method;
}

Method Method::parse(std::string_view spec) {
  if (spec == "claim_only") return claim_only();
  if (spec.rfind("backend:", 0) == 0) {
    std::string id(spec.substr(8));
    if (id.empty()) throw ValidationError("method backend: missing backend id");
    return with_backend(std::move(id));
  }
  if (spec.rfind("human:", 0) == 0) {
    const std::filesystem::path path{std::string(spec.substr(6))};
    std::ifstream in(path);
    if (!in) throw IoError("cannot open questions file: " + path.string());
    std::vector<std::string> questions;
    std::string line;
    while (std::getline(in, line)) {
      std::string q = text::trim(line);
      if (!q.empty()) questions.push_back(std::move(q));
    }
    if (questions.empty()) {
      throw ValidationError("questions file is empty: " + path.string());
    }
    return human(std::move(questions));
  }
  throw ValidationError("unknown method '" + std::string(spec) +
                        "' (expected claim_only, human:<file>, backend:<id>)");
}

std::string Method::describe() const {
  switch (kind) {
    case Kind::claim_only:
      return "claim_only";
    case Kind::human_questions:
      return "human_questions";
    case Kind::backend:
      return "backend:" + backend_id;
  }
  return "?";
}

nlohmann::json outcome_to_json(const VerificationOutcome& outcome) {
  const Verdict& verdict = outcome.verdict;
  json out;
  out["claim_id"] = verdict.claim_id;
  out["label"] = verdict_label_name(verdict.label);
  out["supporting_votes"] = verdict.supporting_votes;
  out["refuting_votes"] = verdict.refuting_votes;
  out["method"] = verdict.method;
  out["tie_broken"] = verdict.tie_broken;
  out["notes"] = verdict.notes;

  json queries = json::array();
  for (const auto& query : outcome.audit.queries) {
    json q;
    q["text"] = query.text;
    q["origin"] = query.from_claim() ? "claim"
                                     : "question:" + std::to_string(*query.question_index);
    queries.push_back(q);
  }
  out["queries"] = queries;

  json snippets = json::array();
  for (const auto& [snippet, stance] : verdict.per_snippet) {
    json s;
    s["text"] = snippet.text;
    s["url"] = snippet.url;
    s["title"] = snippet.title;
    s["provider"] = snippet.provider;
    if (snippet.similarity) s["similarity"] = *snippet.similarity;
    s["stance"] = stance.label == Stance::supporting ? "Supporting" : "Refuting";
    s["confidence"] = stance.confidence;
    snippets.push_back(s);
  }
  out["snippets"] = snippets;

  json diag;
  diag["search_failures"] = json::array();
  for (const auto& failure : outcome.audit.search.failures) {
    diag["search_failures"].push_back(
        {{"provider", failure.provider}, {"query", failure.query}, {"message", failure.message}});
  }
  diag["requests_attempted"] = outcome.audit.search.requests_attempted;
  diag["requests_succeeded"] = outcome.audit.search.requests_succeeded;
  diag["snippets_blocked"] = outcome.audit.search.snippets_blocked;
  diag["snippets_deduped"] = outcome.audit.search.snippets_deduped;
  diag["nli_dropped"] = outcome.audit.stances.dropped;
  out["diagnostics"] = diag;

  if (outcome.audit.generation) {
    json gen;
    gen["backend"] = outcome.audit.generation->backend_id;
    gen["null"] = outcome.audit.generation->is_null();
    if (!outcome.audit.generation->is_null()) {
      gen["questions"] = *outcome.audit.generation->questions;
    }
    gen["raw_responses"] = outcome.audit.generation->raw_responses;
    out["generation"] = gen;
  }
  out["fell_back_to_claim_only"] = outcome.audit.fell_back_to_claim_only;
  return out;
}

VerificationOutcome verify_claim(const datasets::Claim& claim, const Method& method,
                                 PipelineProviders& providers,
                                 const PipelineOptions& options) {
  if (text::trim(claim.text).empty()) {
    throw ValidationError("verify_claim: empty claim text");
  }

  VerificationOutcome outcome;
  Verdict& verdict = outcome.verdict;
  verdict.claim_id = claim.id;
  verdict.method = method.describe();

  // Stage 1: questions.
  switch (method.kind) {
    case Method::Kind::claim_only:
      outcome.audit.queries = evidence::build_queries(claim, std::vector<std::string>{});
      break;
    case Method::Kind::human_questions:
      outcome.audit.queries = evidence::build_queries(claim, method.human_questions);
      break;
    case Method::Kind::backend: {
      auto backend_it = providers.backends.find(method.backend_id);
      auto client_it = providers.generators.find(method.backend_id);
      if (backend_it == providers.backends.end() ||
          client_it == providers.generators.end()) {
        throw ValidationError("verify_claim: unknown backend '" + method.backend_id + "'");
      }
      // Seq2seq backends get the fine-tuned sampling defaults unless the
      // config overrides; instruction LLMs default to the server's settings.
      std::optional<questiongen::SamplingConfig> sampling = options.sampling;
      if (!sampling && backend_it->second.kind == questiongen::BackendKind::fine_tuned_seq2seq) {
        sampling = questiongen::SamplingConfig::seq2seq_defaults();
      }
      outcome.audit.generation = run_stage("generate", [&] {
        return questiongen::generate_questions(claim, backend_it->second, *client_it->second,
                                               sampling, options.questions_per_claim,
                                               options.prompt);
      });
      if (outcome.audit.generation->is_null()) {
        outcome.audit.fell_back_to_claim_only = true;
        verdict.notes.push_back("generation was null; fell back to claim-only queries");
        outcome.audit.queries = evidence::build_queries(claim, std::vector<std::string>{});
      } else {
        outcome.audit.queries = evidence::build_queries(claim, &*outcome.audit.generation);
      }
      break;
    }
  }

  // Stage 2: retrieval.
  std::vector<evidence::EvidenceSnippet> pool = run_stage("search", [&] {
    return evidence::search_all(outcome.audit.queries, providers.search, options.blocklist,
                                options.max_results_per_query, options.parallelism,
                                &outcome.audit.search);
  });

  // Stage 3: ranking.
  std::vector<evidence::EvidenceSnippet> ranked = run_stage("rank", [&] {
    if (!providers.embedder) throw ValidationError("no embedding provider configured");
    return evidence::embed_and_rank(claim, std::move(pool), *providers.embedder,
                                    options.top_k, options.rank_anchor);
  });

  // Stage 4: stance classification.
  verdict.per_snippet = run_stage("nli", [&] {
    if (!providers.nli) throw ValidationError("no NLI provider configured");
    return classify_stances(claim, ranked, *providers.nli, &outcome.audit.stances);
  });

  // Stage 5: aggregation.
  std::vector<StanceLabel> stances;
  stances.reserve(verdict.per_snippet.size());
  for (const auto& [_, stance] : verdict.per_snippet) stances.push_back(stance);
  const AggregateResult aggregate = run_stage("aggregate", [&] {
    return aggregate_verdict(stances, options.tie_rule, options.vote_weighting);
  });
  verdict.label = aggregate.label;
  verdict.supporting_votes = aggregate.supporting_votes;
  verdict.refuting_votes = aggregate.refuting_votes;
  verdict.tie_broken = aggregate.tie_broken;
  if (aggregate.tie_broken) {
    verdict.notes.push_back("tie at " + std::to_string(aggregate.supporting_votes) + "-" +
                            std::to_string(aggregate.refuting_votes) +
                            " resolved by rule " + tie_rule_name(options.tie_rule));
  }

  if (options.audit_dir) {
    std::filesystem::create_directories(*options.audit_dir);
    const auto path = *options.audit_dir /
                      (sanitize_for_filename(claim.id) + "_" +
                       sanitize_for_filename(verdict.method) + ".json");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write audit record: " + path.string());
    out << outcome_to_json(outcome).dump(2) << '\n';
  }
  return outcome;
}

}  // namespace factcheck::verification
