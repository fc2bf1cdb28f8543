#include "factcheck/questiongen.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "factcheck/error.hpp"
#include "factcheck/text.hpp"

namespace factcheck::questiongen {

namespace {

using nlohmann::json;

// Scans for top-level '{' positions and attempts a parse at each, so prose
// around the object (common in chatty LLM output) does not defeat extraction.
std::optional<json> first_json_object_with_questions(std::string_view raw) {
  for (std::size_t pos = raw.find('{'); pos != std::string_view::npos;
       pos = raw.find('{', pos + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = pos; i < raw.size(); ++i) {
      const char c = raw[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          json candidate = json::parse(raw.substr(pos, i - pos + 1), nullptr, false);
          if (!candidate.is_discarded() && candidate.is_object() &&
              candidate.contains("questions") && candidate["questions"].is_array()) {
            return candidate;
          }
          break;  // balanced but not a match; try the next '{'
        }
      }
    }
  }
  return std::nullopt;
}

std::string questions_as_json(const std::vector<std::string>& questions) {
  json obj;
  obj["questions"] = questions;
  return obj.dump();
}

}  // namespace

SamplingConfig::SamplingConfig(double temperature, double top_p, int top_k, double tfs_z,
                               int max_new_tokens, double repetition_penalty)
    : temperature(temperature),
      top_p(top_p),
      top_k(top_k),
      tfs_z(tfs_z),
      max_new_tokens(max_new_tokens),
      repetition_penalty(repetition_penalty) {
  validate();
}

void SamplingConfig::validate() const {
  if (!(temperature > 0.0)) throw ValidationError("sampling: temperature must be > 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ValidationError("sampling: top_p must be in (0,1]");
  if (top_k < 1) throw ValidationError("sampling: top_k must be >= 1");
  if (!(tfs_z > 0.0 && tfs_z <= 1.0)) throw ValidationError("sampling: tfs_z must be in (0,1]");
  if (max_new_tokens < 1) throw ValidationError("sampling: max_new_tokens must be >= 1");
  if (!(repetition_penalty >= 1.0)) {
    throw ValidationError("sampling: repetition_penalty must be >= 1");
  }
}

std::string backend_kind_name(BackendKind kind) {
  return kind == BackendKind::fine_tuned_seq2seq ? "fine_tuned_seq2seq" : "instruction_llm";
}

BackendKind parse_backend_kind(std::string_view name) {
  if (name == "fine_tuned_seq2seq") return BackendKind::fine_tuned_seq2seq;
  if (name == "instruction_llm") return BackendKind::instruction_llm;
  throw ValidationError("unknown backend kind '" + std::string(name) + "'");
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open prompt template: " + path.string());
  json obj = json::parse(in, nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) {
    throw ParseError("prompt template is not a JSON object: " + path.string());
  }
  PromptTemplate tmpl;
  auto field = [&](const char* key) {
    if (!obj.contains(key) || !obj[key].is_string()) {
      throw ParseError(std::string("prompt template missing string field '") + key + "'");
    }
    return obj[key].get<std::string>();
  };
  tmpl.system_preamble = field("system_preamble");
  tmpl.exemplar_claim = field("exemplar_claim");
  tmpl.exemplar_reasoning = field("exemplar_reasoning");
  tmpl.output_schema_instruction = field("output_schema_instruction");
  if (!obj.contains("exemplar_questions") || !obj["exemplar_questions"].is_array() ||
      obj["exemplar_questions"].empty()) {
    throw ParseError("prompt template needs a non-empty exemplar_questions array");
  }
  for (const auto& q : obj["exemplar_questions"]) {
    if (!q.is_string()) throw ParseError("prompt template: non-string exemplar question");
    tmpl.exemplar_questions.push_back(q.get<std::string>());
  }
  return tmpl;
}

PromptTemplate PromptTemplate::builtin_default() {
  PromptTemplate tmpl;
  tmpl.system_preamble =
      "You are a fact-checking assistant. Break a claim into the specific questions "
      "whose answers would let a researcher verify or refute it. Think through which "
      "parts of the claim need independent evidence, then list the questions.";
  tmpl.exemplar_claim =
      "The Eiffel Tower was the tallest man-made structure in the world for 41 years.";
  tmpl.exemplar_reasoning =
      "The claim has three verifiable parts: that the Eiffel Tower once held the "
      "world height record, when that period started, and what ended it. The start "
      "is its completion date; the end is whichever structure first surpassed it, "
      "and the gap between those dates must be 41 years.";
  tmpl.exemplar_questions = {
      "When was the Eiffel Tower completed and how tall was it?",
      "Which man-made structures were taller than the Eiffel Tower before 1889?",
      "Which structure first surpassed the Eiffel Tower in height, and in what year?",
  };
  tmpl.output_schema_instruction =
      "Answer with a single JSON object of the form {\"questions\": [\"...\"]} and "
      "nothing else.";
  return tmpl;
}

std::string build_prompt(const datasets::Claim& claim, const PromptTemplate& tmpl,
                         BackendKind kind) {
  if (kind == BackendKind::fine_tuned_seq2seq) {
    return claim.text;  // trained claim -> question
  }
  std::ostringstream out;
  out << tmpl.system_preamble << "\n\n";
  out << "Claim: " << tmpl.exemplar_claim << "\n";
  out << "Reasoning: " << tmpl.exemplar_reasoning << "\n";
  out << "Output: " << questions_as_json(tmpl.exemplar_questions) << "\n\n";
  out << tmpl.output_schema_instruction << "\n\n";
  out << "Claim: " << claim.text << "\n";
  out << "Output: ";
  return out.str();
}

std::optional<std::vector<std::string>> parse_generation(std::string_view raw,
                                                         BackendKind kind) {
  if (kind == BackendKind::fine_tuned_seq2seq) {
    std::string question = text::trim(raw);
    if (question.empty()) return std::nullopt;
    return std::vector<std::string>{std::move(question)};
  }

  auto obj = first_json_object_with_questions(raw);
  if (!obj) return std::nullopt;
  std::vector<std::string> questions;
  for (const auto& q : (*obj)["questions"]) {
    if (!q.is_string()) return std::nullopt;  // wrong element type is non-conforming
    std::string question = text::trim(q.get<std::string>());
    if (question.empty()) return std::nullopt;
    questions.push_back(std::move(question));
  }
  if (questions.empty()) return std::nullopt;  // zero questions counts as null
  return questions;
}

GeneratedQuestionSet generate_questions(const datasets::Claim& claim,
                                        const GenerationBackend& backend,
                                        GenerationClient& client,
                                        const std::optional<SamplingConfig>& sampling,
                                        int n, const PromptTemplate& tmpl) {
  if (n < 1) throw ValidationError("generate_questions: n must be >= 1");
  if (sampling) sampling->validate();

  GeneratedQuestionSet set;
  set.claim_id = claim.id;
  set.backend_id = backend.id;
  set.sampling = sampling;

  const std::string prompt = build_prompt(claim, tmpl, backend.kind);
  std::vector<std::string> questions;
  std::unordered_set<std::string> seen;
  for (int i = 0; i < n && static_cast<int>(questions.size()) < n; ++i) {
    std::string raw = client.generate(prompt, sampling);
    set.raw_responses.push_back(raw);
    auto parsed = parse_generation(raw, backend.kind);
    if (!parsed) continue;
    for (auto& question : *parsed) {
      if (static_cast<int>(questions.size()) >= n) break;
      if (seen.insert(text::normalize_whitespace(question)).second) {
        questions.push_back(std::move(question));
      }
    }
  }
  if (!questions.empty()) set.questions = std::move(questions);
  return set;
}

SynthesisSummary synthesize_dataset(const std::vector<datasets::Claim>& claims,
                                    const GenerationBackend& backend,
                                    GenerationClient& client,
                                    const std::optional<SamplingConfig>& sampling,
                                    const PromptTemplate& tmpl,
                                    const SynthesisOptions& options) {
  if (claims.empty()) throw ValidationError("synthesize_dataset: no claims");

  // Resume state: ids already present in the output or the skip report.
  std::unordered_set<std::string> processed;
  auto collect_ids = [&](const std::filesystem::path& path, const char* id_key) {
    std::ifstream in(path);
    if (!in) return;
    std::string line;
    while (std::getline(in, line)) {
      if (text::trim(line).empty()) continue;
      json obj = json::parse(line, nullptr, false);
      if (!obj.is_discarded() && obj.is_object() && obj.contains(id_key) &&
          obj[id_key].is_string()) {
        processed.insert(obj[id_key].get<std::string>());
      }
    }
  };
  collect_ids(options.out, "id");
  collect_ids(options.skip_report, "claim_id");

  std::ofstream out(options.out, std::ios::app);
  if (!out) throw IoError("cannot open synthesis output: " + options.out.string());
  std::ofstream skips(options.skip_report, std::ios::app);
  if (!skips) throw IoError("cannot open skip report: " + options.skip_report.string());

  SynthesisSummary summary;
  auto skip = [&](const datasets::Claim& claim, const std::string& reason,
                  const std::string& detail) {
    json entry;
    entry["claim_id"] = claim.id;
    entry["reason"] = reason;
    if (!detail.empty()) entry["detail"] = detail;
    skips << entry.dump() << '\n';
    skips.flush();
  };

  for (const auto& claim : claims) {
    if (processed.count(claim.id)) {
      ++summary.resumed;
      continue;
    }
    GeneratedQuestionSet set;
    try {
      set = generate_questions(claim, backend, client, sampling,
                               options.questions_per_claim, tmpl);
    } catch (const ProviderError& e) {
      ++summary.skipped_error;
      skip(claim, "provider_error", e.what());
      continue;
    }
    if (set.is_null()) {
      ++summary.skipped_null;
      skip(claim, "null_generation",
           set.raw_responses.empty() ? "" : set.raw_responses.back());
      continue;
    }
    json record;
    record["id"] = claim.id;
    record["claim"] = claim.text;
    record["questions"] = *set.questions;
    record["split"] = datasets::split_name(options.split);
    record["source"] = backend.id;
    if (claim.gold_label) record["label"] = claim.gold_label->value;
    out << record.dump() << '\n';
    out.flush();
    ++summary.written;
  }
  return summary;
}

}  // namespace factcheck::questiongen
