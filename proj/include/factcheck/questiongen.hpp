#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "factcheck/datasets.hpp"

namespace factcheck::questiongen {

// Decoder parameters transmitted to a generation backend. Bounds are enforced
// at construction; out-of-range values are rejected, never clamped.
struct SamplingConfig {
  double temperature = 1.5;
  double top_p = 0.95;
  int top_k = 40;
  double tfs_z = 1.0;
  int max_new_tokens = 300;
  double repetition_penalty = 1.1;

  SamplingConfig() = default;  // the fine-tuned seq2seq defaults above
  SamplingConfig(double temperature, double top_p, int top_k, double tfs_z,
                 int max_new_tokens, double repetition_penalty);

  static SamplingConfig seq2seq_defaults() { return SamplingConfig(); }

  void validate() const;  // throws ValidationError
};

enum class BackendKind { fine_tuned_seq2seq, instruction_llm };

std::string backend_kind_name(BackendKind kind);
BackendKind parse_backend_kind(std::string_view name);

struct GenerationBackend {
  std::string id;
  BackendKind kind = BackendKind::instruction_llm;
  std::string endpoint;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
};

// One-shot prompt with a worked exemplar and a structured-output instruction.
struct PromptTemplate {
  std::string system_preamble;
  std::string exemplar_claim;
  std::string exemplar_reasoning;
  std::vector<std::string> exemplar_questions;
  std::string output_schema_instruction;

  static PromptTemplate load(const std::filesystem::path& path);  // JSON file
  static PromptTemplate builtin_default();
};

struct GeneratedQuestionSet {
  std::string claim_id;
  // Disengaged = the Null marker: every sample was non-conforming.
  std::optional<std::vector<std::string>> questions;
  std::string backend_id;
  // Disengaged sampling = backend served its own defaults; we record exactly
  // what was sent.
  std::optional<SamplingConfig> sampling;
  std::vector<std::string> raw_responses;  // retained for audit

  bool is_null() const { return !questions.has_value(); }
};

// For instruction LLMs: preamble, one exemplar block (claim + reasoning +
// questions as JSON), schema instruction, then the target claim verbatim.
// Fine-tuned seq2seq backends are trained claim->question, so their prompt is
// the claim text alone. Pure function of (claim, template).
std::string build_prompt(const datasets::Claim& claim, const PromptTemplate& tmpl,
                         BackendKind kind);

// Total parse of a raw backend response. Instruction LLMs: the first JSON
// object whose "questions" member is a non-empty array of non-empty strings;
// anything else is Null. Seq2seq: the trimmed output is the single question,
// empty output is Null.
std::optional<std::vector<std::string>> parse_generation(std::string_view raw,
                                                         BackendKind kind);

// Text-in/text-out generation surface; HTTP and scripted implementations.
class GenerationClient {
 public:
  virtual ~GenerationClient() = default;
  // Raw model text for one sampled generation. Throws ProviderError on
  // transport failure (after the client's own retries).
  virtual std::string generate(const std::string& prompt,
                               const std::optional<SamplingConfig>& sampling) = 0;
};

// Draws up to n samples, parses each, and dedups questions by whitespace
// normalization, preserving generation order. Null only when every sample is
// non-conforming.
GeneratedQuestionSet generate_questions(const datasets::Claim& claim,
                                        const GenerationBackend& backend,
                                        GenerationClient& client,
                                        const std::optional<SamplingConfig>& sampling,
                                        int n, const PromptTemplate& tmpl);

struct SynthesisOptions {
  std::filesystem::path out;          // canonical dataset, append-only
  std::filesystem::path skip_report;  // JSONL journal of skipped claims
  int questions_per_claim = 3;
  datasets::Split split = datasets::Split::train;
};

struct SynthesisSummary {
  std::size_t written = 0;
  std::size_t skipped_null = 0;
  std::size_t skipped_error = 0;
  std::size_t resumed = 0;  // claims already present from an earlier run
};

// Generates a canonical dataset from bare claims. Null generations and
// per-claim provider errors go to the skip report instead of aborting the
// batch; claim ids already present in either file are skipped on rerun.
SynthesisSummary synthesize_dataset(const std::vector<datasets::Claim>& claims,
                                    const GenerationBackend& backend,
                                    GenerationClient& client,
                                    const std::optional<SamplingConfig>& sampling,
                                    const PromptTemplate& tmpl,
                                    const SynthesisOptions& options);

}  // namespace factcheck::questiongen
