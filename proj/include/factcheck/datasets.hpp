#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace factcheck::datasets {

struct GoldLabel {
  std::string value;  // "True", "False", or any dataset-specific label

  bool is_true() const { return value == "True"; }
  bool is_false() const { return value == "False"; }
};

struct Claim {
  std::string id;
  std::string text;  // non-empty after whitespace trimming
  std::optional<GoldLabel> gold_label;
  std::string source;
  std::optional<std::string> language;  // BCP-47 tag
};

enum class Split { train, test };

std::string split_name(Split split);
Split parse_split(std::string_view name);  // throws ValidationError

struct DatasetRecord {
  Claim claim;
  std::vector<std::string> reference_questions;
  Split split = Split::train;
};

struct ClaimQuestionPair {
  Claim claim;
  std::string reference_question;
  std::string pair_id;
};

struct DatasetStats {
  std::size_t num_claims = 0;
  double avg_questions = 0.0;  // internal value exact; format to 2 decimals for reports
  std::size_t train_size = 0;  // expanded pairs
  std::size_t test_size = 0;
};

// Input layouts. canonical is the project's own line-delimited format (see
// README); the others convert published corpus layouts into it on load.
enum class Format { canonical, averitec, claimdecomp };

Format parse_format(std::string_view name);  // throws ValidationError

// Loads and validates one dataset file. Records violating the invariants
// (empty claim text, duplicate ids, duplicate questions after whitespace
// normalization) raise ParseError with the offending line; an empty dataset
// raises ValidationError. default_split applies to formats whose files do not
// carry a split field.
std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path, Format format,
                                        Split default_split = Split::train);

// Claim list loader for synthesis and verdict benchmarks: canonical lines
// whose questions array may be empty or absent.
std::vector<Claim> load_claims(const std::filesystem::path& path);

// One pair per (claim, question), dataset order then question order.
std::vector<ClaimQuestionPair> expand_pairs(const std::vector<DatasetRecord>& records);

struct NamedPairs {
  std::string name;
  std::vector<ClaimQuestionPair> pairs;
};

struct CurriculumEntry {
  std::string name;
  std::size_t pair_count = 0;
  std::size_t position = 0;  // 0-based position in the export
};

struct CurriculumExport {
  std::vector<ClaimQuestionPair> pairs;
  std::vector<CurriculumEntry> manifest;
};

// Concatenates collections in ascending pair-count order (ties broken by
// name), preserving order within each collection. Duplicate collection names
// are a validation error.
CurriculumExport curriculum_order(const std::vector<NamedPairs>& collections);

DatasetStats compute_stats(const std::vector<DatasetRecord>& records);

std::string format_stats(const DatasetStats& stats);  // avg to 2 decimals

// Expected counts for a corpus, used to flag (not force) mismatches against
// published statistics tables.
struct DatasetManifest {
  std::optional<std::size_t> num_claims;
  std::optional<double> avg_questions;  // compared at 2-decimal precision
  std::optional<std::size_t> train_size;
  std::optional<std::size_t> test_size;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
std::vector<std::string> manifest_mismatches(const DatasetStats& stats,
                                             const DatasetManifest& manifest);

// Canonical writers. Pairs are written as single-question records keyed by
// pair_id so a curriculum export round-trips through load_dataset.
void write_canonical(const std::filesystem::path& path,
                     const std::vector<DatasetRecord>& records);
void write_pairs_canonical(const std::filesystem::path& path,
                           const std::vector<ClaimQuestionPair>& pairs, Split split);
void write_curriculum_manifest(const std::filesystem::path& path,
                               const std::vector<CurriculumEntry>& manifest);

}  // namespace factcheck::datasets
