#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "factcheck/config.hpp"
#include "factcheck/datasets.hpp"
#include "factcheck/metrics.hpp"
#include "factcheck/verification.hpp"

namespace factcheck::app {

struct QgBenchOptions {
  std::filesystem::path out_dir;
  std::string dataset_name = "dataset";
  std::vector<metrics::Metric> eval_metrics = {metrics::Metric::rouge1,
                                               metrics::Metric::rougeL,
                                               metrics::Metric::bleu};
  // Backend whose per-pair scores the others are t-tested against.
  std::optional<std::string> baseline_backend;
  double alpha = 0.05;
  // Faithful mode scores each (claim, reference) pair against the single
  // question generated for it. best_match scores each reference against the
  // highest-scoring question of an n-question set (labeled extension).
  bool best_match = false;
  int n_questions = 1;
};

struct QgBenchRow {
  std::string backend_id;
  metrics::CorpusReport report;
  std::map<metrics::Metric, std::vector<double>> per_pair_scores;
  std::vector<bool> per_pair_null;                  // parallel to the pair list
  std::map<metrics::Metric, double> p_values;       // vs baseline, when tested
  std::map<metrics::Metric, bool> significant;      // p <= alpha
  std::optional<std::string> error;                 // backend-level failure
};

struct QgBenchResult {
  std::vector<QgBenchRow> rows;
  std::filesystem::path tsv_path;
  std::filesystem::path txt_path;
  std::filesystem::path pairs_path;
};

// Generates one question set per unique claim per backend, scores every
// (claim, reference) pair with every metric, and emits the report table in
// machine (TSV) and human (aligned text) form with identical numbers.
// A backend failure becomes an error row; the run continues.
QgBenchResult run_qg_benchmark(
    const std::vector<datasets::DatasetRecord>& test_records,
    const std::vector<questiongen::GenerationBackend>& backends,
    std::map<std::string, std::shared_ptr<questiongen::GenerationClient>>& clients,
    const std::optional<questiongen::SamplingConfig>& sampling,
    const questiongen::PromptTemplate& prompt, const QgBenchOptions& options);

struct VerdictBenchOptions {
  std::filesystem::path out_dir;
};

struct VerdictBenchRow {
  std::string method;
  std::optional<metrics::ClassificationReport> report;
  std::size_t excluded = 0;  // abstentions: pipeline failures, never scored
  std::vector<std::string> exclusion_diagnostics;
  std::optional<std::string> error;  // method-level failure (e.g. no claim succeeded)
};

struct VerdictBenchResult {
  std::vector<VerdictBenchRow> rows;
  std::filesystem::path tsv_path;
  std::filesystem::path txt_path;
  std::filesystem::path items_path;
};

// Verifies every gold-labeled claim under every method and reports the
// classification suite per method. Per-claim failures are abstentions with
// diagnostics, excluded from F1 with an explicit count.
VerdictBenchResult run_verdict_benchmark(const std::vector<datasets::Claim>& claims,
                                         const std::vector<verification::Method>& methods,
                                         verification::PipelineProviders& providers,
                                         const verification::PipelineOptions& pipeline,
                                         const VerdictBenchOptions& options);

// Persists the run manifest: deterministic run id (hash of config snapshot +
// inputs), the config snapshot itself, dataset identifiers, and wall-clock
// metadata. Report files stay deterministic; volatile data lives only here.
std::filesystem::path write_run_manifest(const std::filesystem::path& out_dir,
                                         const nlohmann::json& config_snapshot,
                                         const std::vector<std::string>& dataset_ids,
                                         const std::string& command);

struct ScoreFileOptions {
  std::filesystem::path out_dir;
  std::string name = "scored";
  // Second scored-pairs file to t-test against; pairs are aligned by pair_id
  // and must match one-to-one.
  std::optional<std::filesystem::path> baseline;
  double alpha = 0.05;
};

struct ScoreFileResult {
  metrics::CorpusReport report;
  std::map<metrics::Metric, double> p_values;  // vs baseline, when given
  std::filesystem::path tsv_path;
  std::filesystem::path txt_path;
};

// Scores a precomputed generations file (external models produce these) with
// all three metrics and emits the same report pair as the live benchmark.
ScoreFileResult run_score_file(const std::filesystem::path& pairs_file,
                               const ScoreFileOptions& options);

struct AgreementResult {
  std::map<std::string, metrics::ModelEvalSummary> summaries;
  std::filesystem::path tsv_path;
  std::filesystem::path txt_path;
};

// Manual-evaluation aggregation: per-model means and weighted kappa.
AgreementResult run_agreement_report(const std::filesystem::path& annotations_file,
                                     const std::filesystem::path& out_dir);

}  // namespace factcheck::app
