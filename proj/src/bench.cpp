#include "factcheck/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "factcheck/cache.hpp"
#include "factcheck/error.hpp"

namespace factcheck::app {

namespace {

using metrics::Metric;
using nlohmann::json;

std::string fixed4(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", value);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write report: " + path.string());
  return out;
}

// One generation pass for a backend over the unique claims of the records.
struct BackendGenerations {
  // claim id -> generated questions (nullopt = null generation)
  std::unordered_map<std::string, std::optional<std::vector<std::string>>> by_claim;
};

BackendGenerations generate_for_records(
    const std::vector<datasets::DatasetRecord>& records,
    const questiongen::GenerationBackend& backend, questiongen::GenerationClient& client,
    const std::optional<questiongen::SamplingConfig>& sampling,
    const questiongen::PromptTemplate& prompt, int n) {
  std::optional<questiongen::SamplingConfig> effective = sampling;
  if (!effective && backend.kind == questiongen::BackendKind::fine_tuned_seq2seq) {
    effective = questiongen::SamplingConfig::seq2seq_defaults();
  }
  BackendGenerations generations;
  for (const auto& record : records) {
    if (generations.by_claim.count(record.claim.id)) continue;
    auto set = questiongen::generate_questions(record.claim, backend, client, effective, n,
                                               prompt);
    generations.by_claim[record.claim.id] = set.questions;
  }
  return generations;
}

}  // namespace

QgBenchResult run_qg_benchmark(
    const std::vector<datasets::DatasetRecord>& test_records,
    const std::vector<questiongen::GenerationBackend>& backends,
    std::map<std::string, std::shared_ptr<questiongen::GenerationClient>>& clients,
    const std::optional<questiongen::SamplingConfig>& sampling,
    const questiongen::PromptTemplate& prompt, const QgBenchOptions& options) {
  if (test_records.empty()) throw ValidationError("qg benchmark: empty dataset");
  if (backends.empty()) throw ValidationError("qg benchmark: no backends");
  for (const auto& record : test_records) {
    if (record.reference_questions.empty()) {
      throw ValidationError("qg benchmark: claim '" + record.claim.id +
                            "' has no reference questions");
    }
  }
  std::filesystem::create_directories(options.out_dir);

  const auto pairs = datasets::expand_pairs(test_records);
  QgBenchResult result;

  for (const auto& backend : backends) {
    QgBenchRow row;
    row.backend_id = backend.id;
    auto client_it = clients.find(backend.id);
    if (client_it == clients.end()) {
      row.error = "no client configured";
      result.rows.push_back(std::move(row));
      continue;
    }
    try {
      const int n = options.best_match ? std::max(options.n_questions, 1) : 1;
      const BackendGenerations generations = generate_for_records(
          test_records, backend, *client_it->second, sampling, prompt, n);

      // Faithful mode: one generation per pair (the set's first question).
      // best_match extension: each metric independently scores the reference
      // against its own max-scoring generated question.
      auto scored_for = [&](Metric metric) {
        std::vector<metrics::ScoredPair> scored;
        scored.reserve(pairs.size());
        for (const auto& pair : pairs) {
          metrics::ScoredPair sp;
          sp.pair_id = pair.pair_id;
          sp.reference = pair.reference_question;
          const auto& questions = generations.by_claim.at(pair.claim.id);
          if (questions.has_value() && !questions->empty()) {
            if (options.best_match) {
              double best = -1.0;
              for (const auto& question : *questions) {
                metrics::ScoredPair probe{pair.pair_id, pair.reference_question, question};
                const double score = metrics::score_pairs({probe}, metric)[0].value;
                if (score > best) {
                  best = score;
                  sp.generation = question;
                }
              }
            } else {
              sp.generation = questions->front();
            }
          }
          scored.push_back(std::move(sp));
        }
        return scored;
      };

      for (Metric metric : options.eval_metrics) {
        const auto scored = scored_for(metric);
        const auto report = metrics::corpus_metric(scored, {metric});
        row.report.means[metric] = report.means.at(metric);
        row.report.n_pairs = report.n_pairs;
        row.report.n_null = report.n_null;
        if (row.per_pair_null.empty()) {
          row.per_pair_null.reserve(scored.size());
          for (const auto& sp : scored) {
            row.per_pair_null.push_back(!sp.generation.has_value());
          }
        }
        const auto per_pair = metrics::score_pairs(scored, metric);
        auto& values = row.per_pair_scores[metric];
        values.reserve(per_pair.size());
        for (const auto& score : per_pair) values.push_back(score.value);
      }
    } catch (const Error& e) {
      row.error = e.what();
    }
    result.rows.push_back(std::move(row));
  }

  // Significance against the baseline backend's per-pair scores.
  if (options.baseline_backend) {
    const QgBenchRow* baseline = nullptr;
    for (const auto& row : result.rows) {
      if (row.backend_id == *options.baseline_backend && !row.error) baseline = &row;
    }
    if (!baseline) {
      throw ValidationError("qg benchmark: baseline backend '" +
                            *options.baseline_backend + "' missing or failed");
    }
    for (auto& row : result.rows) {
      if (row.error || row.backend_id == baseline->backend_id) continue;
      for (Metric metric : options.eval_metrics) {
        try {
          const auto test = metrics::paired_t_test(row.per_pair_scores.at(metric),
                                                   baseline->per_pair_scores.at(metric));
          row.p_values[metric] = test.p;
          row.significant[metric] = test.p <= options.alpha;
          if (metric == options.eval_metrics.front()) {
            row.report.significance =
                metrics::Significance{baseline->backend_id, test.t, test.p};
          }
        } catch (const ComputationError&) {
          // Identical score vectors: no evidence of a difference.
          row.p_values[metric] = 1.0;
          row.significant[metric] = false;
        }
      }
    }
  }

  // Machine-readable table.
  result.tsv_path = options.out_dir / "qg_report.tsv";
  {
    auto out = open_out(result.tsv_path);
    out << "backend\tdataset";
    for (Metric metric : options.eval_metrics) out << '\t' << metrics::metric_name(metric);
    out << "\tn_pairs\tn_null";
    for (Metric metric : options.eval_metrics) {
      out << "\tp_" << metrics::metric_name(metric);
    }
    out << "\terror\n";
    for (const auto& row : result.rows) {
      out << row.backend_id << '\t' << options.dataset_name;
      for (Metric metric : options.eval_metrics) {
        out << '\t' << (row.error ? "-" : fixed4(row.report.means.at(metric)));
      }
      if (row.error) {
        out << "\t-\t-";
      } else {
        out << '\t' << row.report.n_pairs << '\t' << row.report.n_null;
      }
      for (Metric metric : options.eval_metrics) {
        auto it = row.p_values.find(metric);
        out << '\t' << (it == row.p_values.end() ? "-" : fixed4(it->second));
      }
      out << '\t' << (row.error ? *row.error : "-") << '\n';
    }
  }

  // Human-readable table with the same numbers; dagger marks p <= alpha.
  result.txt_path = options.out_dir / "qg_report.txt";
  {
    auto out = open_out(result.txt_path);
    out << "Question generation evaluation, dataset: " << options.dataset_name << "\n";
    out << std::left << std::setw(16) << "backend";
    for (Metric metric : options.eval_metrics) {
      out << std::setw(12) << metrics::metric_name(metric);
    }
    out << std::setw(9) << "n_pairs" << std::setw(8) << "n_null" << "\n";
    for (const auto& row : result.rows) {
      out << std::left << std::setw(16) << row.backend_id;
      if (row.error) {
        out << "ERROR: " << *row.error << "\n";
        continue;
      }
      for (Metric metric : options.eval_metrics) {
        std::string cell = fixed4(row.report.means.at(metric));
        auto sig = row.significant.find(metric);
        if (sig != row.significant.end() && sig->second) cell += "+";
        out << std::setw(12) << cell;
      }
      out << std::setw(9) << row.report.n_pairs << std::setw(8) << row.report.n_null
          << "\n";
    }
    if (options.baseline_backend) {
      out << "+ = significant vs " << *options.baseline_backend
          << " (paired t-test, p <= " << fixed4(options.alpha) << ")\n";
    }
  }

  // Per-pair scores, for reconstruction and external significance checks.
  result.pairs_path = options.out_dir / "qg_pairs.tsv";
  {
    auto out = open_out(result.pairs_path);
    out << "backend\tpair_id\tmetric\tscore\tnull\n";
    for (const auto& row : result.rows) {
      if (row.error) continue;
      for (Metric metric : options.eval_metrics) {
        const auto& values = row.per_pair_scores.at(metric);
        for (std::size_t i = 0; i < values.size(); ++i) {
          out << row.backend_id << '\t' << pairs[i].pair_id << '\t'
              << metrics::metric_name(metric) << '\t' << fixed4(values[i]) << '\t'
              << (row.per_pair_null[i] ? "yes" : "no") << '\n';
        }
      }
    }
  }
  return result;
}

VerdictBenchResult run_verdict_benchmark(const std::vector<datasets::Claim>& claims,
                                         const std::vector<verification::Method>& methods,
                                         verification::PipelineProviders& providers,
                                         const verification::PipelineOptions& pipeline,
                                         const VerdictBenchOptions& options) {
  if (claims.empty()) throw ValidationError("verdict benchmark: no claims");
  if (methods.empty()) throw ValidationError("verdict benchmark: no methods");
  for (const auto& claim : claims) {
    if (!claim.gold_label || (!claim.gold_label->is_true() && !claim.gold_label->is_false())) {
      throw ValidationError("verdict benchmark: claim '" + claim.id +
                            "' lacks a gold True/False label");
    }
  }
  std::filesystem::create_directories(options.out_dir);

  VerdictBenchResult result;
  result.items_path = options.out_dir / "verdict_items.tsv";
  auto items = open_out(result.items_path);
  items << "method\tclaim_id\tgold\tpredicted\n";

  for (const auto& method : methods) {
    VerdictBenchRow row;
    row.method = method.describe();
    std::vector<metrics::VerdictLabel> predictions;
    std::vector<metrics::VerdictLabel> gold;
    for (const auto& claim : claims) {
      const auto gold_label = claim.gold_label->is_true() ? metrics::VerdictLabel::True
                                                          : metrics::VerdictLabel::False;
      try {
        const auto outcome = verification::verify_claim(claim, method, providers, pipeline);
        predictions.push_back(outcome.verdict.label);
        gold.push_back(gold_label);
        items << row.method << '\t' << claim.id << '\t'
              << verification::verdict_label_name(gold_label) << '\t'
              << verification::verdict_label_name(outcome.verdict.label) << '\n';
      } catch (const Error& e) {
        ++row.excluded;
        row.exclusion_diagnostics.push_back(claim.id + ": " + e.what());
        items << row.method << '\t' << claim.id << '\t'
              << verification::verdict_label_name(gold_label) << "\tABSTAIN\n";
      }
    }
    if (predictions.empty()) {
      row.error = "every claim failed for this method";
    } else {
      row.report = metrics::classification_report(predictions, gold);
    }
    result.rows.push_back(std::move(row));
  }

  result.tsv_path = options.out_dir / "verdict_report.tsv";
  {
    auto out = open_out(result.tsv_path);
    out << "method\tmacro_f1\tmicro_f1\ttrue_f1\tfalse_f1\tn\texcluded\terror\n";
    for (const auto& row : result.rows) {
      out << row.method;
      if (row.report) {
        out << '\t' << fixed4(row.report->macro_f1) << '\t' << fixed4(row.report->micro_f1)
            << '\t' << fixed4(row.report->per_class_f1.at(metrics::VerdictLabel::True))
            << '\t' << fixed4(row.report->per_class_f1.at(metrics::VerdictLabel::False))
            << '\t' << row.report->n;
      } else {
        out << "\t-\t-\t-\t-\t0";
      }
      out << '\t' << row.excluded << '\t' << (row.error ? *row.error : "-") << '\n';
    }
  }
  result.txt_path = options.out_dir / "verdict_report.txt";
  {
    auto out = open_out(result.txt_path);
    out << "Veracity prediction evaluation\n";
    out << std::left << std::setw(24) << "method" << std::setw(10) << "macro"
        << std::setw(10) << "micro" << std::setw(10) << "true" << std::setw(10) << "false"
        << std::setw(6) << "n" << std::setw(10) << "excluded" << "\n";
    for (const auto& row : result.rows) {
      out << std::left << std::setw(24) << row.method;
      if (row.report) {
        out << std::setw(10) << fixed4(row.report->macro_f1) << std::setw(10)
            << fixed4(row.report->micro_f1) << std::setw(10)
            << fixed4(row.report->per_class_f1.at(metrics::VerdictLabel::True))
            << std::setw(10)
            << fixed4(row.report->per_class_f1.at(metrics::VerdictLabel::False))
            << std::setw(6) << row.report->n << std::setw(10) << row.excluded << "\n";
      } else {
        out << "ERROR: " << (row.error ? *row.error : "no verdicts") << "\n";
      }
    }
  }
  return result;
}

ScoreFileResult run_score_file(const std::filesystem::path& pairs_file,
                               const ScoreFileOptions& options) {
  const std::vector<Metric> eval_metrics = {Metric::rouge1, Metric::rougeL, Metric::bleu};
  const auto pairs = metrics::load_scored_pairs(pairs_file);
  std::filesystem::create_directories(options.out_dir);

  ScoreFileResult result;
  result.report = metrics::corpus_metric(pairs, eval_metrics);

  if (options.baseline) {
    const auto baseline_pairs = metrics::load_scored_pairs(*options.baseline);
    if (baseline_pairs.size() != pairs.size()) {
      throw ValidationError("score: baseline has " + std::to_string(baseline_pairs.size()) +
                            " pairs, input has " + std::to_string(pairs.size()));
    }
    std::unordered_map<std::string, std::size_t> baseline_index;
    for (std::size_t i = 0; i < baseline_pairs.size(); ++i) {
      baseline_index[baseline_pairs[i].pair_id] = i;
    }
    for (Metric metric : eval_metrics) {
      const auto mine = metrics::score_pairs(pairs, metric);
      const auto theirs = metrics::score_pairs(baseline_pairs, metric);
      std::vector<double> a(pairs.size()), b(pairs.size());
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto it = baseline_index.find(pairs[i].pair_id);
        if (it == baseline_index.end()) {
          throw ValidationError("score: baseline lacks pair '" + pairs[i].pair_id + "'");
        }
        a[i] = mine[i].value;
        b[i] = theirs[it->second].value;
      }
      try {
        const auto test = metrics::paired_t_test(a, b);
        result.p_values[metric] = test.p;
        if (metric == eval_metrics.front()) {
          result.report.significance =
              metrics::Significance{options.baseline->string(), test.t, test.p};
        }
      } catch (const ComputationError&) {
        result.p_values[metric] = 1.0;
      }
    }
  }

  result.tsv_path = options.out_dir / "score_report.tsv";
  {
    auto out = open_out(result.tsv_path);
    out << "name";
    for (Metric metric : eval_metrics) out << '\t' << metrics::metric_name(metric);
    out << "\tn_pairs\tn_null";
    for (Metric metric : eval_metrics) out << "\tp_" << metrics::metric_name(metric);
    out << '\n' << options.name;
    for (Metric metric : eval_metrics) out << '\t' << fixed4(result.report.means.at(metric));
    out << '\t' << result.report.n_pairs << '\t' << result.report.n_null;
    for (Metric metric : eval_metrics) {
      const auto it = result.p_values.find(metric);
      out << '\t' << (it == result.p_values.end() ? "-" : fixed4(it->second));
    }
    out << '\n';
  }
  result.txt_path = options.out_dir / "score_report.txt";
  {
    auto out = open_out(result.txt_path);
    out << "Generation scores, input: " << options.name << "\n";
    for (Metric metric : eval_metrics) {
      out << std::left << std::setw(8) << metrics::metric_name(metric)
          << fixed4(result.report.means.at(metric));
      const auto it = result.p_values.find(metric);
      if (it != result.p_values.end()) {
        out << "  (p=" << fixed4(it->second) << (it->second <= options.alpha ? ", +" : "")
            << ")";
      }
      out << "\n";
    }
    out << "pairs: " << result.report.n_pairs << ", null: " << result.report.n_null << "\n";
  }
  return result;
}

AgreementResult run_agreement_report(const std::filesystem::path& annotations_file,
                                     const std::filesystem::path& out_dir) {
  AgreementResult result;
  result.summaries = metrics::manual_eval_report(metrics::load_annotations(annotations_file));
  std::filesystem::create_directories(out_dir);
  result.tsv_path = out_dir / "agreement_report.tsv";
  {
    auto out = open_out(result.tsv_path);
    out << "model\tusefulness\tcoverage\tfluency\tweighted_kappa\tn_questions\n";
    for (const auto& [model, summary] : result.summaries) {
      out << model << '\t' << fixed4(summary.usefulness) << '\t' << fixed4(summary.coverage)
          << '\t' << fixed4(summary.fluency) << '\t' << fixed4(summary.kappa) << '\t'
          << summary.n_questions << '\n';
    }
  }
  result.txt_path = out_dir / "agreement_report.txt";
  {
    auto out = open_out(result.txt_path);
    out << "Manual evaluation (usefulness, coverage, fluency; weighted kappa)\n";
    out << std::left << std::setw(16) << "model" << std::setw(12) << "usefulness"
        << std::setw(10) << "coverage" << std::setw(10) << "fluency" << std::setw(10)
        << "kappa" << std::setw(8) << "items" << "\n";
    for (const auto& [model, summary] : result.summaries) {
      out << std::left << std::setw(16) << model << std::setw(12)
          << fixed4(summary.usefulness) << std::setw(10) << fixed4(summary.coverage)
          << std::setw(10) << fixed4(summary.fluency) << std::setw(10)
          << fixed4(summary.kappa) << std::setw(8) << summary.n_questions << "\n";
    }
  }
  return result;
}

std::filesystem::path write_run_manifest(const std::filesystem::path& out_dir,
                                         const json& config_snapshot,
                                         const std::vector<std::string>& dataset_ids,
                                         const std::string& command) {
  std::filesystem::create_directories(out_dir);
  json manifest;
  std::string id_material = command + "\n" + config_snapshot.dump();
  for (const auto& id : dataset_ids) id_material += "\n" + id;
  manifest["run_id"] = sha256_hex(id_material).substr(0, 16);
  manifest["command"] = command;
  manifest["config"] = config_snapshot;
  manifest["datasets"] = dataset_ids;
  const auto now = std::chrono::system_clock::now();
  manifest["wall_clock_unix_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
  const auto path = out_dir / "run.json";
  auto out = open_out(path);
  out << manifest.dump(2) << '\n';
  return path;
}

}  // namespace factcheck::app
