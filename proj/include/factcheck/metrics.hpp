#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace factcheck::metrics {

using TokenSequence = std::vector<std::string>;

// Shared tokenization rule for all generation metrics: ASCII-lowercase, split
// on whitespace, then strip leading/trailing characters from the set
//   . , ; : ! ? ' " ( ) [ ] { } < > `
// from each token. Word-internal punctuation survives ("u.s." -> "u.s"), and
// symbol characters like % $ # are kept ("4%" stays "4%"). No stemming, no
// stopword removal. Tokens that strip to nothing are dropped.
TokenSequence tokenize(std::string_view text);

// Clipped n-gram F1 (beta = 1). Precision counts against candidate n-grams,
// recall against reference n-grams; a side with no n-grams scores 0.
double rouge_n(const TokenSequence& candidate, const TokenSequence& reference, int n);

// LCS-based F1: P = LCS/|candidate|, R = LCS/|reference|. Empty side -> 0.
double rouge_l(const TokenSequence& candidate, const TokenSequence& reference);

// Sentence-level BLEU, geometric mean of modified n-gram precisions for
// n = 1..max_n. Zero unigram matches -> 0. For n >= 2 a zero match count is
// add-one smoothed: p_n = 1 / (total_n + 1); total_n = 0 gives p_n = 1 so
// short candidates are not annihilated by impossible n-gram orders.
// Brevity penalty exp(1 - |ref|/|cand|) applies when |cand| < |ref|.
double bleu(const TokenSequence& candidate, const TokenSequence& reference, int max_n = 4);

enum class Metric { rouge1, rougeL, bleu };

std::string metric_name(Metric m);

struct PairScore {
  std::string pair_id;
  Metric metric = Metric::rouge1;
  double value = 0.0;
  bool null_generation = false;  // implies value == 0
};

// One (reference question, generated question) pair; a disengaged generation
// is a null generation and scores exactly 0.
struct ScoredPair {
  std::string pair_id;
  std::string reference;
  std::optional<std::string> generation;
};

struct Significance {
  std::string baseline_id;
  double t_statistic = 0.0;
  double p_value = 1.0;
};

struct CorpusReport {
  std::map<Metric, double> means;  // arithmetic mean over all pairs, nulls included
  std::size_t n_pairs = 0;
  std::size_t n_null = 0;
  std::optional<Significance> significance;
};

// Per-pair scores for one metric, in input order.
std::vector<PairScore> score_pairs(const std::vector<ScoredPair>& pairs, Metric metric);

// Corpus-level mean for each requested metric. Null generations contribute a
// 0 to every mean and are counted in n_null. Empty pair list is an error.
CorpusReport corpus_metric(const std::vector<ScoredPair>& pairs,
                           const std::vector<Metric>& metrics = {Metric::rouge1,
                                                                 Metric::rougeL,
                                                                 Metric::bleu});

enum class VerdictLabel { True, False };

struct ClassificationReport {
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  std::map<VerdictLabel, double> per_class_f1;
  // Confusion counts, gold x predicted.
  std::size_t true_true = 0;    // gold True, predicted True
  std::size_t true_false = 0;   // gold True, predicted False
  std::size_t false_true = 0;   // gold False, predicted True
  std::size_t false_false = 0;  // gold False, predicted False
  std::size_t n = 0;
};

// Per-class one-vs-rest F1; macro = unweighted mean of the two class F1s;
// micro from pooled counts (equals accuracy for this single-label binary task).
ClassificationReport classification_report(const std::vector<VerdictLabel>& predictions,
                                           const std::vector<VerdictLabel>& gold);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;  // two-sided
  std::size_t n = 0;
};

// Paired two-sided Student's t-test on per-pair differences a_i - b_i with
// n - 1 degrees of freedom. All-identical differences (zero variance) are a
// degenerate test and raise ComputationError rather than returning NaN.
TTestResult paired_t_test(const std::vector<double>& scores_a,
                          const std::vector<double>& scores_b);

enum class KappaWeighting { linear, quadratic };

// Weighted Cohen's kappa on the fixed ordinal scale 1..5:
//   kappa = 1 - sum(w * O) / sum(w * E)
// with observed counts O, chance-expected counts E from the marginals, and
// disagreement weights w_ij = |i-j| (linear) or (i-j)^2 (quadratic).
// Both annotators constant on the same category leaves the expectation
// undefined and raises ComputationError.
double weighted_kappa(const std::vector<int>& ratings_a, const std::vector<int>& ratings_b,
                      KappaWeighting weighting = KappaWeighting::quadratic);

struct AnnotationRecord {
  std::string model;  // system whose generated question was rated
  std::string claim_id;
  std::string question_id;
  std::string annotator_id;
  int usefulness = 0;  // 1..5
  int coverage = 0;    // 1..5
  int fluency = 0;     // 1..5
};

struct ModelEvalSummary {
  double usefulness = 0.0;
  double coverage = 0.0;
  double fluency = 0.0;
  double kappa = 0.0;  // pooled over the three dimensions
  std::size_t n_questions = 0;
};

// Requires exactly two annotators per (model, claim, question); means are
// arithmetic over annotators and questions. Kappa pairs the two annotators
// per item (ordered by annotator id, which kappa is symmetric under) and
// pools usefulness/coverage/fluency ratings.
std::map<std::string, ModelEvalSummary> manual_eval_report(
    const std::vector<AnnotationRecord>& annotations,
    KappaWeighting weighting = KappaWeighting::quadratic);

// File inputs. Scored pairs: one JSON object per line with pair_id,
// reference, and generation (a string, or null for a null generation).
// Annotations: one JSON object per line with the AnnotationRecord fields.
std::vector<ScoredPair> load_scored_pairs(const std::filesystem::path& path);
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);

}  // namespace factcheck::metrics
