#include "factcheck/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "factcheck/error.hpp"
#include "factcheck/text.hpp"

namespace factcheck::metrics {

namespace {

constexpr std::string_view kStripChars = ".,;:!?'\"()[]{}<>`";

bool strippable(char c) { return kStripChars.find(c) != std::string_view::npos; }

// n-gram multiset keyed by separator-joined tokens. Tokens never contain
// whitespace, so '\x1f' join is unambiguous.
std::unordered_map<std::string, int> ngram_counts(const TokenSequence& tokens, int n) {
  std::unordered_map<std::string, int> counts;
  if (n <= 0 || tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int j = 1; j < n; ++j) {
      key.push_back('\x1f');
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

// Clipped matches: sum over candidate n-grams of min(count_cand, count_ref).
std::size_t clipped_matches(const std::unordered_map<std::string, int>& cand,
                            const std::unordered_map<std::string, int>& ref) {
  std::size_t matches = 0;
  for (const auto& [gram, count] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) matches += std::min(count, it->second);
  }
  return matches;
}

double f1(double precision, double recall) {
  if (precision <= 0.0 || recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double score_one(const TokenSequence& cand, const TokenSequence& ref, Metric metric) {
  switch (metric) {
    case Metric::rouge1:
      return rouge_n(cand, ref, 1);
    case Metric::rougeL:
      return rouge_l(cand, ref);
    case Metric::bleu:
      return bleu(cand, ref);
  }
  return 0.0;
}

}  // namespace

TokenSequence tokenize(std::string_view raw) {
  const std::string lowered = text::lowercase_ascii(raw);
  TokenSequence tokens;
  std::istringstream in(lowered);
  std::string word;
  while (in >> word) {
    std::size_t begin = 0;
    std::size_t end = word.size();
    while (begin < end && strippable(word[begin])) ++begin;
    while (end > begin && strippable(word[end - 1])) --end;
    if (end > begin) tokens.push_back(word.substr(begin, end - begin));
  }
  return tokens;
}

double rouge_n(const TokenSequence& candidate, const TokenSequence& reference, int n) {
  if (n < 1) throw ValidationError("rouge_n: n must be >= 1");
  const auto cand = ngram_counts(candidate, n);
  const auto ref = ngram_counts(reference, n);
  std::size_t cand_total = candidate.size() >= static_cast<std::size_t>(n)
                               ? candidate.size() - n + 1
                               : 0;
  std::size_t ref_total = reference.size() >= static_cast<std::size_t>(n)
                              ? reference.size() - n + 1
                              : 0;
  if (cand_total == 0 || ref_total == 0) return 0.0;
  const double matches = static_cast<double>(clipped_matches(cand, ref));
  return f1(matches / cand_total, matches / ref_total);
}

double rouge_l(const TokenSequence& candidate, const TokenSequence& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const std::size_t nc = candidate.size();
  const std::size_t nr = reference.size();
  // Two-row LCS table.
  std::vector<std::size_t> prev(nr + 1, 0), cur(nr + 1, 0);
  for (std::size_t i = 1; i <= nc; ++i) {
    for (std::size_t j = 1; j <= nr; ++j) {
      if (candidate[i - 1] == reference[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  const double lcs = static_cast<double>(prev[nr]);
  return f1(lcs / nc, lcs / nr);
}

double bleu(const TokenSequence& candidate, const TokenSequence& reference, int max_n) {
  if (max_n < 1) throw ValidationError("bleu: max_n must be >= 1");
  if (candidate.empty()) return 0.0;

  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const std::size_t total = candidate.size() >= static_cast<std::size_t>(n)
                                  ? candidate.size() - n + 1
                                  : 0;
    const std::size_t matches =
        clipped_matches(ngram_counts(candidate, n), ngram_counts(reference, n));
    double p;
    if (matches > 0) {
      p = static_cast<double>(matches) / static_cast<double>(total);
    } else if (n == 1) {
      return 0.0;  // no unigram overlap at all
    } else {
      p = 1.0 / static_cast<double>(total + 1);  // add-one smoothing
    }
    log_sum += std::log(p);
  }
  double score = std::exp(log_sum / max_n);

  if (candidate.size() < reference.size()) {
    score *= std::exp(1.0 - static_cast<double>(reference.size()) /
                                static_cast<double>(candidate.size()));
  }
  return score;
}

std::string metric_name(Metric m) {
  switch (m) {
    case Metric::rouge1:
      return "rouge1";
    case Metric::rougeL:
      return "rougeL";
    case Metric::bleu:
      return "bleu";
  }
  return "?";
}

std::vector<PairScore> score_pairs(const std::vector<ScoredPair>& pairs, Metric metric) {
  std::vector<PairScore> out;
  out.reserve(pairs.size());
  for (const auto& pair : pairs) {
    PairScore score;
    score.pair_id = pair.pair_id;
    score.metric = metric;
    if (!pair.generation.has_value()) {
      score.null_generation = true;
      score.value = 0.0;
    } else {
      score.value =
          score_one(tokenize(*pair.generation), tokenize(pair.reference), metric);
    }
    out.push_back(std::move(score));
  }
  return out;
}

CorpusReport corpus_metric(const std::vector<ScoredPair>& pairs,
                           const std::vector<Metric>& metrics) {
  if (pairs.empty()) throw ValidationError("corpus_metric: empty pair list");
  CorpusReport report;
  report.n_pairs = pairs.size();
  for (const auto& pair : pairs) {
    if (!pair.generation.has_value()) ++report.n_null;
  }
  for (Metric metric : metrics) {
    double sum = 0.0;
    for (const auto& score : score_pairs(pairs, metric)) sum += score.value;
    report.means[metric] = sum / static_cast<double>(pairs.size());
  }
  return report;
}

ClassificationReport classification_report(const std::vector<VerdictLabel>& predictions,
                                           const std::vector<VerdictLabel>& gold) {
  if (predictions.size() != gold.size()) {
    throw ValidationError("classification_report: predictions and gold differ in length");
  }
  if (predictions.empty()) {
    throw ValidationError("classification_report: empty input");
  }

  ClassificationReport report;
  report.n = predictions.size();
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool g = gold[i] == VerdictLabel::True;
    const bool p = predictions[i] == VerdictLabel::True;
    if (g && p) ++report.true_true;
    if (g && !p) ++report.true_false;
    if (!g && p) ++report.false_true;
    if (!g && !p) ++report.false_false;
  }

  auto class_f1 = [](std::size_t tp, std::size_t fp, std::size_t fn) {
    const double p = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    return f1(p, r);
  };
  // One-vs-rest: for True, the False-predicted golds of True are misses.
  const double true_f1 = class_f1(report.true_true, report.false_true, report.true_false);
  const double false_f1 = class_f1(report.false_false, report.true_false, report.false_true);
  report.per_class_f1[VerdictLabel::True] = true_f1;
  report.per_class_f1[VerdictLabel::False] = false_f1;
  report.macro_f1 = (true_f1 + false_f1) / 2.0;

  // Micro over pooled one-vs-rest counts; for single-label binary this is
  // exactly accuracy.
  const std::size_t tp = report.true_true + report.false_false;
  const std::size_t fp = report.false_true + report.true_false;
  const std::size_t fn = report.true_false + report.false_true;
  const double micro_p = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  const double micro_r = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  report.micro_f1 = f1(micro_p, micro_r);
  return report;
}

TTestResult paired_t_test(const std::vector<double>& scores_a,
                          const std::vector<double>& scores_b) {
  if (scores_a.size() != scores_b.size()) {
    throw ValidationError("paired_t_test: input lengths differ");
  }
  const std::size_t n = scores_a.size();
  if (n < 2) throw ValidationError("paired_t_test: need at least 2 pairs");

  std::vector<double> diffs(n);
  for (std::size_t i = 0; i < n; ++i) diffs[i] = scores_a[i] - scores_b[i];

  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= static_cast<double>(n);

  double ss = 0.0;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  const double variance = ss / static_cast<double>(n - 1);
  if (variance == 0.0) {
    throw ComputationError("paired_t_test: zero-variance differences (degenerate test)");
  }

  TTestResult result;
  result.n = n;
  result.t = mean / std::sqrt(variance / static_cast<double>(n));
  boost::math::students_t_distribution<double> dist(static_cast<double>(n - 1));
  result.p = 2.0 * boost::math::cdf(dist, -std::abs(result.t));
  return result;
}

double weighted_kappa(const std::vector<int>& ratings_a, const std::vector<int>& ratings_b,
                      KappaWeighting weighting) {
  if (ratings_a.size() != ratings_b.size()) {
    throw ValidationError("weighted_kappa: input lengths differ");
  }
  const std::size_t n = ratings_a.size();
  if (n < 2) throw ValidationError("weighted_kappa: need at least 2 ratings");

  constexpr int kCategories = 5;  // fixed ordinal scale 1..5
  auto check = [](int r) {
    if (r < 1 || r > kCategories) {
      throw ValidationError("weighted_kappa: rating " + std::to_string(r) +
                            " outside scale 1..5");
    }
  };

  double observed[kCategories][kCategories] = {};
  double row_marginal[kCategories] = {};
  double col_marginal[kCategories] = {};
  for (std::size_t i = 0; i < n; ++i) {
    check(ratings_a[i]);
    check(ratings_b[i]);
    const int a = ratings_a[i] - 1;
    const int b = ratings_b[i] - 1;
    observed[a][b] += 1.0;
    row_marginal[a] += 1.0;
    col_marginal[b] += 1.0;
  }

  auto weight = [&](int i, int j) {
    const double d = static_cast<double>(i - j);
    return weighting == KappaWeighting::linear ? std::abs(d) : d * d;
  };

  double weighted_observed = 0.0;
  double weighted_expected = 0.0;
  for (int i = 0; i < kCategories; ++i) {
    for (int j = 0; j < kCategories; ++j) {
      const double w = weight(i, j);
      weighted_observed += w * observed[i][j];
      weighted_expected += w * row_marginal[i] * col_marginal[j] / static_cast<double>(n);
    }
  }
  if (weighted_expected == 0.0) {
    throw ComputationError(
        "weighted_kappa: undefined expectation (both annotators constant on one category)");
  }
  return 1.0 - weighted_observed / weighted_expected;
}

std::map<std::string, ModelEvalSummary> manual_eval_report(
    const std::vector<AnnotationRecord>& annotations, KappaWeighting weighting) {
  if (annotations.empty()) throw ValidationError("manual_eval_report: no annotations");

  auto check_scale = [](const AnnotationRecord& r) {
    for (int v : {r.usefulness, r.coverage, r.fluency}) {
      if (v < 1 || v > 5) {
        throw ValidationError("manual_eval_report: rating outside 1..5 for question '" +
                              r.question_id + "'");
      }
    }
  };

  // model -> item key -> the records for that question.
  std::map<std::string, std::map<std::string, std::vector<AnnotationRecord>>> grouped;
  for (const auto& record : annotations) {
    check_scale(record);
    grouped[record.model][record.claim_id + "\x1f" + record.question_id].push_back(record);
  }

  std::map<std::string, ModelEvalSummary> out;
  for (auto& [model, items] : grouped) {
    std::string incomplete;
    std::vector<int> first_ratings, second_ratings;
    double sum_u = 0.0, sum_c = 0.0, sum_f = 0.0;
    std::size_t n_ratings = 0;
    for (auto& [key, records] : items) {
      if (records.size() != 2) {
        const auto sep = key.find('\x1f');
        incomplete += (incomplete.empty() ? "" : ", ") + key.substr(0, sep) + "/" +
                      key.substr(sep + 1);
        continue;
      }
      auto& a = records[0];
      auto& b = records[1];
      if (a.annotator_id > b.annotator_id) std::swap(a, b);
      for (const auto& r : records) {
        sum_u += r.usefulness;
        sum_c += r.coverage;
        sum_f += r.fluency;
        ++n_ratings;
      }
      first_ratings.insert(first_ratings.end(), {a.usefulness, a.coverage, a.fluency});
      second_ratings.insert(second_ratings.end(), {b.usefulness, b.coverage, b.fluency});
    }
    if (!incomplete.empty()) {
      throw ValidationError("manual_eval_report: model '" + model +
                            "' items without exactly two annotators: " + incomplete);
    }
    ModelEvalSummary summary;
    summary.n_questions = items.size();
    summary.usefulness = sum_u / static_cast<double>(n_ratings);
    summary.coverage = sum_c / static_cast<double>(n_ratings);
    summary.fluency = sum_f / static_cast<double>(n_ratings);
    summary.kappa = weighted_kappa(first_ratings, second_ratings, weighting);
    out[model] = summary;
  }
  return out;
}

std::vector<ScoredPair> load_scored_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scored-pairs file: " + path.string());
  std::vector<ScoredPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw ParseError("not a JSON object", line_no);
    }
    ScoredPair pair;
    if (!obj.contains("pair_id") || !obj["pair_id"].is_string()) {
      throw ParseError("missing string 'pair_id'", line_no);
    }
    if (!obj.contains("reference") || !obj["reference"].is_string()) {
      throw ParseError("missing string 'reference'", line_no);
    }
    pair.pair_id = obj["pair_id"].get<std::string>();
    pair.reference = obj["reference"].get<std::string>();
    if (obj.contains("generation") && !obj["generation"].is_null()) {
      if (!obj["generation"].is_string()) {
        throw ParseError("'generation' must be a string or null", line_no);
      }
      pair.generation = obj["generation"].get<std::string>();
    }
    pairs.push_back(std::move(pair));
  }
  if (pairs.empty()) throw ValidationError("scored-pairs file is empty: " + path.string());
  return pairs;
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotations file: " + path.string());
  std::vector<AnnotationRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw ParseError("not a JSON object", line_no);
    }
    AnnotationRecord record;
    auto str = [&](const char* key) {
      if (!obj.contains(key) || !obj[key].is_string()) {
        throw ParseError(std::string("missing string '") + key + "'", line_no);
      }
      return obj[key].get<std::string>();
    };
    auto rating = [&](const char* key) {
      if (!obj.contains(key) || !obj[key].is_number_integer()) {
        throw ParseError(std::string("missing integer '") + key + "'", line_no);
      }
      return obj[key].get<int>();
    };
    record.model = str("model");
    record.claim_id = str("claim_id");
    record.question_id = str("question_id");
    record.annotator_id = str("annotator_id");
    record.usefulness = rating("usefulness");
    record.coverage = rating("coverage");
    record.fluency = rating("fluency");
    records.push_back(std::move(record));
  }
  if (records.empty()) throw ValidationError("annotations file is empty: " + path.string());
  return records;
}

}  // namespace factcheck::metrics
