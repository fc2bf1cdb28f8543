#include "factcheck/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "factcheck/error.hpp"
#include "factcheck/text.hpp"

namespace factcheck::datasets {

namespace {

using nlohmann::json;

json parse_json_line(const std::string& line, std::size_t line_no) {
  json value = json::parse(line, nullptr, false);
  if (value.is_discarded() || !value.is_object()) {
    throw ParseError("not a JSON object", line_no);
  }
  return value;
}

std::string require_string(const json& obj, const char* key, std::size_t line_no) {
  if (!obj.contains(key) || !obj[key].is_string()) {
    throw ParseError(std::string("missing or non-string field '") + key + "'", line_no);
  }
  return obj[key].get<std::string>();
}

// Invariant checks shared by every format. line_no = 0 for whole-file formats.
void validate_record(const DatasetRecord& record, std::size_t line_no,
                     std::unordered_set<std::string>& seen_ids) {
  if (record.claim.id.empty()) throw ParseError("empty claim id", line_no);
  if (text::trim(record.claim.text).empty()) {
    throw ParseError("empty claim text for id '" + record.claim.id + "'", line_no);
  }
  if (!seen_ids.insert(record.claim.id).second) {
    throw ParseError("duplicate claim id '" + record.claim.id + "'", line_no);
  }
  std::unordered_set<std::string> seen_questions;
  for (const auto& q : record.reference_questions) {
    const std::string normalized = text::normalize_whitespace(q);
    if (normalized.empty()) {
      throw ParseError("empty question for claim '" + record.claim.id + "'", line_no);
    }
    if (!seen_questions.insert(normalized).second) {
      throw ParseError("duplicate question for claim '" + record.claim.id + "'", line_no);
    }
  }
}

DatasetRecord record_from_canonical(const json& obj, std::size_t line_no) {
  DatasetRecord record;
  record.claim.id = require_string(obj, "id", line_no);
  record.claim.text = require_string(obj, "claim", line_no);
  if (obj.contains("questions")) {
    if (!obj["questions"].is_array()) throw ParseError("'questions' is not an array", line_no);
    for (const auto& q : obj["questions"]) {
      if (!q.is_string()) throw ParseError("non-string question", line_no);
      record.reference_questions.push_back(q.get<std::string>());
    }
  }
  record.split = parse_split(require_string(obj, "split", line_no));
  if (obj.contains("source")) record.claim.source = require_string(obj, "source", line_no);
  if (obj.contains("label")) {
    record.claim.gold_label = GoldLabel{require_string(obj, "label", line_no)};
  }
  if (obj.contains("language")) {
    record.claim.language = require_string(obj, "language", line_no);
  }
  for (const auto& [key, _] : obj.items()) {
    static const std::set<std::string> known = {"id",     "claim", "questions",
                                                "split",  "source", "label",
                                                "language"};
    if (!known.count(key)) throw ParseError("unknown field '" + key + "'", line_no);
  }
  return record;
}

std::vector<DatasetRecord> load_canonical(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path.string());
  std::vector<DatasetRecord> records;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    DatasetRecord record = record_from_canonical(parse_json_line(line, line_no), line_no);
    validate_record(record, line_no, seen_ids);
    records.push_back(std::move(record));
  }
  return records;
}

// AVeriTeC publishes one JSON array per split; items carry "claim" and
// "questions" (objects with a "question" field), plus an optional "label".
std::vector<DatasetRecord> load_averitec(const std::filesystem::path& path,
                                         Split default_split) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path.string());
  json root = json::parse(in, nullptr, false);
  if (root.is_discarded() || !root.is_array()) {
    throw ParseError("averitec file is not a JSON array");
  }
  std::vector<DatasetRecord> records;
  std::unordered_set<std::string> seen_ids;
  std::size_t index = 0;
  for (const auto& item : root) {
    if (!item.is_object() || !item.contains("claim") || !item["claim"].is_string()) {
      throw ParseError("averitec item " + std::to_string(index) + " lacks a claim");
    }
    DatasetRecord record;
    record.claim.id = "averitec-" + std::to_string(index);
    record.claim.text = item["claim"].get<std::string>();
    record.claim.source = "averitec";
    record.split = default_split;
    if (item.contains("label") && item["label"].is_string()) {
      record.claim.gold_label = GoldLabel{item["label"].get<std::string>()};
    }
    if (item.contains("questions") && item["questions"].is_array()) {
      std::unordered_set<std::string> seen;
      for (const auto& q : item["questions"]) {
        std::string question;
        if (q.is_string()) {
          question = q.get<std::string>();
        } else if (q.is_object() && q.contains("question") && q["question"].is_string()) {
          question = q["question"].get<std::string>();
        } else {
          continue;
        }
        if (seen.insert(text::normalize_whitespace(question)).second &&
            !text::normalize_whitespace(question).empty()) {
          record.reference_questions.push_back(question);
        }
      }
    }
    validate_record(record, 0, seen_ids);
    records.push_back(std::move(record));
    ++index;
  }
  return records;
}

// ClaimDecomp ships JSON lines with "example_id", "claim", "label" and
// per-annotator "annotations" each holding a "questions" array. Questions are
// unioned across annotators, first occurrence wins.
std::vector<DatasetRecord> load_claimdecomp(const std::filesystem::path& path,
                                            Split default_split) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path.string());
  std::vector<DatasetRecord> records;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json obj = parse_json_line(line, line_no);
    DatasetRecord record;
    if (obj.contains("example_id")) {
      record.claim.id = obj["example_id"].is_string()
                            ? obj["example_id"].get<std::string>()
                            : obj["example_id"].dump();
    } else {
      record.claim.id = "claimdecomp-" + std::to_string(line_no);
    }
    record.claim.text = require_string(obj, "claim", line_no);
    record.claim.source = "claimdecomp";
    record.split = default_split;
    if (obj.contains("label") && obj["label"].is_string()) {
      record.claim.gold_label = GoldLabel{obj["label"].get<std::string>()};
    }
    std::unordered_set<std::string> seen;
    auto add_question = [&](const json& q) {
      if (!q.is_string()) return;
      const std::string question = q.get<std::string>();
      const std::string normalized = text::normalize_whitespace(question);
      if (!normalized.empty() && seen.insert(normalized).second) {
        record.reference_questions.push_back(question);
      }
    };
    if (obj.contains("annotations") && obj["annotations"].is_array()) {
      for (const auto& annotation : obj["annotations"]) {
        if (annotation.is_object() && annotation.contains("questions") &&
            annotation["questions"].is_array()) {
          for (const auto& q : annotation["questions"]) add_question(q);
        }
      }
    } else if (obj.contains("questions") && obj["questions"].is_array()) {
      for (const auto& q : obj["questions"]) add_question(q);
    }
    validate_record(record, line_no, seen_ids);
    records.push_back(std::move(record));
  }
  return records;
}

void append_record_json(std::ostream& out, const DatasetRecord& record) {
  json obj;
  obj["id"] = record.claim.id;
  obj["claim"] = record.claim.text;
  obj["questions"] = record.reference_questions;
  obj["split"] = split_name(record.split);
  if (!record.claim.source.empty()) obj["source"] = record.claim.source;
  if (record.claim.gold_label) obj["label"] = record.claim.gold_label->value;
  if (record.claim.language) obj["language"] = *record.claim.language;
  out << obj.dump() << '\n';
}

}  // namespace

std::string split_name(Split split) {
  return split == Split::train ? "train" : "test";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  throw ValidationError("unknown split '" + std::string(name) + "' (expected train|test)");
}

Format parse_format(std::string_view name) {
  if (name == "canonical") return Format::canonical;
  if (name == "averitec") return Format::averitec;
  if (name == "claimdecomp") return Format::claimdecomp;
  throw ValidationError("unknown dataset format '" + std::string(name) + "'");
}

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path, Format format,
                                        Split default_split) {
  std::vector<DatasetRecord> records;
  switch (format) {
    case Format::canonical:
      records = load_canonical(path);
      break;
    case Format::averitec:
      records = load_averitec(path, default_split);
      break;
    case Format::claimdecomp:
      records = load_claimdecomp(path, default_split);
      break;
  }
  if (records.empty()) {
    throw ValidationError("dataset is empty: " + path.string());
  }
  return records;
}

std::vector<Claim> load_claims(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open claims file: " + path.string());
  std::vector<Claim> claims;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json obj = parse_json_line(line, line_no);
    Claim claim;
    claim.id = require_string(obj, "id", line_no);
    claim.text = require_string(obj, "claim", line_no);
    if (text::trim(claim.text).empty()) throw ParseError("empty claim text", line_no);
    if (!seen_ids.insert(claim.id).second) {
      throw ParseError("duplicate claim id '" + claim.id + "'", line_no);
    }
    if (obj.contains("source") && obj["source"].is_string()) {
      claim.source = obj["source"].get<std::string>();
    }
    if (obj.contains("label") && obj["label"].is_string()) {
      claim.gold_label = GoldLabel{obj["label"].get<std::string>()};
    }
    if (obj.contains("language") && obj["language"].is_string()) {
      claim.language = obj["language"].get<std::string>();
    }
    claims.push_back(std::move(claim));
  }
  if (claims.empty()) throw ValidationError("claims file is empty: " + path.string());
  return claims;
}

std::vector<ClaimQuestionPair> expand_pairs(const std::vector<DatasetRecord>& records) {
  std::vector<ClaimQuestionPair> pairs;
  for (const auto& record : records) {
    std::size_t index = 0;
    for (const auto& question : record.reference_questions) {
      ClaimQuestionPair pair;
      pair.claim = record.claim;
      pair.reference_question = question;
      pair.pair_id = record.claim.id + "#q" + std::to_string(index++);
      pairs.push_back(std::move(pair));
    }
  }
  return pairs;
}

CurriculumExport curriculum_order(const std::vector<NamedPairs>& collections) {
  std::unordered_set<std::string> names;
  for (const auto& collection : collections) {
    if (!names.insert(collection.name).second) {
      throw ValidationError("duplicate dataset name '" + collection.name + "'");
    }
  }
  std::vector<const NamedPairs*> order;
  order.reserve(collections.size());
  for (const auto& collection : collections) order.push_back(&collection);
  std::sort(order.begin(), order.end(), [](const NamedPairs* a, const NamedPairs* b) {
    if (a->pairs.size() != b->pairs.size()) return a->pairs.size() < b->pairs.size();
    return a->name < b->name;
  });

  CurriculumExport result;
  std::size_t position = 0;
  for (const NamedPairs* collection : order) {
    result.manifest.push_back({collection->name, collection->pairs.size(), position++});
    result.pairs.insert(result.pairs.end(), collection->pairs.begin(),
                        collection->pairs.end());
  }
  return result;
}

DatasetStats compute_stats(const std::vector<DatasetRecord>& records) {
  if (records.empty()) throw ValidationError("compute_stats: empty dataset");
  DatasetStats stats;
  stats.num_claims = records.size();
  std::size_t total_questions = 0;
  for (const auto& record : records) {
    total_questions += record.reference_questions.size();
    const std::size_t pairs = record.reference_questions.size();
    if (record.split == Split::train) {
      stats.train_size += pairs;
    } else {
      stats.test_size += pairs;
    }
  }
  stats.avg_questions =
      static_cast<double>(total_questions) / static_cast<double>(stats.num_claims);
  return stats;
}

std::string format_stats(const DatasetStats& stats) {
  char avg[32];
  std::snprintf(avg, sizeof avg, "%.2f", stats.avg_questions);
  std::ostringstream out;
  out << "claims=" << stats.num_claims << " avg_questions=" << avg
      << " train_pairs=" << stats.train_size << " test_pairs=" << stats.test_size;
  return out.str();
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  json obj = json::parse(in, nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) {
    throw ParseError("manifest is not a JSON object");
  }
  DatasetManifest manifest;
  if (obj.contains("num_claims")) manifest.num_claims = obj["num_claims"].get<std::size_t>();
  if (obj.contains("avg_questions")) manifest.avg_questions = obj["avg_questions"].get<double>();
  if (obj.contains("train_size")) manifest.train_size = obj["train_size"].get<std::size_t>();
  if (obj.contains("test_size")) manifest.test_size = obj["test_size"].get<std::size_t>();
  return manifest;
}

std::vector<std::string> manifest_mismatches(const DatasetStats& stats,
                                             const DatasetManifest& manifest) {
  std::vector<std::string> mismatches;
  auto flag_count = [&](const char* field, std::optional<std::size_t> expected,
                        std::size_t observed) {
    if (expected && *expected != observed) {
      mismatches.push_back(std::string(field) + ": expected " + std::to_string(*expected) +
                           ", observed " + std::to_string(observed));
    }
  };
  flag_count("num_claims", manifest.num_claims, stats.num_claims);
  flag_count("train_size", manifest.train_size, stats.train_size);
  flag_count("test_size", manifest.test_size, stats.test_size);
  if (manifest.avg_questions) {
    // Published tables report 2 decimals; compare at that precision.
    const double expected = std::round(*manifest.avg_questions * 100.0);
    const double observed = std::round(stats.avg_questions * 100.0);
    if (expected != observed) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "avg_questions: expected %.2f, observed %.2f",
                    *manifest.avg_questions, stats.avg_questions);
      mismatches.emplace_back(buf);
    }
  }
  return mismatches;
}

void write_canonical(const std::filesystem::path& path,
                     const std::vector<DatasetRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write dataset file: " + path.string());
  for (const auto& record : records) append_record_json(out, record);
}

void write_pairs_canonical(const std::filesystem::path& path,
                           const std::vector<ClaimQuestionPair>& pairs, Split split) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write pairs file: " + path.string());
  for (const auto& pair : pairs) {
    DatasetRecord record;
    record.claim = pair.claim;
    record.claim.id = pair.pair_id;
    record.reference_questions = {pair.reference_question};
    record.split = split;
    append_record_json(out, record);
  }
}

void write_curriculum_manifest(const std::filesystem::path& path,
                               const std::vector<CurriculumEntry>& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write curriculum manifest: " + path.string());
  for (const auto& entry : manifest) {
    json obj;
    obj["dataset"] = entry.name;
    obj["pair_count"] = entry.pair_count;
    obj["position"] = entry.position;
    out << obj.dump() << '\n';
  }
}

}  // namespace factcheck::datasets
