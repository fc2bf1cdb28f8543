#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>

#include "factcheck/error.hpp"
#include "factcheck/verification.hpp"
#include "support/scripted_providers.hpp"

using namespace factcheck;
using testing::ScriptedGenerationClient;
using testing::ScriptedNliProvider;
using testing::ScriptedSearchProvider;
using testing::TableEmbeddingProvider;
using verification::Stance;
using verification::StanceLabel;
using verification::TieRule;
using verification::VerdictLabel;

namespace {

datasets::Claim make_claim(const std::string& id, const std::string& text) {
  datasets::Claim claim;
  claim.id = id;
  claim.text = text;
  return claim;
}

StanceLabel sup(double confidence = 1.0) { return {Stance::supporting, confidence}; }
StanceLabel ref(double confidence = 1.0) { return {Stance::refuting, confidence}; }

evidence::EvidenceSnippet snippet(const std::string& text, const std::string& url) {
  evidence::EvidenceSnippet s;
  s.text = text;
  s.url = url;
  s.provider = "mock";
  return s;
}

}  // namespace

TEST_CASE("classify_stances") {
  const auto claim = make_claim("c1", "The claim.");
  SUBCASE("single stance") {
    ScriptedNliProvider nli({{"ev", sup(0.9)}});
    const auto stances = verification::classify_stances(claim, {snippet("ev", "https://e.com/1")},
                                                        nli);
    REQUIRE(stances.size() == 1);
    CHECK(stances[0].second.label == Stance::supporting);
    CHECK(stances[0].second.confidence == doctest::Approx(0.9));
  }
  SUBCASE("twenty stances in input order") {
    std::map<std::string, StanceLabel> table;
    std::vector<evidence::EvidenceSnippet> snippets;
    for (int i = 0; i < 20; ++i) {
      const std::string text = "ev" + std::to_string(i);
      table[text] = i % 2 == 0 ? sup() : ref();
      snippets.push_back(snippet(text, "https://e.com/" + std::to_string(i)));
    }
    ScriptedNliProvider nli(table);
    const auto stances = verification::classify_stances(claim, snippets, nli);
    REQUIRE(stances.size() == 20);
    for (int i = 0; i < 20; ++i) {
      CHECK(stances[i].first.text == "ev" + std::to_string(i));
      CHECK(stances[i].second.label == (i % 2 == 0 ? Stance::supporting : Stance::refuting));
    }
  }
  SUBCASE("per-item failure drops that snippet with a diagnostic") {
    std::map<std::string, StanceLabel> table;
    std::vector<evidence::EvidenceSnippet> snippets;
    for (int i = 0; i < 20; ++i) {
      const std::string text = "ev" + std::to_string(i);
      table[text] = sup();
      snippets.push_back(snippet(text, "https://e.com/" + std::to_string(i)));
    }
    ScriptedNliProvider nli(table);
    nli.fail_item("ev7");
    verification::StanceDiagnostics diag;
    const auto stances = verification::classify_stances(claim, snippets, nli, &diag);
    CHECK(stances.size() == 19);
    REQUIRE(diag.dropped.size() == 1);
    CHECK(diag.dropped[0].find("ev7") == std::string::npos);  // message carries url+index
    CHECK(diag.dropped[0].find("snippet 7") != std::string::npos);
  }
  SUBCASE("whole-batch failure propagates") {
    ScriptedNliProvider nli({});
    nli.fail_batch();
    CHECK_THROWS_AS(
        verification::classify_stances(claim, {snippet("x", "https://e.com/x")}, nli),
        ProviderError);
  }
  SUBCASE("empty snippet list is a verification error") {
    ScriptedNliProvider nli({});
    CHECK_THROWS_AS(verification::classify_stances(claim, {}, nli), VerificationError);
  }
}

TEST_CASE("aggregate_verdict") {
  SUBCASE("unanimous support") {
    const auto result = verification::aggregate_verdict({sup(), sup(), sup(), sup(), sup()});
    CHECK(result.label == VerdictLabel::True);
    CHECK(result.supporting_votes == 5);
    CHECK(result.refuting_votes == 0);
    CHECK_FALSE(result.tie_broken);
  }
  SUBCASE("12 supporting vs 8 refuting") {
    std::vector<StanceLabel> stances;
    for (int i = 0; i < 12; ++i) stances.push_back(sup(0.5));
    for (int i = 0; i < 8; ++i) stances.push_back(ref(0.99));
    const auto result = verification::aggregate_verdict(stances);
    CHECK(result.label == VerdictLabel::True);  // counts, not confidence, decide
    CHECK(result.supporting_votes == 12);
    CHECK(result.refuting_votes == 8);
  }
  SUBCASE("tie resolved by higher mean confidence") {
    std::vector<StanceLabel> stances;
    for (int i = 0; i < 10; ++i) stances.push_back(sup(0.6));
    for (int i = 0; i < 10; ++i) stances.push_back(ref(0.8));
    const auto result = verification::aggregate_verdict(stances);
    CHECK(result.label == VerdictLabel::False);
    CHECK(result.tie_broken);
  }
  SUBCASE("tie with equal mean confidence goes to False") {
    const auto result = verification::aggregate_verdict({sup(0.7), ref(0.7)});
    CHECK(result.label == VerdictLabel::False);
    CHECK(result.tie_broken);
  }
  SUBCASE("alternative tie rules") {
    const std::vector<StanceLabel> tied = {sup(0.9), ref(0.1)};
    CHECK(verification::aggregate_verdict({sup(0.1), ref(0.9)}, TieRule::always_true).label ==
          VerdictLabel::True);
    CHECK(verification::aggregate_verdict(tied, TieRule::always_false).label ==
          VerdictLabel::False);
  }
  SUBCASE("confidence-weighted voting lets confident minorities win") {
    // 2 supporting at 0.9 vs 3 refuting at 0.4: equal weighting says False,
    // confidence weighting says True (1.8 > 1.2).
    const std::vector<StanceLabel> stances = {sup(0.9), sup(0.9), ref(0.4), ref(0.4),
                                              ref(0.4)};
    const auto equal = verification::aggregate_verdict(
        stances, TieRule::higher_mean_confidence, verification::VoteWeighting::equal);
    CHECK(equal.label == VerdictLabel::False);
    const auto weighted = verification::aggregate_verdict(
        stances, TieRule::higher_mean_confidence, verification::VoteWeighting::confidence);
    CHECK(weighted.label == VerdictLabel::True);
    // Counts are still reported as plain counts.
    CHECK(weighted.supporting_votes == 2);
    CHECK(weighted.refuting_votes == 3);
  }
  SUBCASE("empty stance list is an error") {
    CHECK_THROWS_AS(verification::aggregate_verdict({}), VerificationError);
  }
  SUBCASE("permutation invariance") {
    std::vector<StanceLabel> stances = {sup(0.9), ref(0.4), sup(0.2), ref(0.8), sup(0.5)};
    const auto before = verification::aggregate_verdict(stances);
    std::rotate(stances.begin(), stances.begin() + 2, stances.end());
    const auto after = verification::aggregate_verdict(stances);
    CHECK(before.label == after.label);
    CHECK(before.supporting_votes == after.supporting_votes);
  }
  SUBCASE("monotonicity: flipping refuting to supporting never turns True into False") {
    std::vector<StanceLabel> stances = {sup(0.5), sup(0.5), ref(0.5), ref(0.5), ref(0.5)};
    for (std::size_t flip = 2; flip < stances.size(); ++flip) {
      auto flipped = stances;
      flipped[flip] = sup(0.5);
      const auto before = verification::aggregate_verdict(stances);
      const auto after = verification::aggregate_verdict(flipped);
      if (before.label == VerdictLabel::True) CHECK(after.label == VerdictLabel::True);
    }
  }
}

TEST_CASE("aggregate_verdict matches brute-force counting for all assignments up to n=12") {
  // Confidence pattern fixed per position so the tie rule is exercised.
  auto confidence_at = [](int position) { return 0.5 + 0.04 * (position % 11); };
  for (int n = 1; n <= 12; ++n) {
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      std::vector<StanceLabel> stances;
      int expected_sup = 0;
      double sup_conf = 0.0, ref_conf = 0.0;
      for (int i = 0; i < n; ++i) {
        const bool supporting = mask & (1u << i);
        const double confidence = confidence_at(i);
        stances.push_back(supporting ? sup(confidence) : ref(confidence));
        if (supporting) {
          ++expected_sup;
          sup_conf += confidence;
        } else {
          ref_conf += confidence;
        }
      }
      const int expected_ref = n - expected_sup;
      VerdictLabel expected;
      if (expected_sup > expected_ref) {
        expected = VerdictLabel::True;
      } else if (expected_ref > expected_sup) {
        expected = VerdictLabel::False;
      } else {
        expected = sup_conf > ref_conf ? VerdictLabel::True : VerdictLabel::False;
      }
      const auto result = verification::aggregate_verdict(stances);
      REQUIRE(result.label == expected);
      REQUIRE(result.supporting_votes == expected_sup);
      REQUIRE(result.refuting_votes == expected_ref);
    }
  }
}

namespace {

// Fully scripted pipeline: one claim, 25 snippets spread over two providers,
// deterministic embeddings, fixed stances. The top 20 carries 13 supporting
// and 7 refuting stances, so the hand-computed verdict is True 13-7.
struct PipelineFixture {
  datasets::Claim claim = make_claim("fx1", "fixture claim");
  verification::PipelineProviders providers;
  verification::PipelineOptions options;

  explicit PipelineFixture(int parallelism = 2) {
    std::vector<evidence::SearchResult> results_a, results_b;
    std::map<std::string, std::vector<double>> embeddings;
    std::map<std::string, StanceLabel> stances;
    embeddings["fixture claim"] = {1.0, 0.0};
    // Snippets e00..e24; e<k> has similarity cos(0.03*(k+1)), so e00 ranks
    // first and e20..e24 fall outside the top 20. Stances: supporting for
    // even index among the top 20 minus two flips -> 12 supporting, 8 refuting.
    for (int i = 0; i < 25; ++i) {
      char name[8];
      std::snprintf(name, sizeof name, "e%02d", i);
      const std::string text = name;
      const double angle = 0.03 * (i + 1);
      embeddings[text] = {std::cos(angle), std::sin(angle)};
      const std::string url = "https://evidence.test/" + text;
      if (i < 13) {
        results_a.push_back({"t", url, text});
      } else {
        results_b.push_back({"t", url, text});
      }
      // Supporting for e00..e11 and e16; everything else refutes.
      const bool supporting = (i < 12) || (i == 16);
      stances[text] = supporting ? sup(0.6 + 0.01 * i) : ref(0.7);
    }
    providers.search = {std::make_shared<ScriptedSearchProvider>("alpha", results_a),
                        std::make_shared<ScriptedSearchProvider>("beta", results_b)};
    providers.embedder = std::make_shared<TableEmbeddingProvider>(embeddings);
    providers.nli = std::make_shared<ScriptedNliProvider>(stances);
    options.parallelism = parallelism;
    options.max_results_per_query = 25;
  }
};

}  // namespace

TEST_CASE("verify_claim end-to-end on the scripted fixture") {
  PipelineFixture fixture;
  const auto outcome = verification::verify_claim(
      fixture.claim, verification::Method::claim_only(), fixture.providers, fixture.options);
  const auto& verdict = outcome.verdict;
  // Hand count over the top 20 (e00..e19): supporting e00..e11 and e16.
  // That is 13 supporting, 7 refuting -> True.
  CHECK(verdict.per_snippet.size() == 20);
  CHECK(verdict.label == VerdictLabel::True);
  CHECK(verdict.supporting_votes == 13);
  CHECK(verdict.refuting_votes == 7);
  CHECK(verdict.method == "claim_only");
  // Ranked order is by descending similarity: e00 first, e19 last.
  CHECK(verdict.per_snippet.front().first.text == "e00");
  CHECK(verdict.per_snippet.back().first.text == "e19");
}

TEST_CASE("verify_claim is deterministic across runs and parallelism settings") {
  PipelineFixture baseline(1);
  const auto expected = verification::outcome_to_json(verification::verify_claim(
      baseline.claim, verification::Method::claim_only(), baseline.providers,
      baseline.options)).dump();
  for (int parallelism : {1, 2, 4, 8}) {
    for (int run = 0; run < 3; ++run) {
      PipelineFixture fixture(parallelism);
      const auto outcome = verification::verify_claim(fixture.claim,
                                                      verification::Method::claim_only(),
                                                      fixture.providers, fixture.options);
      CHECK(verification::outcome_to_json(outcome).dump() == expected);
    }
  }
}

TEST_CASE("verify_claim with a generation backend") {
  PipelineFixture fixture;
  fixture.providers.backends["mock"] = {"mock", questiongen::BackendKind::instruction_llm,
                                        "http://mock.invalid", std::chrono::milliseconds(1000),
                                        0};
  SUBCASE("questions extend the query list") {
    fixture.providers.generators["mock"] = std::make_shared<ScriptedGenerationClient>(
        std::vector<std::string>{R"({"questions": ["sub question?"]})"});
    const auto outcome = verification::verify_claim(fixture.claim,
                                                    verification::Method::with_backend("mock"),
                                                    fixture.providers, fixture.options);
    CHECK(outcome.audit.queries.size() == 2);
    CHECK_FALSE(outcome.audit.fell_back_to_claim_only);
    CHECK(outcome.verdict.method == "backend:mock");
  }
  SUBCASE("null generation falls back to claim-only and records it") {
    fixture.providers.generators["mock"] = std::make_shared<ScriptedGenerationClient>(
        std::vector<std::string>{"prose, no structure"});
    const auto outcome = verification::verify_claim(fixture.claim,
                                                    verification::Method::with_backend("mock"),
                                                    fixture.providers, fixture.options);
    CHECK(outcome.audit.fell_back_to_claim_only);
    CHECK(outcome.audit.queries.size() == 1);
    REQUIRE(!outcome.verdict.notes.empty());
    CHECK(outcome.verdict.notes[0].find("fell back") != std::string::npos);
    // Same evidence as claim_only, so same verdict.
    CHECK(outcome.verdict.label == VerdictLabel::True);
  }
  SUBCASE("unknown backend id") {
    CHECK_THROWS_AS(
        verification::verify_claim(fixture.claim, verification::Method::with_backend("nope"),
                                   fixture.providers, fixture.options),
        ValidationError);
  }
}

TEST_CASE("verify_claim stage errors carry the stage name") {
  PipelineFixture fixture;
  auto failing = std::make_shared<ScriptedSearchProvider>("down",
                                                          std::vector<evidence::SearchResult>{});
  failing->fail_always();
  fixture.providers.search = {failing};
  CHECK_THROWS_WITH_AS(
      verification::verify_claim(fixture.claim, verification::Method::claim_only(),
                                 fixture.providers, fixture.options),
      doctest::Contains("[search]"), RetrievalError);
}

TEST_CASE("verify_claim persists an audit record when asked") {
  PipelineFixture fixture;
  const auto dir = std::filesystem::temp_directory_path() / "fc_audit_test";
  std::filesystem::remove_all(dir);
  fixture.options.audit_dir = dir;
  const auto outcome = verification::verify_claim(
      fixture.claim, verification::Method::claim_only(), fixture.providers, fixture.options);
  bool found = false;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    found = true;
    std::ifstream in(entry.path());
    nlohmann::json stored = nlohmann::json::parse(in);
    CHECK(stored["label"] == "True");
    CHECK(stored["snippets"].size() == 20);
  }
  CHECK(found);
}

TEST_CASE("method parsing") {
  CHECK(verification::Method::parse("claim_only").kind ==
        verification::Method::Kind::claim_only);
  CHECK(verification::Method::parse("backend:t5").backend_id == "t5");
  CHECK_THROWS_AS(verification::Method::parse("backend:"), ValidationError);
  CHECK_THROWS_AS(verification::Method::parse("bogus"), ValidationError);
  CHECK_THROWS_AS(verification::Method::parse("human:/nonexistent/file"), IoError);
  const auto path = std::filesystem::temp_directory_path() / "questions.txt";
  {
    std::ofstream out(path, std::ios::trunc);
    out << "First question?\n\n  Second question?  \n";
  }
  const auto method = verification::Method::parse("human:" + path.string());
  CHECK(method.human_questions ==
        std::vector<std::string>{"First question?", "Second question?"});
}
