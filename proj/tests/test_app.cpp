#include <doctest.h>

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "factcheck/bench.hpp"
#include "factcheck/cache.hpp"
#include "factcheck/config.hpp"
#include "factcheck/error.hpp"
#include "factcheck/service.hpp"
#include "factcheck/transport.hpp"
#include "support/scripted_providers.hpp"

using namespace factcheck;
using nlohmann::json;
using testing::FunctionTransport;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::filesystem::path write_file(const std::filesystem::path& path,
                                 const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("sha256 known vectors") {
  CHECK(app::sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(app::sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("cache round-trip and miss behavior") {
  const auto dir = fresh_dir("fc_cache_test");
  app::Cache cache(dir);
  json request = {{"query", "q"}, {"max_results", 5}};
  json response = {{"results", json::array()}};

  SUBCASE("store then fetch the identical request") {
    CHECK_FALSE(cache.lookup("search", request).has_value());
    cache.store("search", request, response);
    const auto hit = cache.lookup("search", request);
    REQUIRE(hit.has_value());
    CHECK(*hit == response);
  }
  SUBCASE("one-character difference misses") {
    cache.store("search", request, response);
    json other = {{"query", "q!"}, {"max_results", 5}};
    CHECK_FALSE(cache.lookup("search", other).has_value());
    CHECK_FALSE(cache.lookup("searcg", request).has_value());  // kind differs
  }
  SUBCASE("key is insensitive to object key order") {
    json reordered = json::object();
    reordered["max_results"] = 5;
    reordered["query"] = "q";
    CHECK(app::Cache::key_for("search", request) == app::Cache::key_for("search", reordered));
  }
  SUBCASE("entries are immutable once written") {
    cache.store("search", request, response);
    cache.store("search", request, json{{"results", "tampered"}});
    CHECK(*cache.lookup("search", request) == response);
  }
  SUBCASE("corrupt entry is a miss, not a crash") {
    cache.store("search", request, response);
    const auto key = app::Cache::key_for("search", request);
    write_file(dir / (key + ".json"), "{not json");
    CHECK_FALSE(cache.lookup("search", request).has_value());
  }
}

TEST_CASE("caching transport serves repeats without touching the inner transport") {
  const auto dir = fresh_dir("fc_cache_transport");
  auto inner = std::make_shared<FunctionTransport>(
      [](const std::string&, const std::string&, const json& body) {
        return json{{"echo", body}};
      });
  auto cache = std::make_shared<app::Cache>(dir);
  app::CachingTransport transport(inner, cache);

  const json body = {{"prompt", "hello"}};
  const auto first = transport.post_json("generate:x", "http://b.test/g", body);
  const auto second = transport.post_json("generate:x", "http://b.test/g", body);
  CHECK(first == second);
  CHECK(inner->calls() == 1);
  CHECK(transport.hits() == 1);
  CHECK(transport.misses() == 1);

  SUBCASE("bypass forces live calls but still stores") {
    app::CachingTransport bypassing(inner, cache, /*bypass=*/true);
    bypassing.post_json("generate:x", "http://b.test/g", body);
    CHECK(inner->calls() == 2);
  }
  SUBCASE("offline transport refuses and counts") {
    app::OfflineTransport offline;
    CHECK_THROWS_AS(offline.post_json("search", "http://x.test", body), ProviderError);
    CHECK(offline.attempted_calls() == 1);
  }
}

TEST_CASE("rate limiter spaces acquisitions") {
  app::RateLimiter limiter(100.0);  // 10ms spacing
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 4; ++i) limiter.acquire();
  const auto elapsed = std::chrono::steady_clock::now() - start;
  // First acquisition is immediate; three more need >= 30ms of spacing.
  CHECK(std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count() >= 30);

  app::RateLimiter unlimited(0.0);
  const auto start2 = std::chrono::steady_clock::now();
  for (int i = 0; i < 1000; ++i) unlimited.acquire();
  const auto elapsed2 = std::chrono::steady_clock::now() - start2;
  CHECK(std::chrono::duration_cast<std::chrono::milliseconds>(elapsed2).count() < 100);
}

TEST_CASE("post_with_retries retries transport errors with backoff") {
  int failures_left = 2;
  auto flaky = std::make_shared<FunctionTransport>(
      [&failures_left](const std::string& kind, const std::string&, const json&) -> json {
        if (failures_left-- > 0) throw ProviderError(kind, "flaky");
        return json{{"ok", true}};
      });
  const auto response = app::post_with_retries(*flaky, "nli", "http://n.test", json{}, 3,
                                               std::chrono::milliseconds(1));
  CHECK(response["ok"] == true);
  CHECK(flaky->calls() == 3);

  failures_left = 5;
  CHECK_THROWS_AS(app::post_with_retries(*flaky, "nli", "http://n.test", json{}, 2,
                                         std::chrono::milliseconds(1)),
                  ProviderError);
}

TEST_CASE("pipeline config loading") {
  const auto dir = fresh_dir("fc_config_test");
  SUBCASE("valid config") {
    const auto path = write_file(dir / "config.json", R"({
      "backends": [{"id": "t5", "kind": "fine_tuned_seq2seq",
                    "endpoint": "http://models.test/t5", "max_retries": 1}],
      "search_providers": [{"name": "mock", "endpoint": "http://search.test/q"}],
      "embedding": {"name": "emb", "endpoint": "http://embed.test/e"},
      "nli": {"name": "nli", "endpoint": "http://nli.test/n"},
      "top_k": 10,
      "tie_rule": "always_false",
      "parallelism": 2,
      "cache_dir": ")" + (dir / "cache").string() + R"("
    })");
    const auto config = app::PipelineConfig::load(path);
    CHECK(config.backends.size() == 1);
    CHECK(config.backends[0].kind == questiongen::BackendKind::fine_tuned_seq2seq);
    CHECK(config.top_k == 10);
    CHECK(config.tie_rule == verification::TieRule::always_false);
    // Snapshot survives a round-trip through JSON.
    CHECK(config.to_json()["top_k"] == 10);
  }
  SUBCASE("unknown keys rejected") {
    const auto path = write_file(dir / "bad.json", R"({"topk": 10})");
    CHECK_THROWS_WITH_AS(app::PipelineConfig::load(path), doctest::Contains("topk"),
                         ValidationError);
  }
  SUBCASE("missing referenced files rejected at load") {
    const auto path = write_file(dir / "missing.json",
                                 R"({"blocklist_path": "/nonexistent/blocklist.txt"})");
    CHECK_THROWS_AS(app::PipelineConfig::load(path), ValidationError);
  }
  SUBCASE("bad top_k rejected") {
    const auto path = write_file(dir / "topk.json", R"({"top_k": 0})");
    CHECK_THROWS_AS(app::PipelineConfig::load(path), ValidationError);
  }
  SUBCASE("default blocklist ships fact-checker domains") {
    const auto blocklist = app::default_blocklist();
    CHECK(blocklist.blocks_url("https://www.politifact.com/x"));
    CHECK(blocklist.blocks_url("https://snopes.com/y"));
    CHECK_FALSE(blocklist.blocks_url("https://example.com/z"));
  }
}

namespace {

// Wire-level scripted services: search + embed + nli + generate handled by a
// single FunctionTransport, echoing deterministic content.
std::shared_ptr<FunctionTransport> scripted_services() {
  return std::make_shared<FunctionTransport>(
      [](const std::string& kind, const std::string&, const json& body) -> json {
        if (kind.rfind("search", 0) == 0) {
          json results = json::array();
          for (int i = 0; i < 5; ++i) {
            const std::string id =
                app::sha256_hex(body["query"].get<std::string>()).substr(0, 4) +
                std::to_string(i);
            results.push_back({{"title", "t" + id},
                               {"url", "https://e.test/" + id},
                               {"snippet", "evidence " + id}});
          }
          return json{{"results", results}};
        }
        if (kind.rfind("embed", 0) == 0) {
          json embeddings = json::array();
          for (const auto& text : body["texts"]) {
            // Two components derived from the text bytes; never zero.
            double a = 1.0, b = 0.0;
            for (char c : text.get<std::string>()) b += (c % 7) * 0.01;
            embeddings.push_back(json::array({a, b}));
          }
          return json{{"embeddings", embeddings}};
        }
        if (kind.rfind("nli", 0) == 0) {
          json results = json::array();
          for (const auto& pair : body["pairs"]) {
            const auto premise = pair["premise"].get<std::string>();
            const bool supporting = premise.back() % 2 == 0;
            results.push_back({{"label", supporting ? "Supporting" : "Refuting"},
                               {"score", 0.9}});
          }
          return json{{"results", results}};
        }
        if (kind.rfind("generate", 0) == 0) {
          return json{{"text", R"({"questions": ["What does the claim assert?"]})"}};
        }
        throw ProviderError(kind, "unexpected kind");
      });
}

app::PipelineConfig scripted_config(const std::filesystem::path& cache_dir) {
  app::PipelineConfig config;
  config.backends.push_back({"gen", questiongen::BackendKind::instruction_llm,
                             "http://models.test/gen", std::chrono::milliseconds(1000), 0});
  config.search_providers.push_back({"s1", "http://search.test/q", 0});
  config.embedding = app::ProviderEndpoint{"emb", "http://embed.test/e", 0};
  config.nli = app::ProviderEndpoint{"nli", "http://nli.test/n", 0};
  config.cache_dir = cache_dir;
  config.use_default_blocklist = false;
  return config;
}

// build_providers wired to a scripted transport instead of HTTP.
app::BuiltProviders scripted_providers(const app::PipelineConfig& config,
                                       std::shared_ptr<app::Transport> base) {
  app::BuiltProviders built;
  std::shared_ptr<app::Transport> shared = base;
  if (config.cache_dir) {
    built.cache = std::make_shared<app::Cache>(*config.cache_dir);
    built.caching = std::make_shared<app::CachingTransport>(base, built.cache,
                                                            config.cache_bypass);
    shared = built.caching;
  }
  for (const auto& endpoint : config.search_providers) {
    built.providers.search.push_back(std::make_shared<app::HttpSearchProvider>(endpoint, shared));
  }
  built.providers.embedder =
      std::make_shared<app::HttpEmbeddingProvider>(*config.embedding, shared);
  built.providers.nli = std::make_shared<app::HttpNliProvider>(*config.nli, shared);
  for (const auto& backend : config.backends) {
    built.providers.backends[backend.id] = backend;
    built.providers.generators[backend.id] =
        std::make_shared<app::HttpGenerationClient>(backend, shared);
  }
  return built;
}

std::vector<datasets::Claim> labeled_claims() {
  std::vector<datasets::Claim> claims;
  for (int i = 0; i < 4; ++i) {
    datasets::Claim claim;
    claim.id = "claim-" + std::to_string(i);
    claim.text = "benchmark claim number " + std::to_string(i);
    claim.gold_label = datasets::GoldLabel{i % 2 == 0 ? "True" : "False"};
    claims.push_back(std::move(claim));
  }
  return claims;
}

}  // namespace

TEST_CASE("http adapters speak the documented wire protocols") {
  auto transport = scripted_services();
  SUBCASE("search") {
    app::HttpSearchProvider provider({"s1", "http://search.test/q", 0}, transport);
    const auto results = provider.search("some query", 5);
    REQUIRE(results.size() == 5);
    CHECK(results[0].url.rfind("https://e.test/", 0) == 0);
  }
  SUBCASE("embedding") {
    app::HttpEmbeddingProvider provider({"emb", "http://embed.test/e", 0}, transport);
    const auto vectors = provider.embed({"alpha", "beta"});
    REQUIRE(vectors.size() == 2);
    CHECK(vectors[0].size() == 2);
  }
  SUBCASE("nli maps labels and drops unknowns") {
    auto odd = std::make_shared<FunctionTransport>(
        [](const std::string&, const std::string&, const json&) {
          json results = json::array();
          results.push_back({{"label", "SUPPORTS"}, {"score", 0.7}});
          results.push_back({{"label", "neutral"}});
          results.push_back({{"label", "REFUTES"}});
          return json{{"results", results}};
        });
    app::HttpNliProvider provider({"nli", "http://nli.test/n", 0}, odd);
    const auto outcomes = provider.classify({{"p1", "h"}, {"p2", "h"}, {"p3", "h"}});
    REQUIRE(outcomes.size() == 3);
    CHECK(std::holds_alternative<verification::StanceLabel>(outcomes[0]));
    CHECK(std::holds_alternative<std::string>(outcomes[1]));  // neutral dropped
    const auto stance = std::get<verification::StanceLabel>(outcomes[2]);
    CHECK(stance.label == verification::Stance::refuting);
    CHECK(stance.confidence == doctest::Approx(1.0));  // missing score reports 1.0
  }
  SUBCASE("generation sends sampling fields only when configured") {
    json captured;
    auto capturing = std::make_shared<FunctionTransport>(
        [&captured](const std::string&, const std::string&, const json& body) {
          captured = body;
          return json{{"text", "ok"}};
        });
    app::HttpGenerationClient client({"t5", questiongen::BackendKind::fine_tuned_seq2seq,
                                      "http://m.test/t5", std::chrono::milliseconds(1000), 0},
                                     capturing);
    client.generate("prompt text", std::nullopt);
    CHECK_FALSE(captured.contains("temperature"));
    client.generate("prompt text", questiongen::SamplingConfig::seq2seq_defaults());
    CHECK(captured["temperature"] == doctest::Approx(1.5));
    CHECK(captured["top_p"] == doctest::Approx(0.95));
    CHECK(captured["top_k"] == 40);
    CHECK(captured["repetition_penalty"] == doctest::Approx(1.1));
  }
}

TEST_CASE("qg benchmark: echo backend scores 1.0; scripted null lowers the mean") {
  const auto out_dir = fresh_dir("fc_qg_bench");
  std::vector<datasets::DatasetRecord> records;
  for (int i = 0; i < 3; ++i) {
    datasets::DatasetRecord record;
    record.claim.id = "c" + std::to_string(i);
    record.claim.text = "claim " + std::to_string(i);
    record.split = datasets::Split::test;
    record.reference_questions = {"reference question " + std::to_string(i)};
    records.push_back(std::move(record));
  }

  SUBCASE("echo backend reaches 1.0 on all metrics") {
    std::vector<questiongen::GenerationBackend> backends = {
        {"echo", questiongen::BackendKind::fine_tuned_seq2seq, "http://m.test/echo",
         std::chrono::milliseconds(1000), 0}};
    // Seq2seq "echo": returns the reference for each claim. The scripted
    // client keys off call order, which follows record order.
    std::map<std::string, std::shared_ptr<questiongen::GenerationClient>> clients;
    clients["echo"] = std::make_shared<testing::ScriptedGenerationClient>(
        std::vector<std::string>{"reference question 0", "reference question 1",
                                 "reference question 2"});
    app::QgBenchOptions options;
    options.out_dir = out_dir;
    const auto result = app::run_qg_benchmark(records, backends, clients, std::nullopt,
                                              questiongen::PromptTemplate::builtin_default(),
                                              options);
    REQUIRE(result.rows.size() == 1);
    REQUIRE_FALSE(result.rows[0].error.has_value());
    for (const auto& [metric, mean] : result.rows[0].report.means) {
      CHECK(mean == doctest::Approx(1.0));
    }
    CHECK(slurp(result.tsv_path).find("1.0000") != std::string::npos);
  }

  SUBCASE("one null generation contributes a zero") {
    std::vector<questiongen::GenerationBackend> backends = {
        {"flaky", questiongen::BackendKind::instruction_llm, "http://m.test/flaky",
         std::chrono::milliseconds(1000), 0}};
    std::map<std::string, std::shared_ptr<questiongen::GenerationClient>> clients;
    clients["flaky"] = std::make_shared<testing::ScriptedGenerationClient>(
        std::vector<std::string>{R"({"questions": ["reference question 0"]})",
                                 "no structure at all",
                                 R"({"questions": ["reference question 2"]})"});
    app::QgBenchOptions options;
    options.out_dir = out_dir;
    options.eval_metrics = {metrics::Metric::rouge1};
    const auto result = app::run_qg_benchmark(records, backends, clients, std::nullopt,
                                              questiongen::PromptTemplate::builtin_default(),
                                              options);
    REQUIRE(result.rows.size() == 1);
    CHECK(result.rows[0].report.n_null == 1);
    // Scores are 1.0, 0 (null), 1.0 -> mean 2/3.
    CHECK(result.rows[0].report.means.at(metrics::Metric::rouge1) ==
          doctest::Approx(2.0 / 3.0));
  }

  SUBCASE("best-match extension scores references against the best of n questions") {
    std::vector<questiongen::GenerationBackend> backends = {
        {"multi", questiongen::BackendKind::instruction_llm, "http://m.test/multi",
         std::chrono::milliseconds(1000), 0}};
    // One sample returning two questions; the second matches the reference.
    std::map<std::string, std::shared_ptr<questiongen::GenerationClient>> clients;
    clients["multi"] = std::make_shared<testing::ScriptedGenerationClient>(
        std::vector<std::string>{
            R"({"questions": ["wholly unrelated words", "reference question 0"]})",
            R"({"questions": ["wholly unrelated words", "reference question 1"]})",
            R"({"questions": ["wholly unrelated words", "reference question 2"]})"});
    app::QgBenchOptions faithful;
    faithful.out_dir = out_dir;
    faithful.eval_metrics = {metrics::Metric::rouge1};
    const auto faithful_result =
        app::run_qg_benchmark(records, backends, clients, std::nullopt,
                              questiongen::PromptTemplate::builtin_default(), faithful);
    // Faithful mode scores the first question: zero overlap.
    CHECK(faithful_result.rows[0].report.means.at(metrics::Metric::rouge1) ==
          doctest::Approx(0.0));

    clients["multi"] = std::make_shared<testing::ScriptedGenerationClient>(
        std::vector<std::string>{
            R"({"questions": ["wholly unrelated words", "reference question 0"]})",
            R"({"questions": ["wholly unrelated words", "reference question 1"]})",
            R"({"questions": ["wholly unrelated words", "reference question 2"]})"});
    app::QgBenchOptions best;
    best.out_dir = out_dir;
    best.eval_metrics = {metrics::Metric::rouge1};
    best.best_match = true;
    best.n_questions = 2;
    const auto best_result =
        app::run_qg_benchmark(records, backends, clients, std::nullopt,
                              questiongen::PromptTemplate::builtin_default(), best);
    CHECK(best_result.rows[0].report.means.at(metrics::Metric::rouge1) ==
          doctest::Approx(1.0));
  }

  SUBCASE("significance marks against a baseline backend") {
    std::vector<questiongen::GenerationBackend> backends = {
        {"echo", questiongen::BackendKind::fine_tuned_seq2seq, "http://m.test/echo",
         std::chrono::milliseconds(1000), 0},
        {"worse", questiongen::BackendKind::fine_tuned_seq2seq, "http://m.test/worse",
         std::chrono::milliseconds(1000), 0}};
    std::map<std::string, std::shared_ptr<questiongen::GenerationClient>> clients;
    clients["echo"] = std::make_shared<testing::ScriptedGenerationClient>(
        std::vector<std::string>{"reference question 0", "reference question 1",
                                 "reference question 2"});
    clients["worse"] = std::make_shared<testing::ScriptedGenerationClient>(
        std::vector<std::string>{"reference question 0", "entirely unrelated words",
                                 "also wholly different text"});
    app::QgBenchOptions options;
    options.out_dir = out_dir;
    options.eval_metrics = {metrics::Metric::rouge1};
    options.baseline_backend = "echo";
    const auto result = app::run_qg_benchmark(records, backends, clients, std::nullopt,
                                              questiongen::PromptTemplate::builtin_default(),
                                              options);
    REQUIRE(result.rows.size() == 2);
    const auto& worse = result.rows[1];
    CHECK(worse.backend_id == "worse");
    REQUIRE(worse.p_values.count(metrics::Metric::rouge1) == 1);
    CHECK(worse.p_values.at(metrics::Metric::rouge1) > 0.0);
    CHECK(slurp(result.txt_path).find("significant vs echo") != std::string::npos);
  }
}

TEST_CASE("verdict benchmark produces a hand-checkable report") {
  const auto cache_dir = fresh_dir("fc_vb_cache");
  const auto out_dir = fresh_dir("fc_vb_out");
  auto config = scripted_config(cache_dir);
  auto built = scripted_providers(config, scripted_services());
  auto options = app::build_options(config);
  options.max_results_per_query = 5;

  app::VerdictBenchOptions bench;
  bench.out_dir = out_dir;
  const auto claims = labeled_claims();
  const auto result = app::run_verdict_benchmark(
      claims, {verification::Method::claim_only(), verification::Method::with_backend("gen")},
      built.providers, options, bench);
  REQUIRE(result.rows.size() == 2);
  for (const auto& row : result.rows) {
    REQUIRE_FALSE(row.error.has_value());
    CHECK(row.excluded == 0);
    REQUIRE(row.report.has_value());
    // Recompute the confusion matrix from the items file and compare.
    CHECK(row.report->n == claims.size());
  }
  const auto items = slurp(result.items_path);
  CHECK(items.find("ABSTAIN") == std::string::npos);
  CHECK(slurp(result.tsv_path).find("claim_only") != std::string::npos);
  CHECK(slurp(result.txt_path).find("backend:gen") != std::string::npos);

  SUBCASE("gold labels are required") {
    auto unlabeled = claims;
    unlabeled[0].gold_label.reset();
    CHECK_THROWS_AS(app::run_verdict_benchmark(unlabeled, {verification::Method::claim_only()},
                                               built.providers, options, bench),
                    ValidationError);
  }
}

TEST_CASE("warm cache replays byte-identical reports with zero live calls") {
  const auto cache_dir = fresh_dir("fc_replay_cache");
  const auto out_live = fresh_dir("fc_replay_live");
  const auto out_replay = fresh_dir("fc_replay_offline");
  auto config = scripted_config(cache_dir);

  const auto claims = labeled_claims();
  const std::vector<verification::Method> methods = {verification::Method::claim_only()};

  // Live run against the scripted services, populating the cache.
  {
    auto built = scripted_providers(config, scripted_services());
    auto options = app::build_options(config);
    options.max_results_per_query = 5;
    app::VerdictBenchOptions bench;
    bench.out_dir = out_live;
    app::run_verdict_benchmark(claims, methods, built.providers, options, bench);
  }
  // Replay with the network refused; the cache must carry the whole run.
  {
    auto offline = std::make_shared<app::OfflineTransport>();
    auto built = scripted_providers(config, offline);
    auto options = app::build_options(config);
    options.max_results_per_query = 5;
    app::VerdictBenchOptions bench;
    bench.out_dir = out_replay;
    app::run_verdict_benchmark(claims, methods, built.providers, options, bench);
    CHECK(offline->attempted_calls() == 0);
  }
  CHECK(slurp(out_live / "verdict_report.tsv") == slurp(out_replay / "verdict_report.tsv"));
  CHECK(slurp(out_live / "verdict_report.txt") == slurp(out_replay / "verdict_report.txt"));
  CHECK(slurp(out_live / "verdict_items.tsv") == slurp(out_replay / "verdict_items.tsv"));
}

TEST_CASE("service endpoints") {
  const auto cache_dir = fresh_dir("fc_service_cache");
  auto config = scripted_config(cache_dir);
  auto built = scripted_providers(config, scripted_services());
  auto options = app::build_options(config);
  options.max_results_per_query = 5;

  app::Service service(std::move(built.providers), std::move(options), config);
  const int port = service.start();
  httplib::Client client("127.0.0.1", port);

  SUBCASE("health lists configured providers") {
    const auto res = client.Get("/health");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto body = json::parse(res->body);
    CHECK(body["status"] == "ok");
    CHECK(body["providers"]["search"][0] == "s1");
    CHECK(body["providers"]["backends"][0] == "gen");
  }
  SUBCASE("verify returns label, votes, and snippets") {
    const auto res = client.Post("/verify", json{{"claim", "test claim"}}.dump(),
                                 "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto body = json::parse(res->body);
    CHECK((body["label"] == "True" || body["label"] == "False"));
    CHECK(body["snippets"].size() == 5);  // one query x one provider x five results
    CHECK(body["supporting_votes"].get<int>() + body["refuting_votes"].get<int>() == 5);
    // Verdicts never ship without per-snippet stance provenance.
    for (const auto& snippet : body["snippets"]) {
      CHECK(snippet.contains("stance"));
      CHECK(snippet.contains("similarity"));
    }
  }
  SUBCASE("empty claim is a 400 with a structured body") {
    const auto res = client.Post("/verify", json{{"claim", "  "}}.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    CHECK(json::parse(res->body)["kind"] == "validation");
  }
  SUBCASE("malformed JSON is a 400") {
    const auto res = client.Post("/verify", "{nope", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
  }
  SUBCASE("generate endpoint") {
    const auto res = client.Post("/generate", json{{"claim", "test claim"}, {"n", 2}}.dump(),
                                 "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto body = json::parse(res->body);
    CHECK(body["null"] == false);
    CHECK(body["questions"].size() >= 1);
  }
  SUBCASE("provider outage surfaces as 502 with stage identification") {
    // A separate service whose transport always fails.
    auto failing = std::make_shared<FunctionTransport>(
        [](const std::string& kind, const std::string&, const json&) -> json {
          throw ProviderError(kind, "scripted outage");
        });
    auto broken = scripted_providers(scripted_config(fresh_dir("fc_broken_cache")), failing);
    auto broken_options = app::build_options(config);
    app::Service broken_service(std::move(broken.providers), std::move(broken_options),
                                config);
    const int broken_port = broken_service.start();
    httplib::Client broken_client("127.0.0.1", broken_port);
    const auto res = broken_client.Post("/verify", json{{"claim", "test"}}.dump(),
                                        "application/json");
    REQUIRE(res);
    CHECK(res->status == 502);
    const auto body = json::parse(res->body);
    CHECK(body["kind"] == "provider");
    CHECK(body["error"].get<std::string>().find("[search]") != std::string::npos);
    broken_service.stop();
  }
  service.stop();
}
