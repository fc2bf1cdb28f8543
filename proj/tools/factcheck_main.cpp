#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "factcheck/bench.hpp"
#include "factcheck/config.hpp"
#include "factcheck/datasets.hpp"
#include "factcheck/error.hpp"
#include "factcheck/service.hpp"

namespace {

using namespace factcheck;

app::PipelineConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return app::PipelineConfig{};
  return app::PipelineConfig::load(path);
}

std::string slurp_note(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// "--providers a,b,c" narrows the configured search providers to the named set.
void narrow_providers(verification::PipelineProviders& providers,
                      const std::string& csv) {
  if (csv.empty()) return;
  std::vector<std::shared_ptr<evidence::SearchProvider>> selected;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const auto comma = csv.find(',', start);
    const std::string name =
        csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    bool found = false;
    for (const auto& provider : providers.search) {
      if (provider->name() == name) {
        selected.push_back(provider);
        found = true;
      }
    }
    if (!found) throw ValidationError("unknown search provider '" + name + "'");
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  providers.search = std::move(selected);
}

int run(int argc, char** argv) {
  CLI::App cli{"Claim verification pipeline: question generation, evidence retrieval, "
               "stance aggregation, and the evaluation harness"};
  cli.require_subcommand(1);

  std::string config_path;
  cli.add_option("--config", config_path, "pipeline config file (JSON)")
      ->envname("FACTCHECK_CONFIG");

  // stats
  auto* stats_cmd = cli.add_subcommand("stats", "dataset statistics and manifest check");
  std::string stats_dataset, stats_format = "canonical", stats_manifest, stats_out;
  std::string stats_split = "train";
  stats_cmd->add_option("--dataset", stats_dataset, "dataset file")->required();
  stats_cmd->add_option("--format", stats_format, "canonical|averitec|claimdecomp");
  stats_cmd->add_option("--split", stats_split, "default split for converted formats");
  stats_cmd->add_option("--manifest", stats_manifest, "expected-counts JSON to check against");
  stats_cmd->add_option("--out", stats_out, "write the canonical conversion here");

  // curriculum
  auto* curriculum_cmd =
      cli.add_subcommand("curriculum", "size-ordered combined training export");
  std::vector<std::string> curriculum_inputs;
  std::string curriculum_out, curriculum_manifest;
  curriculum_cmd
      ->add_option("--dataset", curriculum_inputs,
                   "name=path[:format], repeatable; train split of each is used")
      ->required();
  curriculum_cmd->add_option("--out", curriculum_out, "combined pairs file")->required();
  curriculum_cmd->add_option("--manifest-out", curriculum_manifest,
                             "ordering manifest (default <out>.manifest)");

  // generate
  auto* generate_cmd = cli.add_subcommand("generate", "questions for one claim");
  std::string generate_claim, generate_backend;
  int generate_n = 3;
  generate_cmd->add_option("--claim", generate_claim, "claim text")->required();
  generate_cmd->add_option("--backend", generate_backend, "backend id")->required();
  generate_cmd->add_option("-n", generate_n, "questions to request");

  // synthesize
  auto* synthesize_cmd =
      cli.add_subcommand("synthesize", "generate a dataset from a claims file");
  std::string synthesize_claims, synthesize_backend, synthesize_out, synthesize_skips;
  int synthesize_n = 3;
  synthesize_cmd->add_option("--claims", synthesize_claims, "claims file")->required();
  synthesize_cmd->add_option("--backend", synthesize_backend, "backend id")->required();
  synthesize_cmd->add_option("--out", synthesize_out, "output dataset (appended)")->required();
  synthesize_cmd->add_option("--skip-report", synthesize_skips,
                             "skip journal (default <out>.skips)");
  synthesize_cmd->add_option("-n", synthesize_n, "questions per claim");

  // check
  auto* check_cmd = cli.add_subcommand("check", "verify one claim");
  std::string check_claim, check_method = "claim_only", check_providers, check_blocklist;
  int check_topk = 0;
  check_cmd->add_option("--claim", check_claim, "claim text")->required();
  check_cmd->add_option("--method", check_method, "claim_only|human:<file>|backend:<id>");
  check_cmd->add_option("--providers", check_providers, "comma-separated provider subset");
  check_cmd->add_option("--topk", check_topk, "evidence snippets to vote (default 20)");
  check_cmd->add_option("--blocklist", check_blocklist, "extra blocklist file");

  // eval-qg
  auto* evalqg_cmd = cli.add_subcommand("eval-qg", "question generation benchmark");
  std::string evalqg_dataset, evalqg_format = "canonical", evalqg_backends;
  std::string evalqg_baseline, evalqg_out = "qg_run", evalqg_name;
  bool evalqg_best_match = false;
  bool evalqg_offline = false;
  evalqg_cmd->add_option("--dataset", evalqg_dataset, "dataset file (test split is used)")
      ->required();
  evalqg_cmd->add_option("--format", evalqg_format, "dataset format");
  evalqg_cmd->add_option("--backends", evalqg_backends,
                         "comma-separated backend ids (default: all configured)");
  evalqg_cmd->add_option("--baseline", evalqg_baseline, "baseline backend for t-tests");
  evalqg_cmd->add_option("--out", evalqg_out, "output directory");
  evalqg_cmd->add_option("--name", evalqg_name, "dataset name for the report");
  evalqg_cmd->add_flag("--best-match", evalqg_best_match,
                       "score references against the best of n generations");
  evalqg_cmd->add_flag("--offline", evalqg_offline, "replay from cache; refuse live calls");

  // eval-verdict
  auto* verdict_cmd = cli.add_subcommand("eval-verdict", "veracity prediction benchmark");
  std::string verdict_claims, verdict_methods = "claim_only", verdict_out = "verdict_run";
  bool verdict_offline = false;
  verdict_cmd->add_option("--claims", verdict_claims, "gold-labeled claims file")->required();
  verdict_cmd->add_option("--methods", verdict_methods,
                          "comma-separated methods (claim_only,human:<f>,backend:<id>)");
  verdict_cmd->add_option("--out", verdict_out, "output directory");
  verdict_cmd->add_flag("--offline", verdict_offline, "replay from cache; refuse live calls");

  // score
  auto* score_cmd =
      cli.add_subcommand("score", "score a precomputed generations file");
  std::string score_pairs, score_baseline, score_out = "score_run", score_name;
  score_cmd
      ->add_option("--pairs", score_pairs,
                   "JSONL of {pair_id, reference, generation-or-null}")
      ->required();
  score_cmd->add_option("--baseline", score_baseline,
                        "second pairs file to t-test against (aligned by pair_id)");
  score_cmd->add_option("--out", score_out, "output directory");
  score_cmd->add_option("--name", score_name, "label for the report row");

  // agreement
  auto* agreement_cmd =
      cli.add_subcommand("agreement", "manual-evaluation means and weighted kappa");
  std::string agreement_annotations, agreement_out = "agreement_run";
  agreement_cmd
      ->add_option("--annotations", agreement_annotations, "JSONL of annotation records")
      ->required();
  agreement_cmd->add_option("--out", agreement_out, "output directory");

  // serve
  auto* serve_cmd = cli.add_subcommand("serve", "JSON-over-HTTP verification service");
  std::string serve_host = "0.0.0.0";
  int serve_port = 8080;
  serve_cmd->add_option("--host", serve_host, "bind host");
  serve_cmd->add_option("--port", serve_port, "bind port");

  // --config may appear after any subcommand name.
  for (auto* sub : cli.get_subcommands({})) sub->fallthrough();

  CLI11_PARSE(cli, argc, argv);

  if (*stats_cmd) {
    const auto records = datasets::load_dataset(stats_dataset,
                                                datasets::parse_format(stats_format),
                                                datasets::parse_split(stats_split));
    const auto stats = datasets::compute_stats(records);
    std::cout << datasets::format_stats(stats) << '\n';
    if (!stats_manifest.empty()) {
      const auto mismatches =
          datasets::manifest_mismatches(stats, datasets::load_manifest(stats_manifest));
      if (mismatches.empty()) {
        std::cout << "manifest: all expected counts match\n";
      } else {
        for (const auto& mismatch : mismatches) {
          std::cout << "manifest mismatch: " << mismatch << '\n';
        }
      }
    }
    if (!stats_out.empty()) datasets::write_canonical(stats_out, records);
    return 0;
  }

  if (*curriculum_cmd) {
    std::vector<datasets::NamedPairs> collections;
    for (const auto& spec : curriculum_inputs) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos) {
        throw ValidationError("expected name=path[:format], got '" + spec + "'");
      }
      const std::string name = spec.substr(0, eq);
      std::string rest = spec.substr(eq + 1);
      datasets::Format format = datasets::Format::canonical;
      const auto colon = rest.rfind(':');
      if (colon != std::string::npos && rest.find('/', colon) == std::string::npos) {
        format = datasets::parse_format(rest.substr(colon + 1));
        rest = rest.substr(0, colon);
      }
      auto records = datasets::load_dataset(rest, format);
      std::erase_if(records, [](const datasets::DatasetRecord& r) {
        return r.split != datasets::Split::train;
      });
      collections.push_back({name, datasets::expand_pairs(records)});
    }
    const auto exported = datasets::curriculum_order(collections);
    datasets::write_pairs_canonical(curriculum_out, exported.pairs, datasets::Split::train);
    const std::string manifest_path =
        curriculum_manifest.empty() ? curriculum_out + ".manifest" : curriculum_manifest;
    datasets::write_curriculum_manifest(manifest_path, exported.manifest);
    for (const auto& entry : exported.manifest) {
      std::cout << entry.position << '\t' << entry.name << '\t' << entry.pair_count << '\n';
    }
    return 0;
  }

  if (*score_cmd) {
    app::ScoreFileOptions options;
    options.out_dir = score_out;
    options.name = score_name.empty()
                       ? std::filesystem::path(score_pairs).stem().string()
                       : score_name;
    if (!score_baseline.empty()) options.baseline = score_baseline;
    const auto result = app::run_score_file(score_pairs, options);
    std::cout << slurp_note(result.txt_path);
    return 0;
  }

  if (*agreement_cmd) {
    const auto result = app::run_agreement_report(agreement_annotations, agreement_out);
    std::cout << slurp_note(result.txt_path);
    return 0;
  }

  const app::PipelineConfig config = load_config_or_default(config_path);

  if (*generate_cmd) {
    auto built = app::build_providers(config);
    auto options = app::build_options(config);
    auto backend_it = built.providers.backends.find(generate_backend);
    auto client_it = built.providers.generators.find(generate_backend);
    if (backend_it == built.providers.backends.end()) {
      throw ValidationError("backend '" + generate_backend + "' is not configured");
    }
    std::optional<questiongen::SamplingConfig> sampling = config.sampling;
    if (!sampling && backend_it->second.kind == questiongen::BackendKind::fine_tuned_seq2seq) {
      sampling = questiongen::SamplingConfig::seq2seq_defaults();
    }
    datasets::Claim claim;
    claim.id = "cli";
    claim.text = generate_claim;
    const auto set = questiongen::generate_questions(
        claim, backend_it->second, *client_it->second, sampling, generate_n, options.prompt);
    if (set.is_null()) {
      std::cout << "NULL\n";
    } else {
      for (const auto& question : *set.questions) std::cout << question << '\n';
    }
    return 0;
  }

  if (*synthesize_cmd) {
    auto built = app::build_providers(config);
    auto options = app::build_options(config);
    auto backend_it = built.providers.backends.find(synthesize_backend);
    if (backend_it == built.providers.backends.end()) {
      throw ValidationError("backend '" + synthesize_backend + "' is not configured");
    }
    std::optional<questiongen::SamplingConfig> sampling = config.sampling;
    if (!sampling && backend_it->second.kind == questiongen::BackendKind::fine_tuned_seq2seq) {
      sampling = questiongen::SamplingConfig::seq2seq_defaults();
    }
    questiongen::SynthesisOptions synth;
    synth.out = synthesize_out;
    synth.skip_report = synthesize_skips.empty() ? synthesize_out + ".skips" : synthesize_skips;
    synth.questions_per_claim = synthesize_n;
    const auto summary = questiongen::synthesize_dataset(
        datasets::load_claims(synthesize_claims), backend_it->second,
        *built.providers.generators.at(synthesize_backend), sampling, options.prompt, synth);
    std::cout << "written=" << summary.written << " null=" << summary.skipped_null
              << " errors=" << summary.skipped_error << " resumed=" << summary.resumed
              << '\n';
    return 0;
  }

  if (*check_cmd) {
    auto built = app::build_providers(config);
    auto options = app::build_options(config);
    narrow_providers(built.providers, check_providers);
    if (check_topk > 0) options.top_k = check_topk;
    if (!check_blocklist.empty()) {
      for (const auto& domain : evidence::Blocklist::load(check_blocklist).domains()) {
        options.blocklist.add(domain);
      }
    }
    datasets::Claim claim;
    claim.id = "cli-" + app::sha256_hex(check_claim).substr(0, 12);
    claim.text = check_claim;
    const auto outcome = verification::verify_claim(
        claim, verification::Method::parse(check_method), built.providers, options);
    std::cout << verification::outcome_to_json(outcome).dump(2) << '\n';
    return 0;
  }

  if (*evalqg_cmd) {
    auto built = app::build_providers(config, evalqg_offline);
    auto options = app::build_options(config);
    auto records = datasets::load_dataset(evalqg_dataset,
                                          datasets::parse_format(evalqg_format),
                                          datasets::Split::test);
    std::erase_if(records, [](const datasets::DatasetRecord& r) {
      return r.split != datasets::Split::test;
    });
    if (records.empty()) throw ValidationError("dataset has no test-split records");

    std::vector<questiongen::GenerationBackend> backends;
    if (evalqg_backends.empty()) {
      for (const auto& [_, backend] : built.providers.backends) backends.push_back(backend);
    } else {
      std::size_t start = 0;
      while (start <= evalqg_backends.size()) {
        const auto comma = evalqg_backends.find(',', start);
        const std::string id = evalqg_backends.substr(
            start, comma == std::string::npos ? std::string::npos : comma - start);
        auto it = built.providers.backends.find(id);
        if (it == built.providers.backends.end()) {
          throw ValidationError("backend '" + id + "' is not configured");
        }
        backends.push_back(it->second);
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
    }
    app::QgBenchOptions bench;
    bench.out_dir = evalqg_out;
    bench.dataset_name = evalqg_name.empty()
                             ? std::filesystem::path(evalqg_dataset).stem().string()
                             : evalqg_name;
    if (!evalqg_baseline.empty()) bench.baseline_backend = evalqg_baseline;
    bench.best_match = evalqg_best_match;
    bench.n_questions = config.questions_per_claim;
    const auto result =
        app::run_qg_benchmark(records, backends, built.providers.generators,
                              config.sampling, options.prompt, bench);
    app::write_run_manifest(evalqg_out, config.to_json(), {evalqg_dataset}, "eval-qg");
    std::cout << "reports: " << result.tsv_path.string() << ", "
              << result.txt_path.string() << '\n';
    for (const auto& row : result.rows) {
      if (row.error) std::cout << "backend " << row.backend_id << " failed: " << *row.error << '\n';
    }
    return 0;
  }

  if (*verdict_cmd) {
    auto built = app::build_providers(config, verdict_offline);
    auto options = app::build_options(config);
    std::vector<verification::Method> methods;
    std::size_t start = 0;
    while (start <= verdict_methods.size()) {
      const auto comma = verdict_methods.find(',', start);
      methods.push_back(verification::Method::parse(verdict_methods.substr(
          start, comma == std::string::npos ? std::string::npos : comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    app::VerdictBenchOptions bench;
    bench.out_dir = verdict_out;
    const auto result = app::run_verdict_benchmark(datasets::load_claims(verdict_claims),
                                                   methods, built.providers, options, bench);
    app::write_run_manifest(verdict_out, config.to_json(), {verdict_claims}, "eval-verdict");
    std::cout << "reports: " << result.tsv_path.string() << ", "
              << result.txt_path.string() << '\n';
    for (const auto& row : result.rows) {
      if (row.excluded > 0) {
        std::cout << row.method << ": " << row.excluded << " claims excluded\n";
      }
    }
    return 0;
  }

  if (*serve_cmd) {
    auto built = app::build_providers(config);
    auto options = app::build_options(config);
    app::Service service(std::move(built.providers), std::move(options), config);
    std::cout << "listening on " << serve_host << ":" << serve_port << '\n';
    service.listen(serve_host, serve_port);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
}
