#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "scalebench/runner.hpp"
#include "test_paths.hpp"

using namespace scalebench;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// mini campaign config anchored on the committed fixtures
CampaignConfig mini_config(const std::string& strategy,
                           const std::filesystem::path& out_path) {
    CampaignConfig cfg;
    cfg.dataset_path = testpaths::repo_file("data/mini_mclm").string();
    cfg.strategy = strategy_from_string(strategy);
    ExplicitParams params;
    if (strategy == "greedy") params.max_tokens = 256;
    if (strategy == "orm") params.k = 2;
    if (strategy == "prm") {
        params.prm_steps = 2;
        params.prm_candidates = 2;
    }
    if (strategy == "bf") params.bf_tokens = 64;
    cfg.params = params;

    const std::string mock =
        testpaths::repo_file("data/mock/mini_" + strategy + ".json").string();
    cfg.generator_endpoint = {EndpointSpec::Type::Mock, {}, mock};
    cfg.reward_endpoint = {EndpointSpec::Type::Mock, {}, mock};
    cfg.judge_endpoint = {EndpointSpec::Type::Mock, {}, mock};
    cfg.concurrency = 4;
    cfg.out_path = out_path.string();
    return cfg;
}

} // namespace

TEST_SUITE("runner") {

TEST_CASE("config hash is stable under field reordering") {
    const std::string doc_a = R"({
      "dataset": "data/mini_mclm", "strategy": "orm", "anchor_k": 2,
      "sampling": {"temperature": 0.7, "seed": 42, "top_p": 0.95},
      "out": "a.jsonl"
    })";
    const std::string doc_b = R"({
      "out": "b.jsonl", "anchor_k": 2,
      "sampling": {"top_p": 0.95, "temperature": 0.7, "seed": 42},
      "strategy": "orm", "dataset": "data/mini_mclm"
    })";
    const auto cfg_a = CampaignConfig::from_json(json::parse(doc_a));
    const auto cfg_b = CampaignConfig::from_json(json::parse(doc_b));
    CHECK(cfg_a.config_hash() == cfg_b.config_hash());
    CHECK(cfg_a.config_hash().size() == 16);

    // a real config change moves the hash
    auto cfg_c = cfg_a;
    cfg_c.anchor_k = 4;
    CHECK(cfg_c.config_hash() != cfg_a.config_hash());
}

TEST_CASE("config requires exactly one of anchor_k and params") {
    CHECK_THROWS_AS(CampaignConfig::from_json(json::parse(
                        R"({"dataset":"x","strategy":"orm"})")),
                    ConfigError);
    CHECK_THROWS_AS(
        CampaignConfig::from_json(json::parse(
            R"({"dataset":"x","strategy":"orm","anchor_k":2,"params":{"k":2}})")),
        ConfigError);
}

TEST_CASE("language groups resolve inside configs") {
    const auto cfg = CampaignConfig::from_json(json::parse(
        R"({"dataset":"x","strategy":"greedy","params":{"max_tokens":8},
            "languages":"group:B"})"));
    REQUIRE(cfg.languages.has_value());
    CHECK(cfg.languages->size() == 14);
}

TEST_CASE("plan materializes the budget when anchored") {
    auto cfg = mini_config("bf", testpaths::scratch_dir("plan") / "out.jsonl");
    cfg.params.reset();
    cfg.anchor_k = 2;
    const ExecutionPlan p = plan(cfg);
    REQUIRE(p.budget.has_value());
    CHECK(p.bf_tokens == 2048);
    CHECK(p.items.size() == 120);
    CHECK(p.planned_flops_per_item == doctest::Approx(p.budget->flops_bf));
    CHECK(p.planned_total_flops ==
          doctest::Approx(120.0 * p.planned_flops_per_item));
}

TEST_CASE("plan echoes explicit parameters") {
    auto cfg = mini_config("prm", testpaths::scratch_dir("plan2") / "out.jsonl");
    cfg.params->prm_steps = 4;
    cfg.params->prm_candidates = 5;
    const ExecutionPlan p = plan(cfg);
    CHECK(!p.budget.has_value());
    CHECK(p.prm_steps == 4);
    CHECK(p.prm_candidates == 5);
    CHECK(p.planned_flops_per_item ==
          doctest::Approx(prm_flops(cfg.generator_spec, cfg.verifier_spec, 4, 5,
                                    cfg.cost)));
}

TEST_CASE("plan prices a sliced grid") {
    auto cfg = mini_config("greedy", testpaths::scratch_dir("plan3") / "out.jsonl");
    cfg.subsets = std::vector<std::string>{"MT-MATH100"};
    cfg.languages = std::vector<std::string>{"en", "de", "fr", "ja", "ko", "zh-cn"};
    const ExecutionPlan p = plan(cfg);
    CHECK(p.items.size() == 30); // 5 problems x 6 languages
}

TEST_CASE("campaigns are deterministic and resumable") {
    const auto dir = testpaths::scratch_dir("runner_det");

    auto cfg1 = mini_config("greedy", dir / "run1.jsonl");
    const RunSummary s1 = run(plan(cfg1));
    CHECK(s1.completed == 120);
    CHECK(s1.finished);

    auto cfg2 = mini_config("greedy", dir / "run2.jsonl");
    run(plan(cfg2));
    CHECK(slurp(dir / "run1.jsonl") == slurp(dir / "run2.jsonl"));

    // interrupt after 7 records, then resume
    auto cfg3 = mini_config("greedy", dir / "run3.jsonl");
    RunOptions stop_early;
    stop_early.stop_after_items = 7;
    const RunSummary interrupted = run(plan(cfg3), stop_early);
    CHECK(!interrupted.finished);
    CHECK(interrupted.completed == 7);

    cfg3.resume = true;
    const RunSummary resumed = run(plan(cfg3));
    CHECK(resumed.skipped == 7);
    CHECK(resumed.completed == 113);
    CHECK(slurp(dir / "run1.jsonl") == slurp(dir / "run3.jsonl"));

    // resuming a finished campaign is a no-op
    const RunSummary idempotent = run(plan(cfg3));
    CHECK(idempotent.skipped == 120);
    CHECK(idempotent.completed == 0);
    CHECK(slurp(dir / "run1.jsonl") == slurp(dir / "run3.jsonl"));
}

TEST_CASE("stray endpoint variables do not touch deterministic mock campaigns") {
    const auto dir = testpaths::scratch_dir("runner_env");
    auto cfg = mini_config("greedy", dir / "a.jsonl");
    run(plan(cfg));

    setenv("SCALEBENCH_RM_URL", "http://127.0.0.1:1", 1);
    setenv("SCALEBENCH_JUDGE_URL_UNUSED", "http://127.0.0.1:1", 1);
    auto cfg2 = mini_config("greedy", dir / "b.jsonl");
    run(plan(cfg2)); // greedy never uses the reward endpoint
    unsetenv("SCALEBENCH_RM_URL");
    unsetenv("SCALEBENCH_JUDGE_URL_UNUSED");

    CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
}

TEST_CASE("resume refuses output written by a different config") {
    const auto dir = testpaths::scratch_dir("runner_mismatch");
    auto cfg = mini_config("greedy", dir / "out.jsonl");
    run(plan(cfg));

    auto other = mini_config("greedy", dir / "out.jsonl");
    other.params->max_tokens = 128; // different campaign
    other.resume = true;
    CHECK_THROWS_AS(run(plan(other)), ConfigError);
}

TEST_CASE("the output ends with a checksum line that load_results skips") {
    const auto dir = testpaths::scratch_dir("runner_checksum");
    auto cfg = mini_config("greedy", dir / "out.jsonl");
    run(plan(cfg));

    std::ifstream in(dir / "out.jsonl");
    std::string line, last;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        last = line;
        ++lines;
    }
    CHECK(lines == 121);
    const json tail = json::parse(last);
    CHECK(tail.contains("campaign_checksum"));
    CHECK(tail.at("records") == 120);

    CHECK(load_results(dir / "out.jsonl").size() == 120);
}

TEST_CASE("an injected backend failure marks one record and the campaign completes") {
    const auto dir = testpaths::scratch_dir("runner_inject");

    // prepend a failing rule for one (problem, language) cell
    const auto base = testpaths::repo_file("data/mock/mini_greedy.json");
    json script = json::parse(slurp(base));
    json boom;
    boom["prompt_contains"] = "[mm100-01] Compute 6 + 6.";
    boom["fail"] = true;
    script["generator"]["rules"].insert(script["generator"]["rules"].begin(), boom);
    const auto patched = dir / "patched_mock.json";
    std::ofstream(patched) << script.dump();

    auto cfg = mini_config("greedy", dir / "out.jsonl");
    cfg.generator_endpoint.mock_script_path = patched.string();
    const RunSummary summary = run(plan(cfg));
    CHECK(summary.completed == 120);
    CHECK(summary.failed == 1);

    std::size_t failed = 0;
    for (const auto& rec : load_results(dir / "out.jsonl")) {
        if (rec.failed) {
            ++failed;
            CHECK(rec.problem_id == "mm100-01");
            CHECK(rec.language == "en");
            CHECK(!rec.verdict.has_value());
        }
    }
    CHECK(failed == 1);
}

TEST_CASE("records carry the campaign accounting fields") {
    const auto dir = testpaths::scratch_dir("runner_fields");
    auto cfg = mini_config("greedy", dir / "out.jsonl");
    const ExecutionPlan p = plan(cfg);
    run(p);

    double actual_sum = 0.0;
    for (const auto& rec : load_results(dir / "out.jsonl")) {
        CHECK(rec.config_hash == p.config_hash);
        CHECK(rec.planned_flops == p.planned_flops_per_item);
        CHECK(rec.strategy == "greedy");
        CHECK(!rec.started_at.empty());
        actual_sum += rec.actual_flops;

        // greedy accounting: exactly 2 N_G tokens per attempt
        CHECK(rec.actual_flops ==
              2.0 * double(cfg.generator_spec.param_count) *
                  double(rec.total_new_tokens));
    }
    CHECK(actual_sum > 0.0);
}

TEST_CASE("report aggregates accuracy, kappa and gains over result files") {
    const auto dir = testpaths::scratch_dir("runner_report");

    auto greedy_cfg = mini_config("greedy", dir / "greedy.jsonl");
    run(plan(greedy_cfg));
    auto orm_cfg = mini_config("orm", dir / "orm.jsonl");
    run(plan(orm_cfg));

    ReportOptions options;
    options.result_paths = {(dir / "orm.jsonl").string()};
    options.baseline_path = (dir / "greedy.jsonl").string();
    options.out_dir = (dir / "report").string();
    const ReportBundle bundle = report(options);

    REQUIRE(bundle.series.size() == 1);
    const SeriesReport& orm = bundle.series.front();

    // the mock grids put every subset at mean 2/3 with std sqrt(2)/15
    for (const auto& [subset, disp] : orm.subset_dispersion) {
        CHECK(disp.mean == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(disp.std_dev == doctest::Approx(std::sqrt(2.0) / 15.0).epsilon(1e-12));
    }
    for (const auto& [subset, kappa] : orm.subset_kappa) {
        CHECK(kappa.kappa == doctest::Approx(-0.2).epsilon(1e-12));
    }

    // per-language gain vs greedy follows the fixture pattern:
    // +0.2 / -0.2 / 0 cycling with the language index
    const auto& gains = bundle.gains.at(orm.name).at("MT-MATH100");
    CHECK(gains.at("de") == doctest::Approx(0.2));
    CHECK(gains.at("en") == doctest::Approx(-0.2));
    CHECK(gains.at("fr") == doctest::Approx(0.0));
    CHECK(gains.at("ja") == doctest::Approx(0.2));
    CHECK(gains.at("ko") == doctest::Approx(-0.2));
    CHECK(gains.at("zh-cn") == doctest::Approx(0.0));

    for (const auto* name :
         {"accuracy_by_language.csv", "subset_summary.csv", "kappa.csv", "gain.csv",
          "trend.csv", "report.json"}) {
        CHECK(std::filesystem::exists(dir / "report" / name));
    }
}

TEST_CASE("report rejects empty inputs") {
    const auto dir = testpaths::scratch_dir("runner_report_empty");
    std::ofstream(dir / "empty.jsonl").close();
    ReportOptions options;
    options.result_paths = {(dir / "empty.jsonl").string()};
    options.out_dir = (dir / "report").string();
    CHECK_THROWS_AS(report(options), Error);

    ReportOptions none;
    none.out_dir = (dir / "report").string();
    CHECK_THROWS_AS(report(none), Error);
}

TEST_CASE("report splits series on mixed config hashes") {
    const auto dir = testpaths::scratch_dir("runner_report_mixed");
    auto cfg_a = mini_config("greedy", dir / "a.jsonl");
    run(plan(cfg_a));
    auto cfg_b = mini_config("greedy", dir / "b.jsonl");
    cfg_b.params->max_tokens = 128;
    run(plan(cfg_b));

    // concatenate both outputs into one file
    std::ofstream merged(dir / "mixed.jsonl", std::ios::binary);
    merged << slurp(dir / "a.jsonl") << slurp(dir / "b.jsonl");
    merged.close();

    ReportOptions options;
    options.result_paths = {(dir / "mixed.jsonl").string()};
    options.out_dir = (dir / "report").string();
    const ReportBundle bundle = report(options);
    CHECK(bundle.series.size() == 2);
    REQUIRE(!bundle.warnings.empty());
    CHECK(bundle.warnings.front().find("mixed config hashes") != std::string::npos);
}

} // TEST_SUITE
