// scalebench: budget-matched test-time-scaling harness CLI.
//
// Exit codes: 0 success, 1 campaign-level failure, 2 configuration error.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "scalebench/bench.hpp"
#include "scalebench/cost_model.hpp"
#include "scalebench/metrics.hpp"
#include "scalebench/runner.hpp"

namespace {

using namespace scalebench;
using nlohmann::json;

int cmd_plan(std::uint64_t k, double gen_params, double rm_params,
             std::uint64_t tokens_per_instance, std::uint64_t step_tokens,
             double tolerance) {
    const ModelSpec gen{"generator", ModelRole::Generator,
                        static_cast<std::uint64_t>(gen_params)};
    const ModelSpec ver{"verifier", ModelRole::Verifier,
                        static_cast<std::uint64_t>(rm_params)};
    const CostParams cost{tokens_per_instance, step_tokens};
    const BudgetPlan plan = match_budget(gen, ver, k, cost, tolerance);
    std::cout << to_json(plan).dump(2) << "\n";
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& strategy_override,
            const std::string& out_override, bool resume) {
    CampaignConfig config = CampaignConfig::load(config_path);
    if (!strategy_override.empty()) config.strategy = strategy_from_string(strategy_override);
    if (!out_override.empty()) config.out_path = out_override;
    if (resume) config.resume = true;

    const ExecutionPlan exec_plan = plan(config);
    std::cerr << exec_plan.to_json().dump(2) << "\n";

    RunOptions options;
    options.log = &std::cerr;
    run(exec_plan, options);
    return 0;
}

int cmd_bench_validate(const std::string& path) {
    const Dataset ds = load_dataset(path);
    std::cout << "ok: " << ds.size() << " problems, " << ds.languages().size()
              << " languages, " << ds.subsets().size() << " subsets\n";
    return 0;
}

int cmd_bench_coverage(const std::string& path) {
    const Dataset ds = load_dataset(path);
    const CoverageReport report = coverage(ds);
    json j;
    for (const auto& [subset, cov] : report.by_subset) {
        json s;
        s["languages"] = cov.languages;
        s["problems_per_language"] = cov.problems_per_language;
        json missing = json::array();
        for (const auto& [id, lang] : cov.missing) {
            missing.push_back({{"id", id}, {"language", lang}});
        }
        s["missing"] = missing;
        j[subset] = s;
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_kappa(const std::vector<std::string>& result_paths) {
    for (const auto& path : result_paths) {
        const auto records = load_results(path);
        std::map<std::string, std::vector<VerdictRecord>> by_subset;
        for (const auto& rec : records) {
            by_subset[rec.subset].push_back(
                {rec.problem_id, rec.language, rec.subset, rec.verdict});
        }
        for (const auto& [subset, recs] : by_subset) {
            try {
                const KappaResult k = fleiss_kappa(build_matrix(recs));
                std::printf("%s %s kappa=%.6f p_bar=%.6f p_e=%.6f problems=%zu%s\n",
                            path.c_str(), subset.c_str(), k.kappa, k.p_bar, k.p_e,
                            k.problems_used, k.degenerate ? " (degenerate)" : "");
            } catch (const Error& e) {
                std::printf("%s %s kappa: skipped (%s)\n", path.c_str(), subset.c_str(),
                            e.what());
            }
        }
    }
    return 0;
}

int cmd_report(const std::vector<std::string>& result_paths, const std::string& baseline,
               const std::string& out_dir, int fit_degree, bool relative) {
    ReportOptions options;
    options.result_paths = result_paths;
    if (!baseline.empty()) options.baseline_path = baseline;
    options.out_dir = out_dir;
    options.fit_degree = fit_degree;
    options.relative_gain = relative;
    const ReportBundle bundle = report(options);
    for (const auto& warning : bundle.warnings) std::cerr << "warning: " << warning << "\n";
    std::cout << "report written to " << out_dir << " (" << bundle.series.size()
              << " series)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"budget-matched test-time scaling harness"};
    app.require_subcommand(1);

    // plan
    auto* plan_cmd = app.add_subcommand("plan", "print the matched budget plan for an ORM anchor k");
    std::uint64_t k = 2;
    double gen_params = 1.5e9, rm_params = 72e9, tolerance = 0.02;
    std::uint64_t tokens_per_instance = 921, step_tokens = 128;
    plan_cmd->add_option("--k", k, "ORM sample count to anchor on")->required();
    plan_cmd->add_option("--gen-params", gen_params, "generator parameter count");
    plan_cmd->add_option("--rm-params", rm_params, "reward model parameter count");
    plan_cmd->add_option("--tokens-per-instance", tokens_per_instance,
                         "expected generated tokens per instance (D)");
    plan_cmd->add_option("--step-tokens", step_tokens, "tokens per guided step (x)");
    plan_cmd->add_option("--tolerance", tolerance, "relative FLOPs matching tolerance");

    // run
    auto* run_cmd = app.add_subcommand("run", "execute a campaign from a config file");
    std::string config_path, strategy_override, out_override;
    bool resume = false;
    run_cmd->add_option("--config", config_path, "campaign config JSON")->required();
    run_cmd->add_option("--strategy", strategy_override,
                        "override the config's strategy (greedy|orm|prm|bf)");
    run_cmd->add_option("--out", out_override, "override the config's output path");
    run_cmd->add_flag("--resume", resume, "skip items already present in the output");

    // bench validate / coverage
    auto* bench_cmd = app.add_subcommand("bench", "dataset inspection");
    bench_cmd->require_subcommand(1);
    auto* validate_cmd = bench_cmd->add_subcommand("validate", "load and validate a dataset");
    auto* coverage_cmd = bench_cmd->add_subcommand("coverage", "per-subset coverage report");
    std::string validate_path, coverage_path;
    validate_cmd->add_option("path", validate_path, "dataset file or directory")->required();
    coverage_cmd->add_option("path", coverage_path, "dataset file or directory")->required();

    // kappa
    auto* kappa_cmd = app.add_subcommand("kappa", "cross-lingual consistency of result files");
    std::vector<std::string> kappa_paths;
    kappa_cmd->add_option("--results", kappa_paths, "result JSONL file(s)")
        ->required()
        ->expected(-1);

    // report
    auto* report_cmd = app.add_subcommand("report", "aggregate result files into tables");
    std::vector<std::string> report_paths;
    std::string baseline, out_dir;
    int fit_degree = 3;
    bool relative = false;
    report_cmd->add_option("--results", report_paths, "result JSONL file(s)")
        ->required()
        ->expected(-1);
    report_cmd->add_option("--baseline", baseline, "baseline result JSONL for gain tables");
    report_cmd->add_option("--out", out_dir, "output directory")->required();
    report_cmd->add_option("--fit-degree", fit_degree, "trend fit polynomial degree");
    report_cmd->add_flag("--relative-gain", relative, "report gain as a ratio of baseline");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (plan_cmd->parsed()) {
            return cmd_plan(k, gen_params, rm_params, tokens_per_instance, step_tokens,
                            tolerance);
        }
        if (run_cmd->parsed()) {
            return cmd_run(config_path, strategy_override, out_override, resume);
        }
        if (bench_cmd->parsed()) {
            if (validate_cmd->parsed()) return cmd_bench_validate(validate_path);
            if (coverage_cmd->parsed()) return cmd_bench_coverage(coverage_path);
        }
        if (kappa_cmd->parsed()) return cmd_kappa(kappa_paths);
        if (report_cmd->parsed()) {
            return cmd_report(report_paths, baseline, out_dir, fit_degree, relative);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
