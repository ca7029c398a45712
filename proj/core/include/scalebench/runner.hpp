#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "scalebench/backend.hpp"
#include "scalebench/bench.hpp"
#include "scalebench/cost_model.hpp"
#include "scalebench/http_backend.hpp"
#include "scalebench/metrics.hpp"
#include "scalebench/strategies.hpp"

namespace scalebench {

struct EndpointSpec {
    enum class Type { None, Http, Mock };
    Type type = Type::None;
    EndpointConfig http;
    std::string mock_script_path;
};

/// Explicit strategy parameters, the alternative to anchoring on k.
struct ExplicitParams {
    std::optional<std::uint64_t> k;
    std::optional<std::uint64_t> prm_steps;
    std::optional<std::uint64_t> prm_candidates;
    std::optional<std::uint64_t> bf_tokens;
    std::optional<std::uint64_t> max_tokens;
};

struct CampaignConfig {
    std::string dataset_path;
    std::optional<std::vector<std::string>> subsets;   ///< names; unset = all
    std::optional<std::vector<std::string>> languages; ///< unset = all
    StrategyKind strategy = StrategyKind::Greedy;

    /// Exactly one of anchor_k / params must be set.
    std::optional<std::uint64_t> anchor_k;
    std::optional<ExplicitParams> params;

    ModelSpec generator_spec{"generator", ModelRole::Generator, 1'500'000'000ULL};
    ModelSpec verifier_spec{"verifier", ModelRole::Verifier, 72'000'000'000ULL};

    EndpointSpec generator_endpoint;
    EndpointSpec reward_endpoint;
    EndpointSpec judge_endpoint;

    SamplingParams sampling{0.7, 0.95, 42};
    CostParams cost;
    double tolerance = 0.02;
    int concurrency = 8;
    std::string out_path;
    bool resume = false;
    UnscoredPolicy unscored_policy = UnscoredPolicy::CountIncorrect;

    static CampaignConfig from_json(const nlohmann::json& j);
    static CampaignConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;

    /// Digest of the canonical (sorted-key) serialization; stable under
    /// field reordering of the source document.
    std::string config_hash() const;
};

/// One line of the campaign output JSONL.
struct ResultRecord {
    std::string campaign_id;
    std::string config_hash;
    std::string problem_id;
    std::string language;
    std::string subset;
    std::string strategy;
    std::optional<std::string> final_answer;
    std::optional<bool> verdict;
    bool unscored = false;
    bool failed = false;
    std::string failure;
    std::uint64_t total_new_tokens = 0;
    double actual_flops = 0.0;
    double planned_flops = 0.0;
    std::uint64_t wall_ms = 0;
    std::string started_at;
    std::string finished_at;
    bool tokens_estimated = false;

    nlohmann::json to_json() const;
    static ResultRecord from_json(const nlohmann::json& j);
};

struct ExecutionPlan {
    CampaignConfig config;
    std::string config_hash;
    Dataset items;
    std::optional<BudgetPlan> budget; ///< set when anchored on k

    // resolved effective parameters for the chosen strategy
    std::uint64_t k = 0;
    std::uint64_t prm_steps = 0;
    std::uint64_t prm_candidates = 0;
    std::uint64_t bf_tokens = 0;
    std::uint64_t max_tokens = 0;

    double planned_flops_per_item = 0.0;
    double planned_total_flops = 0.0;

    nlohmann::json to_json() const;
};

/// Materializes the budget (via match_budget when anchored), loads and
/// slices the dataset, and prices the work grid.
ExecutionPlan plan(const CampaignConfig& config);

struct RunOptions {
    /// Stop after writing this many new records, leaving the output
    /// without its checksum line (an interrupted campaign).
    std::optional<std::size_t> stop_after_items;
    std::ostream* log = nullptr;
};

struct RunSummary {
    std::size_t completed = 0;
    std::size_t skipped = 0; ///< resumed items found in the output
    std::size_t failed = 0;
    std::size_t unscored = 0;
    bool finished = true; ///< false when stop_after_items cut the run short
    std::map<std::string, double> per_language_accuracy;
};

/// Executes the plan with a bounded worker pool; records append in plan
/// order, one fsync-free flush per line, checksum line on completion.
/// With config.resume, items already present in the output are skipped.
RunSummary run(const ExecutionPlan& plan, const RunOptions& options = {});

struct ReportOptions {
    std::vector<std::string> result_paths;
    std::optional<std::string> baseline_path;
    std::string out_dir;
    int fit_degree = 3;
    bool relative_gain = false;
};

struct SeriesReport {
    std::string name;
    std::string config_hash;
    std::string strategy;
    double planned_flops = 0.0;
    /// subset -> language -> accuracy
    std::map<std::string, std::map<std::string, double>> accuracy;
    std::map<std::string, Dispersion> subset_dispersion;
    std::map<std::string, KappaResult> subset_kappa;
};

struct ReportBundle {
    std::vector<SeriesReport> series;
    /// subset -> language -> gain (treatment minus baseline), when a
    /// baseline was supplied; one table per non-baseline series
    std::map<std::string, std::map<std::string, std::map<std::string, double>>> gains;
    /// subset -> (points, fit); points are (planned FLOPs, mean accuracy)
    std::map<std::string, std::vector<std::pair<double, double>>> trend_points;
    std::map<std::string, PolyFit> trend_fits;
    std::vector<std::string> warnings;
};

/// Aggregates result files into CSV + JSON tables under out_dir.
ReportBundle report(const ReportOptions& options);

/// Reads one result JSONL file, skipping checksum lines. Throws on
/// malformed lines.
std::vector<ResultRecord> load_results(const std::filesystem::path& path);

nlohmann::json to_json(const BudgetPlan& plan);

} // namespace scalebench
