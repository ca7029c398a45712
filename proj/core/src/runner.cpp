#include "scalebench/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "scalebench/digest.hpp"
#include "scalebench/mock_backend.hpp"
#include "scalebench/verify.hpp"

namespace scalebench {

using nlohmann::json;

namespace {

std::string iso_utc(std::int64_t epoch_seconds) {
    const std::time_t t = static_cast<std::time_t>(epoch_seconds);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::optional<std::vector<std::string>> parse_languages(const json& j) {
    if (!j.contains("languages")) return std::nullopt;
    const auto& langs = j.at("languages");
    if (langs.is_string()) {
        std::string name = langs.get<std::string>();
        if (name.rfind("group:", 0) == 0) name = name.substr(6);
        return language_group(name);
    }
    std::vector<std::string> out;
    for (const auto& l : langs) out.push_back(l.get<std::string>());
    return out;
}

EndpointSpec endpoint_from_json(const json& j) {
    EndpointSpec spec;
    if (j.is_null()) return spec;
    const std::string type = j.value("type", "http");
    if (type == "mock") {
        spec.type = EndpointSpec::Type::Mock;
        spec.mock_script_path = j.at("script").get<std::string>();
        return spec;
    }
    if (type != "http") throw ConfigError("unknown endpoint type: " + type);
    spec.type = EndpointSpec::Type::Http;
    spec.http.url = j.at("url").get<std::string>();
    spec.http.model = j.value("model", "");
    spec.http.api_key = j.value("api_key", "");
    spec.http.max_retries = j.value("max_retries", spec.http.max_retries);
    spec.http.backoff_ms = j.value("backoff_ms", spec.http.backoff_ms);
    spec.http.timeout_sec = j.value("timeout_sec", spec.http.timeout_sec);
    spec.http.token_estimate_ratio =
        j.value("token_estimate_ratio", spec.http.token_estimate_ratio);
    return spec;
}

json endpoint_to_json(const EndpointSpec& spec) {
    switch (spec.type) {
    case EndpointSpec::Type::None: return nullptr;
    case EndpointSpec::Type::Mock:
        return {{"type", "mock"}, {"script", spec.mock_script_path}};
    case EndpointSpec::Type::Http:
        return {{"type", "http"},
                {"url", spec.http.url},
                {"model", spec.http.model},
                {"max_retries", spec.http.max_retries},
                {"backoff_ms", spec.http.backoff_ms},
                {"timeout_sec", spec.http.timeout_sec},
                {"token_estimate_ratio", spec.http.token_estimate_ratio}};
    }
    return nullptr;
}

std::uint64_t u64_from_number(const json& j, const char* what) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number()) {
        const double v = j.get<double>();
        if (v < 0) throw ConfigError(std::string(what) + " must be non-negative");
        return static_cast<std::uint64_t>(std::llround(v));
    }
    throw ConfigError(std::string(what) + " must be a number");
}

} // namespace

CampaignConfig CampaignConfig::from_json(const json& j) {
    CampaignConfig cfg;
    cfg.dataset_path = j.at("dataset").get<std::string>();
    if (j.contains("subsets")) {
        cfg.subsets = std::vector<std::string>{};
        for (const auto& s : j.at("subsets")) cfg.subsets->push_back(s.get<std::string>());
    }
    cfg.languages = parse_languages(j);
    cfg.strategy = strategy_from_string(j.at("strategy").get<std::string>());

    if (j.contains("anchor_k")) cfg.anchor_k = u64_from_number(j.at("anchor_k"), "anchor_k");
    if (j.contains("params")) {
        ExplicitParams p;
        const auto& pj = j.at("params");
        if (pj.contains("k")) p.k = u64_from_number(pj.at("k"), "params.k");
        if (pj.contains("steps")) p.prm_steps = u64_from_number(pj.at("steps"), "params.steps");
        if (pj.contains("candidates")) {
            p.prm_candidates = u64_from_number(pj.at("candidates"), "params.candidates");
        }
        if (pj.contains("bf_tokens")) {
            p.bf_tokens = u64_from_number(pj.at("bf_tokens"), "params.bf_tokens");
        }
        if (pj.contains("max_tokens")) {
            p.max_tokens = u64_from_number(pj.at("max_tokens"), "params.max_tokens");
        }
        cfg.params = p;
    }
    if (cfg.anchor_k.has_value() == cfg.params.has_value()) {
        throw ConfigError("config must set exactly one of anchor_k / params");
    }

    if (j.contains("generator")) {
        const auto& g = j.at("generator");
        cfg.generator_spec.name = g.value("name", cfg.generator_spec.name);
        if (g.contains("params")) {
            cfg.generator_spec.param_count = u64_from_number(g.at("params"), "generator.params");
        }
        if (g.contains("endpoint")) cfg.generator_endpoint = endpoint_from_json(g.at("endpoint"));
    }
    if (j.contains("reward_model")) {
        const auto& r = j.at("reward_model");
        cfg.verifier_spec.name = r.value("name", cfg.verifier_spec.name);
        if (r.contains("params")) {
            cfg.verifier_spec.param_count = u64_from_number(r.at("params"), "reward_model.params");
        }
        if (r.contains("endpoint")) cfg.reward_endpoint = endpoint_from_json(r.at("endpoint"));
    }
    if (j.contains("judge") && j.at("judge").contains("endpoint")) {
        cfg.judge_endpoint = endpoint_from_json(j.at("judge").at("endpoint"));
    }

    if (j.contains("sampling")) {
        const auto& s = j.at("sampling");
        cfg.sampling.temperature = s.value("temperature", cfg.sampling.temperature);
        cfg.sampling.top_p = s.value("top_p", cfg.sampling.top_p);
        if (s.contains("seed")) cfg.sampling.seed = s.at("seed").get<std::int64_t>();
    }
    if (j.contains("cost")) {
        const auto& c = j.at("cost");
        cfg.cost.tokens_per_instance =
            c.value("tokens_per_instance", cfg.cost.tokens_per_instance);
        cfg.cost.step_tokens = c.value("step_tokens", cfg.cost.step_tokens);
    }
    cfg.tolerance = j.value("tolerance", cfg.tolerance);
    cfg.concurrency = j.value("concurrency", cfg.concurrency);
    if (cfg.concurrency < 1) throw ConfigError("concurrency must be >= 1");
    cfg.out_path = j.value("out", "");
    cfg.resume = j.value("resume", false);
    if (j.contains("unscored_policy")) {
        const std::string p = j.at("unscored_policy").get<std::string>();
        if (p == "count_incorrect") cfg.unscored_policy = UnscoredPolicy::CountIncorrect;
        else if (p == "exclude") cfg.unscored_policy = UnscoredPolicy::Exclude;
        else throw ConfigError("unknown unscored_policy: " + p);
    }
    return cfg;
}

CampaignConfig CampaignConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path.string());
    return from_json(j);
}

json CampaignConfig::to_json() const {
    // identity document: excludes out/resume so moving the output or
    // resuming does not change the campaign hash
    json j;
    j["dataset"] = dataset_path;
    if (subsets) j["subsets"] = *subsets;
    if (languages) j["languages"] = *languages;
    j["strategy"] = to_string(strategy);
    if (anchor_k) j["anchor_k"] = *anchor_k;
    if (params) {
        json p;
        if (params->k) p["k"] = *params->k;
        if (params->prm_steps) p["steps"] = *params->prm_steps;
        if (params->prm_candidates) p["candidates"] = *params->prm_candidates;
        if (params->bf_tokens) p["bf_tokens"] = *params->bf_tokens;
        if (params->max_tokens) p["max_tokens"] = *params->max_tokens;
        j["params"] = p;
    }
    j["generator"] = {{"name", generator_spec.name},
                      {"params", generator_spec.param_count},
                      {"endpoint", endpoint_to_json(generator_endpoint)}};
    j["reward_model"] = {{"name", verifier_spec.name},
                         {"params", verifier_spec.param_count},
                         {"endpoint", endpoint_to_json(reward_endpoint)}};
    j["judge"] = {{"endpoint", endpoint_to_json(judge_endpoint)}};
    j["sampling"] = {{"temperature", sampling.temperature}, {"top_p", sampling.top_p}};
    if (sampling.seed) j["sampling"]["seed"] = *sampling.seed;
    j["cost"] = {{"tokens_per_instance", cost.tokens_per_instance},
                 {"step_tokens", cost.step_tokens}};
    j["tolerance"] = tolerance;
    j["concurrency"] = concurrency;
    j["unscored_policy"] =
        unscored_policy == UnscoredPolicy::CountIncorrect ? "count_incorrect" : "exclude";
    return j;
}

std::string CampaignConfig::config_hash() const { return short_digest(to_json().dump()); }

json ResultRecord::to_json() const {
    json j;
    j["campaign_id"] = campaign_id;
    j["config_hash"] = config_hash;
    j["problem_id"] = problem_id;
    j["language"] = language;
    j["subset"] = subset;
    j["strategy"] = strategy;
    if (final_answer) j["final_answer"] = *final_answer;
    else j["final_answer"] = nullptr;
    if (verdict) j["verdict"] = *verdict;
    else j["verdict"] = nullptr;
    j["unscored"] = unscored;
    j["failed"] = failed;
    j["failure"] = failure;
    j["total_new_tokens"] = total_new_tokens;
    j["actual_flops"] = actual_flops;
    j["planned_flops"] = planned_flops;
    j["wall_ms"] = wall_ms;
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    j["tokens_estimated"] = tokens_estimated;
    return j;
}

ResultRecord ResultRecord::from_json(const json& j) {
    ResultRecord r;
    r.campaign_id = j.at("campaign_id").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.problem_id = j.at("problem_id").get<std::string>();
    r.language = j.at("language").get<std::string>();
    r.subset = j.at("subset").get<std::string>();
    r.strategy = j.at("strategy").get<std::string>();
    if (j.contains("final_answer") && !j.at("final_answer").is_null()) {
        r.final_answer = j.at("final_answer").get<std::string>();
    }
    if (j.contains("verdict") && !j.at("verdict").is_null()) {
        r.verdict = j.at("verdict").get<bool>();
    }
    r.unscored = j.value("unscored", false);
    r.failed = j.value("failed", false);
    r.failure = j.value("failure", "");
    r.total_new_tokens = j.value("total_new_tokens", 0ULL);
    r.actual_flops = j.value("actual_flops", 0.0);
    r.planned_flops = j.value("planned_flops", 0.0);
    r.wall_ms = j.value("wall_ms", 0ULL);
    r.started_at = j.value("started_at", "");
    r.finished_at = j.value("finished_at", "");
    r.tokens_estimated = j.value("tokens_estimated", false);
    return r;
}

json ExecutionPlan::to_json() const {
    json j;
    j["config_hash"] = config_hash;
    j["strategy"] = to_string(config.strategy);
    j["work_items"] = items.size();
    json params;
    switch (config.strategy) {
    case StrategyKind::Greedy: params["max_tokens"] = max_tokens; break;
    case StrategyKind::Orm: params["k"] = k; break;
    case StrategyKind::Prm:
        params["steps"] = prm_steps;
        params["candidates"] = prm_candidates;
        params["step_tokens"] = config.cost.step_tokens;
        break;
    case StrategyKind::Bf: params["bf_tokens"] = bf_tokens; break;
    }
    j["params"] = params;
    if (budget) j["budget"] = scalebench::to_json(*budget);
    j["planned_flops_per_item"] = planned_flops_per_item;
    j["planned_total_flops"] = planned_total_flops;
    return j;
}

json to_json(const BudgetPlan& plan) {
    json j;
    j["k"] = plan.k;
    j["prm_steps"] = plan.prm_steps;
    j["prm_candidates"] = plan.prm_candidates;
    j["bf_tokens"] = plan.bf_tokens;
    j["bf_tokens_exact"] = plan.bf_tokens_exact;
    j["flops_orm"] = plan.flops_orm;
    j["flops_prm"] = plan.flops_prm;
    j["flops_bf"] = plan.flops_bf;
    j["tolerance"] = plan.tolerance;
    return j;
}

ExecutionPlan plan(const CampaignConfig& config) {
    if (config.anchor_k.has_value() == config.params.has_value()) {
        throw ConfigError("config must set exactly one of anchor_k / params");
    }

    ExecutionPlan out;
    out.config = config;
    out.config_hash = config.config_hash();

    const Dataset full = load_dataset(config.dataset_path);
    std::optional<std::vector<Subset>> subset_filter;
    if (config.subsets) {
        subset_filter = std::vector<Subset>{};
        for (const auto& name : *config.subsets) {
            subset_filter->push_back(subset_from_string(name));
        }
    }
    out.items = full.slice(subset_filter, config.languages);

    const ModelSpec& gen = config.generator_spec;
    const ModelSpec& ver = config.verifier_spec;

    if (config.anchor_k) {
        out.budget = match_budget(gen, ver, *config.anchor_k, config.cost, config.tolerance);
        switch (config.strategy) {
        case StrategyKind::Greedy:
            throw ConfigError("greedy campaigns take explicit params.max_tokens, "
                              "not an anchor_k");
        case StrategyKind::Orm:
            out.k = out.budget->k;
            out.planned_flops_per_item = out.budget->flops_orm;
            break;
        case StrategyKind::Prm:
            out.prm_steps = out.budget->prm_steps;
            out.prm_candidates = out.budget->prm_candidates;
            out.planned_flops_per_item = out.budget->flops_prm;
            break;
        case StrategyKind::Bf:
            out.bf_tokens = out.budget->bf_tokens;
            out.planned_flops_per_item = out.budget->flops_bf;
            break;
        }
    } else {
        const ExplicitParams& p = *config.params;
        switch (config.strategy) {
        case StrategyKind::Greedy:
            if (!p.max_tokens) throw ConfigError("greedy params need max_tokens");
            out.max_tokens = *p.max_tokens;
            out.planned_flops_per_item = generator_flops(gen, config.cost.tokens_per_instance);
            break;
        case StrategyKind::Orm:
            if (!p.k) throw ConfigError("orm params need k");
            out.k = *p.k;
            out.planned_flops_per_item = orm_flops(gen, ver, out.k, config.cost);
            break;
        case StrategyKind::Prm:
            if (!p.prm_steps || !p.prm_candidates) {
                throw ConfigError("prm params need steps and candidates");
            }
            out.prm_steps = *p.prm_steps;
            out.prm_candidates = *p.prm_candidates;
            out.planned_flops_per_item =
                prm_flops(gen, ver, out.prm_steps, out.prm_candidates, config.cost);
            break;
        case StrategyKind::Bf:
            if (!p.bf_tokens) throw ConfigError("bf params need bf_tokens");
            out.bf_tokens = *p.bf_tokens;
            out.planned_flops_per_item = bf_flops(gen, out.bf_tokens);
            break;
        }
    }

    out.planned_total_flops =
        out.planned_flops_per_item * static_cast<double>(out.items.size());
    return out;
}

namespace {

struct BuiltBackends {
    Backends backends;
    bool deterministic = false;
};

BuiltBackends build_backends(const ExecutionPlan& plan) {
    const CampaignConfig& cfg = plan.config;
    auto limiter = std::make_shared<RequestLimiter>(std::max(cfg.concurrency, 8));

    const bool needs_reward =
        cfg.strategy == StrategyKind::Orm || cfg.strategy == StrategyKind::Prm;
    bool needs_judge = false;
    for (const auto& p : plan.items) {
        if (p.eval_method == EvalMethod::Judge) {
            needs_judge = true;
            break;
        }
    }

    // env fallback applies only to roles this campaign actually uses, so
    // stray endpoint variables cannot affect (or de-determinize) a run
    const auto build_one = [&](const EndpointSpec& spec, const char* env_url,
                               ModelRole role,
                               bool needed) -> std::pair<EndpointSpec::Type, Backends> {
        Backends out;
        EndpointSpec effective = spec;
        if (needed && effective.type == EndpointSpec::Type::None &&
            std::getenv(env_url)) {
            effective.type = EndpointSpec::Type::Http;
            effective.http.url = std::getenv(env_url);
            if (const char* key = std::getenv("SCALEBENCH_API_KEY")) {
                effective.http.api_key = key;
            }
        }
        if (!needed) effective.type = EndpointSpec::Type::None;
        switch (effective.type) {
        case EndpointSpec::Type::None: break;
        case EndpointSpec::Type::Mock: {
            auto script = MockScript::load(effective.mock_script_path);
            auto all = make_mock_backends(std::move(script));
            if (role == ModelRole::Generator) out.generator = all.generator;
            if (role == ModelRole::Verifier) out.reward = all.reward;
            if (role == ModelRole::Judge) out.judge = all.judge;
            break;
        }
        case EndpointSpec::Type::Http:
            if (role == ModelRole::Generator) {
                out.generator = make_http_generator(effective.http, limiter);
            }
            if (role == ModelRole::Verifier) {
                out.reward = make_http_reward(effective.http, limiter);
            }
            if (role == ModelRole::Judge) {
                out.judge = make_http_judge(effective.http, limiter);
            }
            break;
        }
        return {effective.type, out};
    };

    const auto [gen_type, gen] = build_one(cfg.generator_endpoint, "SCALEBENCH_GEN_URL",
                                           ModelRole::Generator, true);
    const auto [rm_type, rm] = build_one(cfg.reward_endpoint, "SCALEBENCH_RM_URL",
                                         ModelRole::Verifier, needs_reward);
    const auto [judge_type, judge] = build_one(cfg.judge_endpoint, "SCALEBENCH_JUDGE_URL",
                                               ModelRole::Judge, needs_judge);

    BuiltBackends out;
    out.backends.generator = gen.generator;
    out.backends.reward = rm.reward;
    out.backends.judge = judge.judge;

    if (!out.backends.generator) {
        throw ConfigError("no generator endpoint configured (config or "
                          "SCALEBENCH_GEN_URL)");
    }
    if (needs_reward && !out.backends.reward) {
        throw ConfigError("strategy " + to_string(cfg.strategy) +
                          " needs a reward endpoint (config or SCALEBENCH_RM_URL)");
    }
    if (needs_judge && !out.backends.judge) {
        throw ConfigError("dataset slice contains judge-evaluated problems but no "
                          "judge endpoint is configured (config or SCALEBENCH_JUDGE_URL)");
    }

    out.deterministic = gen_type == EndpointSpec::Type::Mock &&
                        rm_type != EndpointSpec::Type::Http &&
                        judge_type != EndpointSpec::Type::Http;
    return out;
}

struct ExistingOutput {
    std::string record_bytes; ///< all complete record lines, byte-exact
    std::vector<ResultRecord> records;
    std::uintmax_t keep_bytes = 0;
};

ExistingOutput read_existing(const std::filesystem::path& path) {
    ExistingOutput out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string content = buf.str();

    std::size_t pos = 0;
    while (pos < content.size()) {
        const auto nl = content.find('\n', pos);
        if (nl == std::string::npos) break; // partial trailing line: drop
        const std::string line = content.substr(pos, nl - pos);
        if (!line.empty()) {
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded()) {
                throw Error(path.string() + ": malformed JSONL line on resume");
            }
            if (!j.contains("campaign_checksum")) {
                out.records.push_back(ResultRecord::from_json(j));
                out.record_bytes.append(content, pos, nl - pos + 1);
                out.keep_bytes = nl + 1;
            }
            // checksum lines are dropped and rewritten at completion
        }
        pos = nl + 1;
    }
    return out;
}

ResultRecord make_record(const ExecutionPlan& plan, const Problem& problem,
                         const Attempt& attempt, std::size_t item_index,
                         bool deterministic) {
    ResultRecord rec;
    rec.campaign_id = plan.config_hash;
    rec.config_hash = plan.config_hash;
    rec.problem_id = problem.id;
    rec.language = problem.language;
    rec.subset = to_string(problem.subset);
    rec.strategy = to_string(attempt.strategy);
    rec.final_answer = attempt.extracted_answer;
    rec.verdict = attempt.verdict;
    rec.unscored = attempt.unscored;
    rec.failed = attempt.failed;
    rec.failure = attempt.failure;
    rec.total_new_tokens = attempt.total_new_tokens;
    rec.actual_flops = attempt.actual_flops;
    rec.planned_flops = plan.planned_flops_per_item;
    rec.tokens_estimated = attempt.token_counts_estimated;
    if (deterministic) {
        rec.started_at = iso_utc(static_cast<std::int64_t>(item_index) * 2);
        rec.finished_at = iso_utc(static_cast<std::int64_t>(item_index) * 2 + 1);
        rec.wall_ms = 0;
    }
    return rec;
}

Attempt execute_strategy(const ExecutionPlan& plan, const StrategyContext& ctx,
                         const Problem& problem) {
    switch (plan.config.strategy) {
    case StrategyKind::Greedy: return run_greedy(ctx, problem, plan.max_tokens);
    case StrategyKind::Orm: return run_orm(ctx, problem, plan.k);
    case StrategyKind::Prm:
        return run_prm(ctx, problem, plan.prm_steps, plan.prm_candidates,
                       plan.config.cost.step_tokens);
    case StrategyKind::Bf: return run_bf(ctx, problem, plan.bf_tokens);
    }
    throw ConfigError("unknown strategy");
}

} // namespace

RunSummary run(const ExecutionPlan& plan, const RunOptions& options) {
    if (plan.config.out_path.empty()) throw ConfigError("config has no output path");
    const std::filesystem::path out_path = plan.config.out_path;
    if (out_path.has_parent_path()) {
        std::filesystem::create_directories(out_path.parent_path());
    }

    const auto built = build_backends(plan);

    StrategyContext ctx;
    ctx.backends = built.backends;
    ctx.generator_spec = plan.config.generator_spec;
    ctx.verifier_spec = plan.config.verifier_spec;
    ctx.sampling = plan.config.sampling;

    Verifier verifier(built.backends.judge);

    RunSummary summary;

    // resume bookkeeping
    ExistingOutput existing;
    if (plan.config.resume && std::filesystem::exists(out_path)) {
        existing = read_existing(out_path);
        for (const auto& rec : existing.records) {
            if (rec.config_hash != plan.config_hash) {
                throw ConfigError("resume: existing output " + out_path.string() +
                                  " was produced by config " + rec.config_hash +
                                  ", current config is " + plan.config_hash);
            }
        }
        std::filesystem::resize_file(out_path, existing.keep_bytes);
        summary.skipped = existing.records.size();
    }

    std::set<std::pair<std::string, std::string>> done;
    for (const auto& rec : existing.records) done.insert({rec.problem_id, rec.language});

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < plan.items.size(); ++i) {
        const Problem& p = plan.items.at(i);
        if (!done.count({p.id, p.language})) todo.push_back(i);
    }

    std::ofstream out(out_path, plan.config.resume ? std::ios::app : std::ios::trunc);
    if (!out) throw Error("cannot open output: " + out_path.string());

    std::mutex mutex;
    std::condition_variable cv;
    std::map<std::size_t, ResultRecord> ready;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};

    const auto worker = [&] {
        while (!stop.load()) {
            const std::size_t slot = next.fetch_add(1);
            if (slot >= todo.size()) break;
            const std::size_t item_index = todo[slot];
            const Problem& problem = plan.items.at(item_index);

            const auto t0 = std::chrono::steady_clock::now();
            ResultRecord rec;
            try {
                Attempt attempt;
                try {
                    attempt = execute_strategy(plan, ctx, problem);
                } catch (const std::exception& e) {
                    attempt.problem_id = problem.id;
                    attempt.strategy = plan.config.strategy;
                    attempt.failed = true;
                    attempt.failure = e.what();
                }
                verifier.verify(problem, attempt);
                rec = make_record(plan, problem, attempt, item_index,
                                  built.deterministic);
            } catch (const std::exception& e) {
                Attempt broken;
                broken.problem_id = problem.id;
                broken.strategy = plan.config.strategy;
                broken.failed = true;
                broken.unscored = true;
                broken.failure = e.what();
                rec = make_record(plan, problem, broken, item_index,
                                  built.deterministic);
            }
            if (!built.deterministic) {
                const auto now = std::chrono::system_clock::now();
                const auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - t0);
                rec.wall_ms = static_cast<std::uint64_t>(wall.count());
                const auto secs = std::chrono::duration_cast<std::chrono::seconds>(
                                      now.time_since_epoch())
                                      .count();
                rec.finished_at = iso_utc(secs);
                rec.started_at = iso_utc(secs - wall.count() / 1000);
            }
            {
                std::lock_guard lock(mutex);
                ready.emplace(slot, std::move(rec));
            }
            cv.notify_all();
        }
    };

    const int worker_count = std::max(
        1, std::min<int>(plan.config.concurrency, static_cast<int>(todo.size())));
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(worker_count));
    if (!todo.empty()) {
        for (int i = 0; i < worker_count; ++i) workers.emplace_back(worker);
    }

    std::string hashed_bytes = existing.record_bytes;
    std::size_t written = 0;
    for (std::size_t slot = 0; slot < todo.size(); ++slot) {
        if (options.stop_after_items && written >= *options.stop_after_items) {
            stop.store(true);
            cv.notify_all();
            summary.finished = false;
            break;
        }
        ResultRecord rec;
        {
            std::unique_lock lock(mutex);
            cv.wait(lock, [&] { return ready.count(slot) > 0; });
            rec = std::move(ready.at(slot));
            ready.erase(slot);
        }
        const std::string line = rec.to_json().dump();
        out << line << '\n';
        out.flush();
        if (!out) throw Error("write failed: " + out_path.string());
        hashed_bytes += line;
        hashed_bytes += '\n';
        written += 1;
        summary.completed += 1;
        if (rec.failed) summary.failed += 1;
        if (rec.unscored) summary.unscored += 1;
        existing.records.push_back(std::move(rec));
    }
    stop.store(true);
    for (auto& w : workers) w.join();

    if (summary.finished) {
        json checksum_line;
        checksum_line["campaign_checksum"] = short_digest(hashed_bytes);
        checksum_line["records"] = existing.records.size();
        out << checksum_line.dump() << '\n';
        out.flush();
    }
    out.close();

    // exit summary: per-language accuracy over everything in the file
    std::vector<VerdictRecord> verdicts;
    for (const auto& rec : existing.records) {
        verdicts.push_back({rec.problem_id, rec.language, rec.subset, rec.verdict});
    }
    summary.per_language_accuracy =
        accuracy(verdicts, GroupBy::Language, plan.config.unscored_policy).by_group;

    if (options.log) {
        auto& log = *options.log;
        log << "campaign " << plan.config_hash << ": " << summary.completed
            << " completed, " << summary.skipped << " skipped, " << summary.failed
            << " failed\n";
        for (const auto& [lang, acc] : summary.per_language_accuracy) {
            log << "  accuracy[" << lang << "] = " << fmt_double(acc) << "\n";
        }
    }
    return summary;
}

std::vector<ResultRecord> load_results(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open results: " + path.string());
    std::vector<ResultRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw Error(path.string() + ":" + std::to_string(line_no) +
                        ": malformed JSONL line");
        }
        if (j.contains("campaign_checksum")) continue;
        records.push_back(ResultRecord::from_json(j));
    }
    return records;
}

namespace {

struct Series {
    std::string name;
    std::string hash;
    std::vector<ResultRecord> records;
};

std::vector<Series> split_series(const std::filesystem::path& path,
                                 std::vector<std::string>& warnings) {
    const auto records = load_results(path);
    if (records.empty()) throw Error("empty results: " + path.string());
    std::map<std::string, std::vector<ResultRecord>> by_hash;
    for (const auto& rec : records) by_hash[rec.config_hash].push_back(rec);

    std::vector<Series> out;
    const std::string stem = path.stem().string();
    if (by_hash.size() > 1) {
        warnings.push_back(path.string() + ": mixed config hashes in one file; "
                                           "series split by hash");
    }
    for (auto& [hash, recs] : by_hash) {
        Series s;
        s.name = by_hash.size() == 1 ? stem : stem + "#" + hash;
        s.hash = hash;
        s.records = std::move(recs);
        out.push_back(std::move(s));
    }
    return out;
}

SeriesReport build_series_report(const Series& series,
                                 std::vector<std::string>& warnings) {
    SeriesReport rep;
    rep.name = series.name;
    rep.config_hash = series.hash;
    rep.strategy = series.records.front().strategy;
    rep.planned_flops = series.records.front().planned_flops;

    std::map<std::string, std::vector<VerdictRecord>> by_subset;
    for (const auto& rec : series.records) {
        by_subset[rec.subset].push_back(
            {rec.problem_id, rec.language, rec.subset, rec.verdict});
    }
    for (const auto& [subset, recs] : by_subset) {
        const auto acc = accuracy(recs, GroupBy::Language);
        rep.accuracy[subset] = acc.by_group;
        rep.subset_dispersion[subset] = dispersion(acc.by_group);
        try {
            rep.subset_kappa[subset] = fleiss_kappa(build_matrix(recs));
        } catch (const Error& e) {
            warnings.push_back(series.name + "/" + subset + ": kappa skipped: " +
                               e.what());
        }
    }
    return rep;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
}

} // namespace

ReportBundle report(const ReportOptions& options) {
    if (options.result_paths.empty()) throw Error("report: no result files given");

    ReportBundle bundle;

    std::optional<SeriesReport> baseline;
    if (options.baseline_path) {
        auto series = split_series(*options.baseline_path, bundle.warnings);
        if (series.size() > 1) {
            bundle.warnings.push_back("baseline has mixed hashes; using " +
                                      series.front().name);
        }
        baseline = build_series_report(series.front(), bundle.warnings);
        baseline->name = "baseline:" + baseline->name;
    }

    for (const auto& path : options.result_paths) {
        for (const auto& series : split_series(path, bundle.warnings)) {
            bundle.series.push_back(build_series_report(series, bundle.warnings));
        }
    }
    if (bundle.series.empty()) throw Error("report: no series found");

    // gain vs baseline, per subset, over the common language set
    if (baseline) {
        for (const auto& series : bundle.series) {
            std::map<std::string, std::map<std::string, double>> per_subset;
            for (const auto& [subset, treatment_acc] : series.accuracy) {
                const auto base_it = baseline->accuracy.find(subset);
                if (base_it == baseline->accuracy.end()) continue;
                std::map<std::string, double> base_common, treat_common;
                for (const auto& [lang, value] : treatment_acc) {
                    const auto bl = base_it->second.find(lang);
                    if (bl == base_it->second.end()) {
                        bundle.warnings.push_back(series.name + "/" + subset + "/" +
                                                  lang + ": missing in baseline, "
                                                  "dropped from gain");
                        continue;
                    }
                    base_common[lang] = bl->second;
                    treat_common[lang] = value;
                }
                if (base_common.empty()) continue;
                per_subset[subset] = options.relative_gain
                                         ? relative_gain(base_common, treat_common)
                                         : gain(base_common, treat_common);
            }
            bundle.gains[series.name] = std::move(per_subset);
        }
    }

    // FLOPs-vs-score trend per subset across series
    std::map<std::string, std::vector<std::pair<double, double>>> points;
    for (const auto& series : bundle.series) {
        for (const auto& [subset, disp] : series.subset_dispersion) {
            points[subset].push_back({series.planned_flops, disp.mean});
        }
    }
    for (auto& [subset, pts] : points) {
        std::sort(pts.begin(), pts.end());
        bundle.trend_points[subset] = pts;
        const int degree =
            std::min<int>(options.fit_degree, static_cast<int>(pts.size()) - 1);
        if (degree >= 1) {
            try {
                bundle.trend_fits[subset] = polyfit(pts, degree);
            } catch (const Error& e) {
                bundle.warnings.push_back("trend fit skipped for " + subset + ": " +
                                          e.what());
            }
        }
    }

    // ---- emit files ----
    const std::filesystem::path dir = options.out_dir;
    std::filesystem::create_directories(dir);

    {
        std::ostringstream csv;
        csv << "series,subset,language,accuracy\n";
        for (const auto& series : bundle.series) {
            for (const auto& [subset, langs] : series.accuracy) {
                for (const auto& [lang, acc] : langs) {
                    csv << series.name << "," << subset << "," << lang << ","
                        << fmt_double(acc) << "\n";
                }
            }
        }
        write_text(dir / "accuracy_by_language.csv", csv.str());
    }
    {
        std::ostringstream csv;
        csv << "series,subset,mean,std_dev\n";
        for (const auto& series : bundle.series) {
            for (const auto& [subset, disp] : series.subset_dispersion) {
                csv << series.name << "," << subset << "," << fmt_double(disp.mean)
                    << "," << fmt_double(disp.std_dev) << "\n";
            }
        }
        write_text(dir / "subset_summary.csv", csv.str());
    }
    {
        std::ostringstream csv;
        csv << "series,subset,kappa,p_bar,p_e,problems_used,degenerate\n";
        for (const auto& series : bundle.series) {
            for (const auto& [subset, kappa] : series.subset_kappa) {
                csv << series.name << "," << subset << "," << fmt_double(kappa.kappa)
                    << "," << fmt_double(kappa.p_bar) << "," << fmt_double(kappa.p_e)
                    << "," << kappa.problems_used << ","
                    << (kappa.degenerate ? "true" : "false") << "\n";
            }
        }
        write_text(dir / "kappa.csv", csv.str());
    }
    if (baseline) {
        std::ostringstream csv;
        csv << "series,subset,language,baseline,treatment,gain\n";
        for (const auto& [series_name, per_subset] : bundle.gains) {
            const auto* series_rep = &bundle.series.front();
            for (const auto& s : bundle.series) {
                if (s.name == series_name) series_rep = &s;
            }
            for (const auto& [subset, langs] : per_subset) {
                for (const auto& [lang, g] : langs) {
                    csv << series_name << "," << subset << "," << lang << ","
                        << fmt_double(baseline->accuracy.at(subset).at(lang)) << ","
                        << fmt_double(series_rep->accuracy.at(subset).at(lang)) << ","
                        << fmt_double(g) << "\n";
                }
            }
        }
        write_text(dir / "gain.csv", csv.str());
    }
    {
        std::ostringstream csv;
        csv << "subset,planned_flops,mean_accuracy\n";
        for (const auto& [subset, pts] : bundle.trend_points) {
            for (const auto& [flops, score] : pts) {
                csv << subset << "," << fmt_double(flops) << "," << fmt_double(score)
                    << "\n";
            }
        }
        write_text(dir / "trend.csv", csv.str());
    }
    {
        json j;
        for (const auto& series : bundle.series) {
            json s;
            s["name"] = series.name;
            s["config_hash"] = series.config_hash;
            s["strategy"] = series.strategy;
            s["planned_flops"] = series.planned_flops;
            s["accuracy"] = series.accuracy;
            for (const auto& [subset, disp] : series.subset_dispersion) {
                s["subset_summary"][subset] = {{"mean", disp.mean},
                                               {"std_dev", disp.std_dev}};
            }
            for (const auto& [subset, kappa] : series.subset_kappa) {
                s["kappa"][subset] = {{"kappa", kappa.kappa},
                                      {"p_bar", kappa.p_bar},
                                      {"p_e", kappa.p_e},
                                      {"problems_used", kappa.problems_used},
                                      {"degenerate", kappa.degenerate}};
            }
            j["series"].push_back(s);
        }
        j["gains"] = bundle.gains;
        for (const auto& [subset, pts] : bundle.trend_points) {
            json series_points = json::array();
            for (const auto& [flops, score] : pts) {
                series_points.push_back({{"planned_flops", flops}, {"score", score}});
            }
            j["trend"][subset]["points"] = series_points;
            const auto fit = bundle.trend_fits.find(subset);
            if (fit != bundle.trend_fits.end()) {
                j["trend"][subset]["fit"] = {
                    {"degree", fit->second.degree},
                    {"coefficients", fit->second.coefficients},
                    {"residual_ss", fit->second.residual_ss}};
            }
        }
        j["warnings"] = bundle.warnings;
        write_text(dir / "report.json", j.dump(2) + "\n");
    }

    return bundle;
}

} // namespace scalebench
