#include "scalebench/strategies.hpp"

#include <algorithm>
#include <cmath>

namespace scalebench {

std::string to_string(StrategyKind kind) {
    switch (kind) {
    case StrategyKind::Greedy: return "greedy";
    case StrategyKind::Orm: return "orm";
    case StrategyKind::Prm: return "prm";
    case StrategyKind::Bf: return "bf";
    }
    return "greedy";
}

StrategyKind strategy_from_string(const std::string& s) {
    if (s == "greedy") return StrategyKind::Greedy;
    if (s == "orm") return StrategyKind::Orm;
    if (s == "prm") return StrategyKind::Prm;
    if (s == "bf") return StrategyKind::Bf;
    throw ConfigError("unknown strategy: " + s);
}

double attempt_flops(const StrategyContext& ctx, std::uint64_t generated_tokens,
                     std::uint64_t reward_calls) {
    double flops = 2.0 * static_cast<double>(ctx.generator_spec.param_count) *
                   static_cast<double>(generated_tokens);
    if (reward_calls > 0) {
        flops += static_cast<double>(reward_calls) * 4.0 *
                 static_cast<double>(ctx.verifier_spec.param_count);
    }
    return flops;
}

namespace {

std::vector<Message> problem_messages(const Problem& problem) {
    return {{"user", problem.statement}};
}

void add_generated(Attempt& attempt, const Generation& gen) {
    attempt.segments.push_back(
        {gen.text, gen.new_token_count, SegmentOrigin::Generated, gen.finish_reason});
    attempt.total_new_tokens += gen.new_token_count;
    attempt.token_counts_estimated |= gen.token_count_estimated;
}

void add_marker(Attempt& attempt, std::string_view marker) {
    attempt.segments.push_back(
        {std::string(marker), 0, SegmentOrigin::ForcedMarker, FinishReason::Stop});
}

SamplingParams greedy_sampling(const StrategyContext& ctx) {
    SamplingParams s = ctx.sampling;
    s.temperature = 0.0;
    return s;
}

SamplingParams derived_sampling(const StrategyContext& ctx, std::int64_t offset) {
    SamplingParams s = ctx.sampling;
    s.seed = s.seed.value_or(0) + offset;
    return s;
}

Attempt fail_attempt(Attempt attempt, const std::exception& e) {
    attempt.failed = true;
    attempt.failure = e.what();
    return attempt;
}

// Cut text at the last line break; lacking one, at the last whitespace;
// lacking that too, keep it unchanged.
std::string truncate_at_last_break(const std::string& text) {
    const auto nl = text.find_last_of('\n');
    if (nl != std::string::npos) return text.substr(0, nl + 1);
    const auto ws = text.find_last_of(" \t");
    if (ws != std::string::npos) return text.substr(0, ws + 1);
    return text;
}

void require_within_cap(const Generation& gen, std::uint64_t cap) {
    if (gen.new_token_count > cap) {
        throw ProtocolError("backend returned " + std::to_string(gen.new_token_count) +
                            " tokens for a cap of " + std::to_string(cap));
    }
}

// Appends the marker plus one short temperature-0 completion; shared by
// the BF over-budget branch and the PRM no-stop fallback.
void forced_answer(const StrategyContext& ctx, const Problem& problem, Attempt& attempt,
                   std::string& text, std::uint64_t cap) {
    add_marker(attempt, kFinalAnswerMarker);
    if (!text.empty() && text.back() != '\n' && text.back() != ' ') text += ' ';
    text += kFinalAnswerMarker;

    GenRequest req;
    req.prompt_messages = problem_messages(problem);
    req.prefix = text;
    req.max_new_tokens = std::max<std::uint64_t>(1, cap);
    req.sampling = greedy_sampling(ctx);
    req.n_samples = 1;
    const auto gens = ctx.backends.generator->generate(req);
    if (!gens.empty()) {
        require_within_cap(gens.front(), req.max_new_tokens);
        add_generated(attempt, gens.front());
        text += gens.front().text;
    }
}

} // namespace

Attempt run_greedy(const StrategyContext& ctx, const Problem& problem,
                   std::uint64_t max_tokens) {
    Attempt attempt;
    attempt.problem_id = problem.id;
    attempt.strategy = StrategyKind::Greedy;

    GenRequest req;
    req.prompt_messages = problem_messages(problem);
    req.max_new_tokens = max_tokens;
    req.sampling = greedy_sampling(ctx);
    req.n_samples = 1;

    try {
        const auto gens = ctx.backends.generator->generate(req);
        if (gens.empty() || gens.front().finish_reason == FinishReason::Aborted) {
            throw BackendError("generation aborted");
        }
        add_generated(attempt, gens.front());
        attempt.final_text = gens.front().text;
    } catch (const std::exception& e) {
        return fail_attempt(std::move(attempt), e);
    }
    attempt.actual_flops = attempt_flops(ctx, attempt.total_new_tokens, 0);
    return attempt;
}

Attempt run_orm(const StrategyContext& ctx, const Problem& problem, std::uint64_t k) {
    Attempt attempt;
    attempt.problem_id = problem.id;
    attempt.strategy = StrategyKind::Orm;
    if (k == 0) return fail_attempt(std::move(attempt), ConfigError("orm: k must be >= 1"));

    GenRequest req;
    req.prompt_messages = problem_messages(problem);
    req.max_new_tokens = ctx.orm_max_tokens;
    req.sampling = derived_sampling(ctx, 0);
    req.n_samples = k;

    std::vector<Generation> gens;
    try {
        gens = ctx.backends.generator->generate(req);
    } catch (const std::exception& e) {
        return fail_attempt(std::move(attempt), e);
    }

    std::uint64_t reward_calls = 0;
    std::size_t best = gens.size();
    double best_score = 0.0;
    for (std::size_t i = 0; i < gens.size(); ++i) {
        if (gens[i].finish_reason == FinishReason::Aborted) {
            attempt.warnings.push_back("sample " + std::to_string(i) + " aborted");
            attempt.candidates_log.push_back({0, gens[i].text, 0.0, false});
            continue;
        }
        double score = 0.0;
        try {
            score = ctx.backends.reward
                        ->score_outcome(problem.statement, gens[i].text)
                        .value;
            reward_calls += 1;
        } catch (const std::exception& e) {
            attempt.warnings.push_back("sample " + std::to_string(i) +
                                       " scoring failed: " + e.what());
            attempt.candidates_log.push_back({0, gens[i].text, 0.0, false});
            continue;
        }
        attempt.candidates_log.push_back({0, gens[i].text, score, false});
        add_generated(attempt, gens[i]);
        if (best == gens.size() || score > best_score) {
            best = i;
            best_score = score;
        }
    }

    if (best == gens.size()) {
        return fail_attempt(std::move(attempt), BackendError("all samples failed"));
    }
    attempt.candidates_log[best].chosen = true;
    attempt.final_text = gens[best].text;
    attempt.actual_flops = attempt_flops(ctx, attempt.total_new_tokens, reward_calls);
    return attempt;
}

Attempt run_prm(const StrategyContext& ctx, const Problem& problem, std::uint64_t steps,
                std::uint64_t candidates, std::uint64_t step_tokens) {
    Attempt attempt;
    attempt.problem_id = problem.id;
    attempt.strategy = StrategyKind::Prm;
    if (steps == 0 || candidates == 0 || step_tokens == 0) {
        return fail_attempt(std::move(attempt),
                            ConfigError("prm: steps, candidates, step_tokens must be >= 1"));
    }

    std::string prefix;
    std::uint64_t reward_calls = 0;
    bool stopped = false;

    for (std::uint64_t step = 0; step < steps && !stopped; ++step) {
        struct Scored {
            Generation gen;
            double score;
        };
        std::vector<Scored> scored;
        for (std::uint64_t i = 0; i < candidates; ++i) {
            GenRequest req;
            req.prompt_messages = problem_messages(problem);
            if (!prefix.empty()) req.prefix = prefix;
            req.max_new_tokens = step_tokens;
            req.sampling = derived_sampling(
                ctx, static_cast<std::int64_t>(step * candidates + i));
            req.n_samples = 1;
            try {
                auto gens = ctx.backends.generator->generate(req);
                if (gens.empty() || gens.front().finish_reason == FinishReason::Aborted) {
                    throw BackendError("candidate aborted");
                }
                const double score =
                    ctx.backends.reward
                        ->score_step(problem.statement, prefix, gens.front().text)
                        .value;
                reward_calls += 1;
                scored.push_back({std::move(gens.front()), score});
            } catch (const std::exception& e) {
                attempt.warnings.push_back("step " + std::to_string(step + 1) +
                                           " candidate " + std::to_string(i) +
                                           " failed: " + e.what());
            }
        }
        if (scored.empty()) {
            attempt.final_text = prefix;
            attempt.actual_flops = attempt_flops(ctx, attempt.total_new_tokens, reward_calls);
            return fail_attempt(std::move(attempt),
                                BackendError("all candidates failed at step " +
                                             std::to_string(step + 1)));
        }
        std::size_t best = 0;
        for (std::size_t i = 1; i < scored.size(); ++i) {
            if (scored[i].score > scored[best].score) best = i;
        }
        for (std::size_t i = 0; i < scored.size(); ++i) {
            attempt.candidates_log.push_back(
                {static_cast<std::size_t>(step + 1), scored[i].gen.text, scored[i].score,
                 i == best});
            add_generated(attempt, scored[i].gen);
        }
        prefix += scored[best].gen.text;
        stopped = scored[best].gen.finish_reason == FinishReason::Stop;
    }

    if (!stopped) {
        // no candidate finished within S steps; force an extractable answer
        try {
            forced_answer(ctx, problem, attempt, prefix, ctx.forced_answer_cap);
        } catch (const std::exception& e) {
            attempt.final_text = prefix;
            attempt.actual_flops = attempt_flops(ctx, attempt.total_new_tokens, reward_calls);
            return fail_attempt(std::move(attempt), e);
        }
    }
    attempt.final_text = prefix;
    attempt.actual_flops = attempt_flops(ctx, attempt.total_new_tokens, reward_calls);
    return attempt;
}

Attempt run_bf(const StrategyContext& ctx, const Problem& problem,
               std::uint64_t bf_tokens) {
    Attempt attempt;
    attempt.problem_id = problem.id;
    attempt.strategy = StrategyKind::Bf;
    if (bf_tokens == 0) {
        return fail_attempt(std::move(attempt), ConfigError("bf: bf_tokens must be >= 1"));
    }

    const std::uint64_t budget = bf_tokens;
    const std::uint64_t threshold =
        static_cast<std::uint64_t>(std::floor(0.9 * static_cast<double>(budget)));

    std::string text;
    std::uint64_t generated = 0;
    std::int64_t round = 0;
    int zero_progress_rounds = 0;

    try {
        while (generated < threshold) {
            GenRequest req;
            req.prompt_messages = problem_messages(problem);
            if (!text.empty()) req.prefix = text;
            req.max_new_tokens =
                std::min<std::uint64_t>(ctx.bf_chunk_tokens, threshold - generated);
            req.sampling = derived_sampling(ctx, round++);
            req.n_samples = 1;
            const auto gens = ctx.backends.generator->generate(req);
            if (gens.empty() || gens.front().finish_reason == FinishReason::Aborted) {
                throw BackendError("generation aborted");
            }
            const Generation& gen = gens.front();
            require_within_cap(gen, req.max_new_tokens);
            add_generated(attempt, gen);
            text += gen.text;
            generated += gen.new_token_count;

            if (gen.new_token_count == 0 && gen.finish_reason == FinishReason::Stop) {
                if (++zero_progress_rounds >= 2) {
                    throw BackendError("backend made no progress across two rounds");
                }
            } else {
                zero_progress_rounds = 0;
            }

            if (gen.finish_reason == FinishReason::Stop && generated < threshold) {
                // premature finish: drop the concluding line and push on
                text = truncate_at_last_break(text);
                add_marker(attempt, kContinueMarker);
                text += kContinueMarker;
            }
        }
        forced_answer(ctx, problem, attempt, text,
                      std::min<std::uint64_t>(budget - generated, ctx.forced_answer_cap));
    } catch (const std::exception& e) {
        attempt.final_text = text;
        attempt.actual_flops = attempt_flops(ctx, attempt.total_new_tokens, 0);
        return fail_attempt(std::move(attempt), e);
    }

    attempt.final_text = text;
    attempt.actual_flops = attempt_flops(ctx, attempt.total_new_tokens, 0);
    if (attempt.total_new_tokens > budget) {
        throw std::logic_error("bf budget overrun: generated " +
                               std::to_string(attempt.total_new_tokens) + " of " +
                               std::to_string(budget));
    }
    return attempt;
}

} // namespace scalebench
