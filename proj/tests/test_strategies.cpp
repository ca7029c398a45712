#include <doctest.h>

#include <cmath>
#include <random>

#include "scalebench/mock_backend.hpp"
#include "scalebench/strategies.hpp"

using namespace scalebench;

namespace {

Problem make_problem(const std::string& statement = "solve the puzzle") {
    Problem p;
    p.id = "p1";
    p.subset = Subset::MtMath100;
    p.language = "en";
    p.statement = statement;
    p.gold_answer = "4";
    p.answer_type = AnswerType::Numeric;
    p.eval_method = EvalMethod::RuleBased;
    return p;
}

StrategyContext context_with(MockScript script) {
    StrategyContext ctx;
    ctx.backends = make_mock_backends(std::move(script));
    ctx.generator_spec = {"gen", ModelRole::Generator, 1'500'000'000ULL};
    ctx.verifier_spec = {"rm", ModelRole::Verifier, 72'000'000'000ULL};
    ctx.sampling.seed = 11;
    return ctx;
}

MockGenRule text_rule(const std::string& text) {
    MockGenRule rule;
    rule.text = text;
    return rule;
}

std::uint64_t generated_tokens_before_marker(const Attempt& attempt,
                                             std::string_view marker) {
    std::uint64_t total = 0;
    for (const auto& seg : attempt.segments) {
        if (seg.origin == SegmentOrigin::ForcedMarker && seg.text == marker) break;
        if (seg.origin == SegmentOrigin::Generated) total += seg.token_count;
    }
    return total;
}

bool has_marker(const Attempt& attempt, std::string_view marker) {
    for (const auto& seg : attempt.segments) {
        if (seg.origin == SegmentOrigin::ForcedMarker && seg.text == marker) return true;
    }
    return false;
}

} // namespace

TEST_SUITE("strategies") {

TEST_CASE("greedy: one temperature-zero generation, one segment") {
    MockScript script;
    script.gen_rules.push_back(text_rule("the answer is 4"));
    const auto ctx = context_with(script);

    const Attempt a = run_greedy(ctx, make_problem(), 64);
    CHECK(!a.failed);
    REQUIRE(a.segments.size() == 1);
    CHECK(a.segments[0].finish_reason == FinishReason::Stop);
    CHECK(a.final_text == "the answer is 4");
    CHECK(a.total_new_tokens == 4);
    CHECK(a.actual_flops == doctest::Approx(2.0 * 1.5e9 * 4).epsilon(1e-12));

    // tighter cap forces a length finish
    const Attempt clipped = run_greedy(ctx, make_problem(), 2);
    CHECK(clipped.segments[0].finish_reason == FinishReason::Length);
    CHECK(clipped.total_new_tokens == 2);

    // greedy determinism
    const Attempt again = run_greedy(ctx, make_problem(), 64);
    CHECK(again.final_text == a.final_text);
    CHECK(again.total_new_tokens == a.total_new_tokens);
}

TEST_CASE("orm selects the highest-scoring sample") {
    MockScript script;
    MockGenRule s0 = text_rule("candidate alpha");
    s0.if_sample_index = 0;
    MockGenRule s1 = text_rule("candidate beta");
    s1.if_sample_index = 1;
    script.gen_rules = {s0, s1};
    script.outcome_rules = {{"alpha", 0.2}, {"beta", 0.8}};
    const auto ctx = context_with(script);

    const Attempt a = run_orm(ctx, make_problem(), 2);
    CHECK(!a.failed);
    CHECK(a.final_text == "candidate beta");
    REQUIRE(a.candidates_log.size() == 2);
    CHECK(!a.candidates_log[0].chosen);
    CHECK(a.candidates_log[1].chosen);
    CHECK(a.candidates_log[0].score == 0.2);
    // two samples scored: two verifier calls in the accounting
    CHECK(a.actual_flops ==
          doctest::Approx(2.0 * 1.5e9 * a.total_new_tokens + 2 * 4.0 * 72e9));
}

TEST_CASE("orm ties break to the lowest sample index") {
    MockScript script;
    MockGenRule s0 = text_rule("first sample");
    s0.if_sample_index = 0;
    MockGenRule s1 = text_rule("second sample");
    s1.if_sample_index = 1;
    script.gen_rules = {s0, s1};
    script.default_score = 0.5;
    const auto ctx = context_with(script);

    const Attempt a = run_orm(ctx, make_problem(), 2);
    CHECK(a.final_text == "first sample");
    CHECK(a.candidates_log[0].chosen);
}

TEST_CASE("orm with k=1 degenerates to a single sample") {
    MockScript script;
    script.gen_rules.push_back(text_rule("only sample here"));
    script.default_score = 0.4;
    const auto ctx = context_with(script);

    const Attempt a = run_orm(ctx, make_problem(), 1);
    CHECK(a.final_text == "only sample here");
    CHECK(a.candidates_log.size() == 1);
}

TEST_CASE("orm proceeds over survivors when samples abort") {
    MockScript script;
    MockGenRule dead;
    dead.if_sample_index = 0;
    dead.abort = true;
    MockGenRule alive = text_rule("the survivor");
    script.gen_rules = {dead, alive};
    script.default_score = 0.3;
    const auto ctx = context_with(script);

    const Attempt a = run_orm(ctx, make_problem(), 2);
    CHECK(!a.failed);
    CHECK(a.final_text == "the survivor");
    REQUIRE(!a.warnings.empty());

    // every sample aborted: the attempt fails
    MockScript all_dead;
    MockGenRule dead_all;
    dead_all.abort = true;
    all_dead.gen_rules = {dead_all};
    const Attempt failed = run_orm(context_with(all_dead), make_problem(), 2);
    CHECK(failed.failed);
}

TEST_CASE("orm argmax is invariant under increasing score transforms") {
    const auto selection_with = [&](double lo, double hi) {
        MockScript script;
        MockGenRule s0 = text_rule("sample zero");
        s0.if_sample_index = 0;
        MockGenRule s1 = text_rule("sample one");
        s1.if_sample_index = 1;
        script.gen_rules = {s0, s1};
        script.outcome_rules = {{"zero", lo}, {"one", hi}};
        return run_orm(context_with(script), make_problem(), 2).final_text;
    };
    // f(x) = 3x + 1 preserves order, so the winner must not move
    CHECK(selection_with(0.2, 0.8) == selection_with(3 * 0.2 + 1, 3 * 0.8 + 1));
    CHECK(selection_with(0.9, 0.1) == selection_with(3 * 0.9 + 1, 3 * 0.1 + 1));
}

TEST_CASE("prm extends with the best candidate each step") {
    // step 1: both candidates identical; step 2: candidate B wins on score
    MockScript script;
    MockGenRule step1 = text_rule("start here now\ncontinuation follows next");
    step1.if_prefix_contains = std::nullopt;
    MockGenRule step2a = text_rule("path alpha stalls");
    step2a.if_prefix_contains = "start";
    step2a.if_seed = 11 + 2; // step 1 (0-based) * c=2 + index 0
    step2a.continuation = false;
    MockGenRule step2b = text_rule("path beta therefore wins");
    step2b.if_prefix_contains = "start";
    step2b.if_seed = 11 + 3;
    step2b.continuation = false;
    script.gen_rules = {step2a, step2b, step1};
    script.step_rules = {{"therefore", 0.9}};
    script.default_score = 0.1;
    const auto ctx = context_with(script);

    const Attempt a = run_prm(ctx, make_problem(), 2, 2, 3);
    CHECK(!a.failed);
    CHECK(a.final_text.find("path beta therefore") != std::string::npos);

    // exactly one chosen candidate per executed step
    std::map<std::size_t, int> chosen_per_step;
    for (const auto& c : a.candidates_log) chosen_per_step[c.step] += c.chosen ? 1 : 0;
    for (const auto& [step, count] : chosen_per_step) CHECK(count == 1);
}

TEST_CASE("prm stops early when the chosen candidate finishes") {
    MockScript script;
    script.gen_rules.push_back(text_rule("short answer"));
    script.default_score = 0.5;
    const auto ctx = context_with(script);

    // stream stops within the first chunk; S=5 must not run 5 steps
    const Attempt a = run_prm(ctx, make_problem(), 5, 2, 16);
    CHECK(!a.failed);
    std::size_t max_step = 0;
    for (const auto& c : a.candidates_log) max_step = std::max(max_step, c.step);
    CHECK(max_step == 1);
}

TEST_CASE("prm appends a forced answer when no candidate ever stops") {
    MockScript script;
    script.synth = true;
    script.synth_params = {200, 200, 13}; // streams always outlast the chunk
    script.default_score = 0.5;
    const auto ctx = context_with(script);

    const Attempt a = run_prm(ctx, make_problem(), 2, 2, 8);
    CHECK(!a.failed);
    CHECK(has_marker(a, kFinalAnswerMarker));
    CHECK(a.final_text.find(kFinalAnswerMarker) != std::string::npos);
}

TEST_CASE("prm fails the attempt when a whole step fails, keeping the trace") {
    MockScript script;
    MockGenRule step1 = text_rule("first chunk of text that keeps going beyond the cap");
    MockGenRule boom;
    boom.if_prefix_contains = "first";
    boom.fail = true;
    script.gen_rules = {boom, step1};
    script.default_score = 0.5;
    const auto ctx = context_with(script);

    const Attempt a = run_prm(ctx, make_problem(), 3, 2, 4);
    CHECK(a.failed);
    CHECK(!a.candidates_log.empty()); // step-1 trace retained
    CHECK(a.final_text.rfind("first", 0) == 0);
}

TEST_CASE("prm with S=1,c=1 equals one greedy chunk") {
    MockScript script;
    script.gen_rules.push_back(text_rule("tiny proof ends"));
    script.default_score = 0.5;
    const auto ctx = context_with(script);

    const Attempt prm = run_prm(ctx, make_problem(), 1, 1, 32);
    const Attempt greedy = run_greedy(ctx, make_problem(), 32);
    CHECK(prm.final_text == greedy.final_text);
}

TEST_CASE("bf: the 90% threshold forces an answer") {
    MockScript script;
    script.synth = true;
    script.synth_params = {5000, 5000, 12}; // effectively endless stream
    const auto ctx = context_with(script);

    const Attempt a = run_bf(ctx, make_problem(), 2048);
    CHECK(!a.failed);
    CHECK(a.total_new_tokens <= 2048);
    CHECK(has_marker(a, kFinalAnswerMarker));
    CHECK(!has_marker(a, kContinueMarker));
    // marker lands exactly at floor(0.9 * 2048) = 1843 generated tokens
    CHECK(generated_tokens_before_marker(a, kFinalAnswerMarker) == 1843);
}

TEST_CASE("bf: a natural stop below threshold appends the continue marker") {
    MockScript script;
    script.synth = true;
    script.synth_params = {100, 100, 9}; // stops every ~100 tokens
    const auto ctx = context_with(script);

    const Attempt a = run_bf(ctx, make_problem(), 2048);
    CHECK(!a.failed);
    CHECK(a.total_new_tokens <= 2048);
    CHECK(has_marker(a, kContinueMarker));
    CHECK(has_marker(a, kFinalAnswerMarker));
    CHECK(a.final_text.find(kContinueMarker) != std::string::npos);
}

TEST_CASE("bf: tiny budgets force the answer on the first round") {
    MockScript script;
    script.synth = true;
    script.synth_params = {50, 50, 7};
    const auto ctx = context_with(script);

    const Attempt a = run_bf(ctx, make_problem(), 10);
    CHECK(!a.failed);
    CHECK(a.total_new_tokens <= 10);
    CHECK(has_marker(a, kFinalAnswerMarker));
    CHECK(generated_tokens_before_marker(a, kFinalAnswerMarker) == 9);
}

TEST_CASE("bf: forced markers do not count as generated tokens") {
    MockScript script;
    script.synth = true;
    script.synth_params = {30, 60, 8};
    const auto ctx = context_with(script);

    const Attempt a = run_bf(ctx, make_problem(), 256);
    std::uint64_t generated = 0;
    for (const auto& seg : a.segments) {
        if (seg.origin == SegmentOrigin::Generated) generated += seg.token_count;
        else CHECK(seg.token_count == 0);
    }
    CHECK(generated == a.total_new_tokens);
}

TEST_CASE("bf budget safety and marker rules hold over random mock streams") {
    std::mt19937_64 rng(31337);
    for (int trial = 0; trial < 60; ++trial) {
        MockScript script;
        script.synth = true;
        const std::uint64_t lo = 1 + rng() % 300;
        script.synth_params = {lo, lo + rng() % 300, 5 + rng() % 15};
        StrategyContext ctx = context_with(script);
        ctx.sampling.seed = static_cast<std::int64_t>(rng() % 10'000);

        const std::uint64_t budget = 10 + rng() % 8183; // [10, 8192]
        Problem problem = make_problem("problem " + std::to_string(trial));
        const Attempt a = run_bf(ctx, problem, budget);

        REQUIRE(!a.failed);
        CHECK(a.total_new_tokens <= budget);

        const std::uint64_t threshold =
            static_cast<std::uint64_t>(std::floor(0.9 * double(budget)));
        CHECK(has_marker(a, kFinalAnswerMarker));
        CHECK(generated_tokens_before_marker(a, kFinalAnswerMarker) >= threshold);

        // Wait... appears iff some pre-marker round stopped early below threshold
        bool early_stop = false;
        std::uint64_t running = 0;
        for (const auto& seg : a.segments) {
            if (seg.origin == SegmentOrigin::ForcedMarker) {
                if (seg.text == kFinalAnswerMarker) break;
                continue;
            }
            running += seg.token_count;
            if (seg.finish_reason == FinishReason::Stop && running < threshold) {
                early_stop = true;
            }
        }
        CHECK(early_stop == has_marker(a, kContinueMarker));
    }
}

TEST_CASE("bf replays are deterministic") {
    MockScript script;
    script.synth = true;
    script.synth_params = {40, 90, 10};
    const auto ctx = context_with(script);

    const Attempt a = run_bf(ctx, make_problem(), 512);
    const Attempt b = run_bf(ctx, make_problem(), 512);
    CHECK(a.final_text == b.final_text);
    CHECK(a.total_new_tokens == b.total_new_tokens);
    REQUIRE(a.segments.size() == b.segments.size());
    for (std::size_t i = 0; i < a.segments.size(); ++i) {
        CHECK(a.segments[i].text == b.segments[i].text);
    }
}

TEST_CASE("orm k=1 and greedy produce identical text on a deterministic mock") {
    MockScript script;
    script.gen_rules.push_back(text_rule("the same text both ways"));
    script.default_score = 0.5;
    const auto ctx = context_with(script);

    const Attempt orm = run_orm(ctx, make_problem(), 1);
    const Attempt greedy = run_greedy(ctx, make_problem(), ctx.orm_max_tokens);
    CHECK(orm.final_text == greedy.final_text);
}

} // TEST_SUITE
