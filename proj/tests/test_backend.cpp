#include <doctest.h>

#include "scalebench/backend.hpp"
#include "scalebench/mock_backend.hpp"

using namespace scalebench;

namespace {

GenRequest request_for(const std::string& statement, std::uint64_t max_tokens = 256,
                       std::uint64_t n = 1) {
    GenRequest req;
    req.prompt_messages = {{"user", statement}};
    req.max_new_tokens = max_tokens;
    req.sampling.seed = 7;
    req.n_samples = n;
    return req;
}

} // namespace

TEST_SUITE("backend") {

TEST_CASE("judge prompt fills exactly three slots") {
    const std::string prompt = judge_prompt("What is 2+2?", "4", "I think it is 4");
    CHECK(prompt.find("<question>\nWhat is 2+2?\n</question>") != std::string::npos);
    CHECK(prompt.find("<answer>\n4\n</answer>") != std::string::npos);
    CHECK(prompt.find("<solution>\nI think it is 4\n</solution>") != std::string::npos);
    // template text is untouched
    CHECK(prompt.find("output [[TRUE]]") != std::string::npos);
    CHECK(prompt.find("output [[FALSE]]") != std::string::npos);
    CHECK(prompt.find("{..math question...}") != std::string::npos);
    CHECK(prompt.rfind("[Question]  \n<question>") != std::string::npos);
    CHECK(prompt.find("<math_question>") == std::string::npos);
    CHECK(prompt.find("<correct_answer>") == std::string::npos);
    CHECK(prompt.find("<model_solution>") == std::string::npos);
}

TEST_CASE("judge prompts are stable across calls") {
    CHECK(judge_prompt("q", "a", "s") == judge_prompt("q", "a", "s"));
}

TEST_CASE("verdict parsing wants exactly one marker kind") {
    CHECK(parse_judge_verdict("[[TRUE]]") == true);
    CHECK(parse_judge_verdict("...\n[[FALSE]]") == false);
    CHECK(parse_judge_verdict("sure [[TRUE]] definitely [[TRUE]]") == true);
    CHECK(parse_judge_verdict("maybe") == std::nullopt);
    CHECK(parse_judge_verdict("[[TRUE]] or [[FALSE]]") == std::nullopt);
    CHECK(parse_judge_verdict("") == std::nullopt);
}

TEST_CASE("token estimate applies the piece ratio") {
    CHECK(estimate_token_count("a b c", 1.3) == 4); // ceil(3.9)
    CHECK(estimate_token_count("", 1.3) == 0);
    CHECK(estimate_token_count("one", 1.0) == 1);
    CHECK(estimate_token_count("  spaced   out\ntext ", 1.0) == 3);
}

TEST_CASE("requests are validated") {
    GenRequest req = request_for("x");
    req.max_new_tokens = 0;
    CHECK_THROWS_AS(validate(req), ConfigError);
    req = request_for("x");
    req.n_samples = 0;
    CHECK_THROWS_AS(validate(req), ConfigError);
    req = request_for("x");
    req.sampling.top_p = 0.0;
    CHECK_THROWS_AS(validate(req), ConfigError);
    req = request_for("x");
    req.sampling.temperature = -1.0;
    CHECK_THROWS_AS(validate(req), ConfigError);
}

TEST_CASE("scripted mock replies with exact token counts") {
    MockScript script;
    script.gen_rules.push_back({std::nullopt, std::nullopt, std::nullopt, std::nullopt,
                                "answer is 4", false, false});
    auto backends = make_mock_backends(script);

    const auto gens = backends.generator->generate(request_for("any"));
    REQUIRE(gens.size() == 1);
    CHECK(gens[0].text == "answer is 4");
    CHECK(gens[0].new_token_count == 3);
    CHECK(gens[0].finish_reason == FinishReason::Stop);
    CHECK(!gens[0].token_count_estimated);
}

TEST_CASE("max_new_tokens caps the reply") {
    MockScript script;
    script.default_text = "one two three four five";
    auto backends = make_mock_backends(script);

    const auto gens = backends.generator->generate(request_for("any", 1));
    CHECK(gens[0].new_token_count == 1);
    CHECK(gens[0].text == "one");
    CHECK(gens[0].finish_reason == FinishReason::Length);
}

TEST_CASE("n_samples returns a stable ordered batch") {
    MockScript script;
    MockGenRule first;
    first.if_sample_index = 0;
    first.text = "alpha";
    MockGenRule second;
    second.if_sample_index = 1;
    second.text = "beta";
    script.gen_rules = {first, second};
    auto backends = make_mock_backends(script);

    const auto run1 = backends.generator->generate(request_for("any", 16, 2));
    const auto run2 = backends.generator->generate(request_for("any", 16, 2));
    REQUIRE(run1.size() == 2);
    CHECK(run1[0].text == "alpha");
    CHECK(run1[1].text == "beta");
    CHECK(run1[0].text == run2[0].text);
    CHECK(run1[1].text == run2[1].text);
}

TEST_CASE("a seeded mock replays identically") {
    MockScript script;
    script.synth = true;
    script.synth_params = {8, 40, 9};
    auto backends = make_mock_backends(script);

    GenRequest req = request_for("a prompt", 64);
    const auto a = backends.generator->generate(req);
    const auto b = backends.generator->generate(req);
    CHECK(a[0].text == b[0].text);
    CHECK(a[0].new_token_count == b[0].new_token_count);

    req.sampling.seed = 8; // different seed, different stream
    const auto c = backends.generator->generate(req);
    CHECK(a[0].text != c[0].text);
}

TEST_CASE("prefix advances the scripted stream") {
    MockScript script;
    script.default_text = "one two three\nfour five six";
    auto backends = make_mock_backends(script);

    GenRequest req = request_for("any", 2);
    const auto head = backends.generator->generate(req);
    CHECK(head[0].text == "one two");
    CHECK(head[0].finish_reason == FinishReason::Length);

    req.prefix = head[0].text;
    req.max_new_tokens = 10;
    const auto tail = backends.generator->generate(req);
    CHECK(tail[0].text == " three\nfour five six"); // leading separator included
    CHECK(tail[0].finish_reason == FinishReason::Stop);
    CHECK(head[0].text + tail[0].text == "one two three\nfour five six");
}

TEST_CASE("exhausted scripted streams repeat their final line") {
    MockScript script;
    script.default_text = "thinking hard\nThe answer line";
    auto backends = make_mock_backends(script);

    GenRequest req = request_for("any", 32);
    req.prefix = "thinking hard The answer line"; // 5 words consumed
    const auto gens = backends.generator->generate(req);
    CHECK(gens[0].text == "\nThe answer line");
    CHECK(gens[0].finish_reason == FinishReason::Stop);
    CHECK(gens[0].new_token_count == 3);
}

TEST_CASE("outcome scores come from the contains table") {
    MockScript script;
    script.outcome_rules = {{"A", 0.9}, {"B", 0.1}};
    auto backends = make_mock_backends(script);

    CHECK(backends.reward->score_outcome("prob", "solution A").value == 0.9);
    CHECK(backends.reward->score_outcome("prob", "solution B").value == 0.1);
    CHECK(backends.reward->score_outcome("prob", "").value == 0.0); // default
    // determinism
    CHECK(backends.reward->score_outcome("prob", "solution A").value ==
          backends.reward->score_outcome("prob", "solution A").value);
}

TEST_CASE("step scores prefer the configured marker") {
    MockScript script;
    script.step_rules = {{"therefore", 0.8}};
    script.default_score = 0.2;
    auto backends = make_mock_backends(script);

    CHECK(backends.reward->score_step("prob", "", "and therefore x").value == 0.8);
    CHECK(backends.reward->score_step("prob", "", "however y").value == 0.2);
    // empty prefix scores like a first step
    CHECK(backends.reward->score_step("prob", "", "therefore").value ==
          backends.reward->score_step("prob", "prior text", "therefore").value);
}

TEST_CASE("mock judge verdicts parse through the shared parser") {
    MockScript yes;
    yes.judge_mode = MockScript::JudgeMode::Table;
    yes.judge_default = "[[TRUE]]";
    CHECK(make_mock_backends(yes).judge->judge("q", "4", "sol").correct);

    MockScript no;
    no.judge_mode = MockScript::JudgeMode::Table;
    no.judge_default = "[[FALSE]]";
    CHECK(!make_mock_backends(no).judge->judge("q", "4", "sol").correct);

    MockScript bad;
    bad.judge_mode = MockScript::JudgeMode::Table;
    bad.judge_default = "maybe";
    CHECK_THROWS_AS(make_mock_backends(bad).judge->judge("q", "4", "sol"),
                    VerdictParseError);
}

TEST_CASE("contains-gold judge reads the filled prompt slots") {
    MockScript script; // ContainsGold is the default mode
    auto judge = make_mock_backends(script).judge;
    CHECK(judge->judge("q", "42", "the result is 42").correct);
    CHECK(!judge->judge("q", "42", "the result is 43").correct);
}

TEST_CASE("mock scripts load from JSON") {
    const std::string text = R"({
      "generator": {
        "mode": "scripted",
        "rules": [
          {"prompt_contains": "alpha", "text": "reply one"},
          {"prompt_contains": "beta", "sample_index": 1, "text": "reply two"},
          {"prompt_contains": "boom", "fail": true}
        ],
        "default_text": "fallback words"
      },
      "reward": {
        "outcome": [{"contains": "one", "score": 0.75}],
        "step": [{"contains": "two", "score": 0.25}],
        "default_score": 0.5
      },
      "judge": {"mode": "table", "default": "[[TRUE]]"}
    })";
    const MockScript script = MockScript::from_json_text(text);
    CHECK(script.gen_rules.size() == 3);
    CHECK(script.gen_rules[1].if_sample_index == 1);
    CHECK(script.gen_rules[2].fail);
    CHECK(script.default_text == "fallback words");
    CHECK(script.outcome_rules.size() == 1);
    CHECK(script.default_score == 0.5);
    CHECK(script.judge_mode == MockScript::JudgeMode::Table);

    auto backends = make_mock_backends(script);
    CHECK(backends.generator->generate(request_for("say alpha"))[0].text == "reply one");
    CHECK(backends.generator->generate(request_for("unknown"))[0].text ==
          "fallback words");
    CHECK_THROWS_AS(backends.generator->generate(request_for("boom")), BackendError);
    CHECK(backends.reward->score_outcome("p", "one").value == 0.75);
}

TEST_CASE("mock without rules or default rejects unmatched prompts") {
    MockScript script;
    auto backends = make_mock_backends(script);
    CHECK_THROWS_AS(backends.generator->generate(request_for("anything")), ConfigError);
}

} // TEST_SUITE
