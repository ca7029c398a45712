#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scalebench/backend.hpp"

namespace scalebench {

/// Scripted generator reply. All present conditions must hold for the
/// rule to match; rules are tried in order. Replies behave like a word
/// stream: a request resumes at the prefix's word count and the final
/// line repeats once the stream is exhausted, so loops always progress.
struct MockGenRule {
    std::optional<std::string> if_prompt_contains;
    std::optional<std::string> if_prefix_contains;
    std::optional<std::uint64_t> if_sample_index;
    std::optional<std::int64_t> if_seed;
    std::string text;
    bool fail = false;  ///< matched requests throw BackendError
    bool abort = false; ///< matched samples come back finish_reason=aborted
    /// Resume at the prefix's word position (stream semantics); rules that
    /// script one targeted reply set this false to serve from the start.
    bool continuation = true;
};

struct MockScoreRule {
    std::string if_contains;
    double score = 0.0;
};

struct MockJudgeRule {
    std::string if_solution_contains;
    std::string reply;
};

/// Procedural stream parameters: each round emits a hash-derived number
/// of words in [min_round_tokens, max_round_tokens], with a line break
/// every line_break_every words.
struct SynthParams {
    std::uint64_t min_round_tokens = 16;
    std::uint64_t max_round_tokens = 64;
    std::uint64_t line_break_every = 11;
};

/// Canned behavior for all three endpoint roles. Loadable from JSON so
/// campaigns can run fully offline.
struct MockScript {
    enum class JudgeMode { Table, ContainsGold };

    bool synth = false;
    SynthParams synth_params;
    std::vector<MockGenRule> gen_rules;
    std::optional<std::string> default_text;

    std::vector<MockScoreRule> outcome_rules;
    std::vector<MockScoreRule> step_rules;
    double default_score = 0.0;

    JudgeMode judge_mode = JudgeMode::ContainsGold;
    std::vector<MockJudgeRule> judge_rules;
    std::string judge_default = "[[FALSE]]";

    static MockScript from_json_text(const std::string& text);
    static MockScript load(const std::filesystem::path& path);
};

class MockGeneratorClient : public GeneratorClient {
public:
    explicit MockGeneratorClient(std::shared_ptr<const MockScript> script)
        : script_(std::move(script)) {}
    std::vector<Generation> generate(const GenRequest& req) override;

private:
    std::shared_ptr<const MockScript> script_;
};

class MockRewardClient : public RewardClient {
public:
    explicit MockRewardClient(std::shared_ptr<const MockScript> script)
        : script_(std::move(script)) {}
    RewardScore score_outcome(const std::string& problem_text,
                              const std::string& response_text) override;
    RewardScore score_step(const std::string& problem_text, const std::string& prefix,
                           const std::string& candidate) override;

private:
    std::shared_ptr<const MockScript> script_;
};

class MockJudgeClient : public JudgeClient {
public:
    explicit MockJudgeClient(std::shared_ptr<const MockScript> script)
        : script_(std::move(script)) {}
    JudgeVerdict judge(const std::string& question, const std::string& gold_answer,
                       const std::string& solution) override;

private:
    std::shared_ptr<const MockScript> script_;
};

Backends make_mock_backends(MockScript script);

/// Word count used by the mock protocol (a mock token is one
/// whitespace-delimited word).
std::uint64_t mock_token_count(std::string_view text);

} // namespace scalebench
