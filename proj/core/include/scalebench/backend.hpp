#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scalebench/errors.hpp"

namespace scalebench {

struct Message {
    std::string role;
    std::string content;
};

struct SamplingParams {
    double temperature = 0.7;
    double top_p = 0.95;
    std::optional<std::int64_t> seed;
};

struct GenRequest {
    std::vector<Message> prompt_messages;
    /// Already-generated assistant text to extend, when present.
    std::optional<std::string> prefix;
    std::uint64_t max_new_tokens = 1;
    SamplingParams sampling;
    std::uint64_t n_samples = 1;
};

enum class FinishReason { Stop, Length, Aborted };

std::string to_string(FinishReason reason);

struct Generation {
    std::string text;
    std::uint64_t new_token_count = 0;
    FinishReason finish_reason = FinishReason::Stop;
    /// True when the count came from the whitespace estimate rather than
    /// the backend's usage report.
    bool token_count_estimated = false;
};

struct RewardScore {
    double value = 0.0;
    std::optional<std::pair<double, double>> scale_hint;
};

struct JudgeVerdict {
    bool correct = false;
    std::string raw_text;
};

/// Throws ConfigError when the request violates its invariants.
void validate(const GenRequest& req);

/// Response-producing endpoint handle. Implementations must return
/// exactly n_samples generations; per-sample seeds derive from
/// sampling.seed + sample index.
class GeneratorClient {
public:
    virtual ~GeneratorClient() = default;
    virtual std::vector<Generation> generate(const GenRequest& req) = 0;
};

/// Reward-model endpoint handle, outcome- and step-level.
class RewardClient {
public:
    virtual ~RewardClient() = default;
    virtual RewardScore score_outcome(const std::string& problem_text,
                                      const std::string& response_text) = 0;
    virtual RewardScore score_step(const std::string& problem_text,
                                   const std::string& prefix,
                                   const std::string& candidate) = 0;
};

/// Judge endpoint handle. Implementations build the prompt with
/// judge_prompt() and parse replies with parse_judge_verdict(); a reply
/// with neither or both markers raises VerdictParseError.
class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    virtual JudgeVerdict judge(const std::string& question, const std::string& gold_answer,
                               const std::string& solution) = 0;
};

/// One handle per role; generator and verifier are never the same slot.
struct Backends {
    std::shared_ptr<GeneratorClient> generator;
    std::shared_ptr<RewardClient> reward;
    std::shared_ptr<JudgeClient> judge;
};

/// Fills the judge template with the question, gold answer and model
/// solution. The template text is fixed; callers must not alter it.
std::string judge_prompt(const std::string& question, const std::string& gold_answer,
                         const std::string& solution);

/// True / false / nothing for [[TRUE]], [[FALSE]], or an unparseable
/// reply (neither marker, or both).
std::optional<bool> parse_judge_verdict(std::string_view raw);

/// Whitespace-piece token estimate for backends that do not report usage.
std::uint64_t estimate_token_count(std::string_view text, double ratio = 1.3);

} // namespace scalebench
