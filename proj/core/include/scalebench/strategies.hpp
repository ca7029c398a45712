#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scalebench/backend.hpp"
#include "scalebench/bench.hpp"
#include "scalebench/cost_model.hpp"

namespace scalebench {

enum class StrategyKind { Greedy, Orm, Prm, Bf };

std::string to_string(StrategyKind kind);
StrategyKind strategy_from_string(const std::string& s);

enum class SegmentOrigin { Generated, ForcedMarker };

struct Segment {
    std::string text;
    std::uint64_t token_count = 0; ///< as generated, before any truncation
    SegmentOrigin origin = SegmentOrigin::Generated;
    FinishReason finish_reason = FinishReason::Stop;
};

struct CandidateRecord {
    std::size_t step = 0;
    std::string text;
    double score = 0.0;
    bool chosen = false;
};

/// Full trace of one strategy run on one problem.
struct Attempt {
    std::string problem_id;
    StrategyKind strategy = StrategyKind::Greedy;
    std::vector<Segment> segments;
    std::vector<CandidateRecord> candidates_log;
    std::string final_text;
    std::optional<std::string> extracted_answer;
    std::uint64_t total_new_tokens = 0;
    double actual_flops = 0.0;
    std::optional<bool> verdict;
    bool unscored = false;
    bool failed = false;
    std::string failure;
    std::vector<std::string> warnings;
    bool token_counts_estimated = false;
};

/// Inserted when the budget forces an answer.
inline constexpr std::string_view kFinalAnswerMarker = "The final answer is";
/// Inserted to resume generation after a premature stop.
inline constexpr std::string_view kContinueMarker = "Wait...";

struct StrategyContext {
    Backends backends;
    ModelSpec generator_spec;
    ModelSpec verifier_spec;
    /// Sampling for multi-candidate strategies; greedy runs and
    /// forced-answer completions always use temperature 0.
    SamplingParams sampling;
    std::uint64_t forced_answer_cap = 64;
    std::uint64_t bf_chunk_tokens = 512;
    std::uint64_t orm_max_tokens = 4096; ///< per-sample cap for greedy-free strategies
};

/// One temperature-0 generation; segments has length 1.
Attempt run_greedy(const StrategyContext& ctx, const Problem& problem,
                   std::uint64_t max_tokens);

/// Best-of-k: sample k responses, keep the one the outcome reward model
/// scores highest (ties break to the lowest sample index).
Attempt run_orm(const StrategyContext& ctx, const Problem& problem, std::uint64_t k);

/// Step-guided decoding: at each of up to `steps` steps, sample
/// `candidates` continuations of `step_tokens` tokens, extend with the
/// best-scored one; stops early when the chosen candidate finishes. If no
/// candidate finished within `steps` steps, a forced-answer completion is
/// appended so the attempt stays scoreable.
Attempt run_prm(const StrategyContext& ctx, const Problem& problem, std::uint64_t steps,
                std::uint64_t candidates, std::uint64_t step_tokens);

/// Budget-forced long generation against a token budget B:
///   - reaching floor(0.9 B) generated tokens truncates the stream,
///     appends the final-answer marker and requests one short completion;
///   - a natural stop below that threshold truncates at the last line
///     break, appends the continue marker and keeps generating;
///   - total generated tokens never exceed B.
Attempt run_bf(const StrategyContext& ctx, const Problem& problem,
               std::uint64_t bf_tokens);

/// Generated-token total plus 4 N_V per reward call; used by every
/// strategy to fill Attempt::actual_flops.
double attempt_flops(const StrategyContext& ctx, std::uint64_t generated_tokens,
                     std::uint64_t reward_calls);

} // namespace scalebench
