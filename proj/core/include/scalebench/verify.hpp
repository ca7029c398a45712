#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "scalebench/backend.hpp"
#include "scalebench/bench.hpp"
#include "scalebench/strategies.hpp"

namespace scalebench {

enum class AnswerKind { Rational, Decimal, Boolean, Text };

std::string to_string(AnswerKind kind);

/// Canonical form of an answer string. Rationals render reduced ("1/2",
/// integers as "7"); decimals use shortest round-trip notation; booleans
/// are "true"/"false"; text is whitespace-collapsed and case-folded.
struct CanonicalAnswer {
    AnswerKind kind = AnswerKind::Text;
    std::string value;

    bool operator==(const CanonicalAnswer&) const = default;
};

/// Pulls the model's answer out of a full solution text. Tries, in
/// order: the last \boxed{...} payload, the text after the final
/// "The final answer is", the final standalone number on the last
/// non-empty line. Returns nothing when none match.
std::optional<std::string> extract_answer(std::string_view text);

/// Strips math markup, resolves fractions / decimals / scientific
/// notation into exact rationals where possible, detects booleans, and
/// falls back to collapsed text. Never fails.
CanonicalAnswer normalize(std::string_view raw);

/// Equality on canonical answers. Numeric values compare exactly as
/// rationals first, then within 1e-6 absolute. Booleans and text compare
/// for equality. Mixed kinds (numeric vs text, etc.) are never equivalent.
bool equivalent(const CanonicalAnswer& a, const CanonicalAnswer& b);

struct VerifyOutcome {
    std::optional<bool> verdict; ///< empty when the attempt could not be scored
    bool unscored = false;
    std::string error;
};

/// Correctness dispatch: rule-based extraction/comparison for numeric
/// subsets, judge calls for Olympiad subsets. Judge verdicts are cached
/// by (problem_id, final_text digest) so replays never re-query.
class Verifier {
public:
    explicit Verifier(std::shared_ptr<JudgeClient> judge = nullptr)
        : judge_(std::move(judge)) {}

    /// Decides attempt correctness and stores it into attempt.verdict.
    VerifyOutcome verify(const Problem& problem, Attempt& attempt);

    std::size_t cache_size() const;

private:
    std::shared_ptr<JudgeClient> judge_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, bool> verdict_cache_;
};

} // namespace scalebench
