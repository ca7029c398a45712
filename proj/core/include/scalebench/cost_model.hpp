#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scalebench/errors.hpp"

namespace scalebench {

enum class ModelRole { Generator, Verifier, Judge };

std::string to_string(ModelRole role);
ModelRole model_role_from_string(const std::string& s);

/// A model endpoint's role and size. Parameter counts are raw counts
/// (1.5e9 for a 1.5B model), not billions.
struct ModelSpec {
    std::string name;
    ModelRole role = ModelRole::Generator;
    std::uint64_t param_count = 0;
};

/// Constants of the analytic cost model.
struct CostParams {
    std::uint64_t tokens_per_instance = 921; ///< D: tokens generated per instance
    std::uint64_t step_tokens = 128;         ///< x: tokens per guided-decoding step
};

/// A matched configuration: ORM anchor k plus the PRM (S, c) and BF token
/// budget chosen so all three strategies consume the same analytic FLOPs,
/// within `tolerance`.
struct BudgetPlan {
    std::uint64_t k = 0;
    std::uint64_t prm_steps = 0;      ///< S
    std::uint64_t prm_candidates = 0; ///< c
    std::uint64_t bf_tokens = 0;      ///< selected budget (power-of-two when close)
    std::uint64_t bf_tokens_exact = 0; ///< round(flops_orm / 2 N_G), pre-snap
    double flops_orm = 0.0;
    double flops_prm = 0.0;
    double flops_bf = 0.0;
    double tolerance = 0.02;
};

/// Thrown when no (S, c) in the search bounds lands within tolerance.
/// Carries the nearest candidates for diagnostics.
class InfeasibleBudgetError : public ConfigError {
public:
    struct Candidate {
        std::uint64_t steps;
        std::uint64_t candidates;
        double flops;
        double rel_error;
    };

    InfeasibleBudgetError(const std::string& what, std::vector<Candidate> nearest)
        : ConfigError(what), nearest_(std::move(nearest)) {}

    const std::vector<Candidate>& nearest() const { return nearest_; }

private:
    std::vector<Candidate> nearest_;
};

/// Generator cost for `tokens` generated tokens: 2 * N_G * tokens.
double generator_flops(const ModelSpec& gen, std::uint64_t tokens);

/// Cost of one reward-model invocation: 4 * N_V.
double verifier_call_flops(const ModelSpec& ver);

/// Best-of-k cost: k * (2 * N_G * D + 4 * N_V).
double orm_flops(const ModelSpec& gen, const ModelSpec& ver, std::uint64_t k,
                 const CostParams& params);

/// Guided-decoding cost over `steps` steps with `candidates` continuations
/// of `step_tokens` tokens each: S * c * (x * 2 * N_G + 4 * N_V).
double prm_flops(const ModelSpec& gen, const ModelSpec& ver, std::uint64_t steps,
                 std::uint64_t candidates, const CostParams& params);

/// Budget-forcing cost, generator only: 2 * N_G * bf_tokens.
double bf_flops(const ModelSpec& gen, std::uint64_t bf_tokens);

/// Solves for the PRM (S, c) and BF token budget whose FLOPs match
/// orm_flops(k) within `tolerance` (relative). Published reference
/// configurations for k in {2, 4, 8} are preferred whenever they fit the
/// tolerance; otherwise the bounded (S, c) search picks the closest
/// product, breaking ties toward balanced S and c.
BudgetPlan match_budget(const ModelSpec& gen, const ModelSpec& ver, std::uint64_t k,
                        const CostParams& params, double tolerance = 0.02);

} // namespace scalebench
