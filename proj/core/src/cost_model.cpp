#include "scalebench/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace scalebench {

std::string to_string(ModelRole role) {
    switch (role) {
    case ModelRole::Generator: return "generator";
    case ModelRole::Verifier: return "verifier";
    case ModelRole::Judge: return "judge";
    }
    return "generator";
}

ModelRole model_role_from_string(const std::string& s) {
    if (s == "generator") return ModelRole::Generator;
    if (s == "verifier") return ModelRole::Verifier;
    if (s == "judge") return ModelRole::Judge;
    throw ConfigError("unknown model role: " + s);
}

namespace {

void require_role(const ModelSpec& spec, ModelRole expected, const char* op) {
    if (spec.role != expected) {
        std::ostringstream oss;
        oss << op << ": model '" << spec.name << "' has role " << to_string(spec.role)
            << ", expected " << to_string(expected);
        throw ConfigError(oss.str());
    }
    if (spec.param_count == 0) {
        throw ConfigError(std::string(op) + ": model '" + spec.name +
                          "' has zero parameter count");
    }
}

void require_cost_params(const CostParams& params, const char* op) {
    if (params.tokens_per_instance == 0) {
        throw ConfigError(std::string(op) + ": tokens_per_instance must be >= 1");
    }
    if (params.step_tokens == 0) {
        throw ConfigError(std::string(op) + ": step_tokens must be >= 1");
    }
}

double rel_error(double value, double target) {
    return std::abs(value - target) / target;
}

// Published matched configurations, keyed on the ORM anchor k. Honored
// whenever their cost lands within the caller's tolerance; arbitrary
// anchors fall through to the search.
struct ReferenceConfig {
    std::uint64_t k;
    std::uint64_t steps;
    std::uint64_t candidates;
};
constexpr ReferenceConfig kReferenceConfigs[] = {
    {2, 3, 3},
    {4, 4, 5},
    {8, 5, 8},
};

std::uint64_t nearest_power_of_two(std::uint64_t v) {
    if (v <= 1) return 1;
    std::uint64_t lower = 1;
    while (lower <= v / 2) lower <<= 1;
    const std::uint64_t upper = lower << 1;
    return (v - lower <= upper - v) ? lower : upper;
}

} // namespace

double generator_flops(const ModelSpec& gen, std::uint64_t tokens) {
    require_role(gen, ModelRole::Generator, "generator_flops");
    if (tokens == 0) throw ConfigError("generator_flops: tokens must be >= 1");
    return 2.0 * static_cast<double>(gen.param_count) * static_cast<double>(tokens);
}

double verifier_call_flops(const ModelSpec& ver) {
    require_role(ver, ModelRole::Verifier, "verifier_call_flops");
    return 4.0 * static_cast<double>(ver.param_count);
}

double orm_flops(const ModelSpec& gen, const ModelSpec& ver, std::uint64_t k,
                 const CostParams& params) {
    require_cost_params(params, "orm_flops");
    if (k == 0) throw ConfigError("orm_flops: k must be >= 1");
    const double per_sample =
        generator_flops(gen, params.tokens_per_instance) + verifier_call_flops(ver);
    return static_cast<double>(k) * per_sample;
}

double prm_flops(const ModelSpec& gen, const ModelSpec& ver, std::uint64_t steps,
                 std::uint64_t candidates, const CostParams& params) {
    require_cost_params(params, "prm_flops");
    if (steps == 0 || candidates == 0) {
        throw ConfigError("prm_flops: steps and candidates must be >= 1");
    }
    const double per_call =
        generator_flops(gen, params.step_tokens) + verifier_call_flops(ver);
    return static_cast<double>(steps) * static_cast<double>(candidates) * per_call;
}

double bf_flops(const ModelSpec& gen, std::uint64_t bf_tokens) {
    if (bf_tokens == 0) throw ConfigError("bf_flops: bf_tokens must be >= 1");
    return generator_flops(gen, bf_tokens);
}

BudgetPlan match_budget(const ModelSpec& gen, const ModelSpec& ver, std::uint64_t k,
                        const CostParams& params, double tolerance) {
    if (!(tolerance > 0.0) || tolerance > 0.25) {
        throw ConfigError("match_budget: tolerance must be in (0, 0.25]");
    }
    const double target = orm_flops(gen, ver, k, params);

    BudgetPlan plan;
    plan.k = k;
    plan.tolerance = tolerance;
    plan.flops_orm = target;

    // BF: exact token count first, snapped to the nearest power of two when
    // the snapped budget still matches the target.
    const double two_ng = 2.0 * static_cast<double>(gen.param_count);
    const auto exact =
        static_cast<std::uint64_t>(std::max<long long>(1, std::llround(target / two_ng)));
    plan.bf_tokens_exact = exact;
    const std::uint64_t snapped = nearest_power_of_two(exact);
    plan.bf_tokens =
        (rel_error(bf_flops(gen, snapped), target) <= tolerance) ? snapped : exact;
    plan.flops_bf = bf_flops(gen, plan.bf_tokens);

    // PRM: reference configuration when it fits, bounded search otherwise.
    bool found = false;
    for (const auto& ref : kReferenceConfigs) {
        if (ref.k != k) continue;
        const double flops = prm_flops(gen, ver, ref.steps, ref.candidates, params);
        if (rel_error(flops, target) <= tolerance) {
            plan.prm_steps = ref.steps;
            plan.prm_candidates = ref.candidates;
            plan.flops_prm = flops;
            found = true;
        }
        break;
    }

    if (!found) {
        constexpr std::uint64_t kMaxSteps = 64;
        constexpr std::uint64_t kMaxCandidates = 64;
        struct Best {
            std::uint64_t s = 0, c = 0;
            double flops = 0.0;
            double dist = 0.0;
        };
        std::vector<Best> ranked;
        for (std::uint64_t s = 1; s <= kMaxSteps; ++s) {
            for (std::uint64_t c = 1; c <= kMaxCandidates; ++c) {
                // proportional-scaling constraint: c may not outgrow 2S
                if (c > 2 * s) continue;
                const double flops = prm_flops(gen, ver, s, c, params);
                ranked.push_back({s, c, flops, std::abs(flops - target)});
            }
        }
        std::sort(ranked.begin(), ranked.end(), [](const Best& a, const Best& b) {
            if (a.dist != b.dist) return a.dist < b.dist;
            const auto bal_a = a.s > a.c ? a.s - a.c : a.c - a.s;
            const auto bal_b = b.s > b.c ? b.s - b.c : b.c - b.s;
            if (bal_a != bal_b) return bal_a < bal_b;
            if (a.s != b.s) return a.s < b.s;
            return a.c < b.c;
        });
        const Best& best = ranked.front();
        if (rel_error(best.flops, target) > tolerance) {
            std::vector<InfeasibleBudgetError::Candidate> nearest;
            for (std::size_t i = 0; i < std::min<std::size_t>(3, ranked.size()); ++i) {
                nearest.push_back({ranked[i].s, ranked[i].c, ranked[i].flops,
                                   rel_error(ranked[i].flops, target)});
            }
            std::ostringstream oss;
            oss << "match_budget: no (S, c) within " << tolerance * 100.0
                << "% of target " << target << " FLOPs; nearest is (S=" << best.s
                << ", c=" << best.c << ") at " << rel_error(best.flops, target) * 100.0
                << "%";
            throw InfeasibleBudgetError(oss.str(), std::move(nearest));
        }
        plan.prm_steps = best.s;
        plan.prm_candidates = best.c;
        plan.flops_prm = best.flops;
    }

    return plan;
}

} // namespace scalebench
