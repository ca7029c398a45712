#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scalebench/errors.hpp"

namespace scalebench {

enum class Cell : std::uint8_t { Correct, Incorrect, Missing };

/// Problems x languages grid of correctness labels. Row-major, one row
/// per problem.
struct CorrectnessMatrix {
    std::vector<std::string> problem_ids;
    std::vector<std::string> languages;
    std::vector<Cell> cells; // problem_ids.size() * languages.size()

    Cell at(std::size_t problem, std::size_t language) const {
        return cells[problem * languages.size() + language];
    }
    void set(std::size_t problem, std::size_t language, Cell value) {
        cells[problem * languages.size() + language] = value;
    }
    std::size_t problem_count() const { return problem_ids.size(); }
    std::size_t language_count() const { return languages.size(); }
};

/// Fleiss' kappa over languages-as-raters, two categories
/// (correct / incorrect).
struct KappaResult {
    double kappa = 0.0;
    double p_bar = 0.0; ///< observed agreement
    double p_e = 0.0;   ///< chance agreement
    double category_props[2] = {0.0, 0.0}; ///< p_j for {correct, incorrect}
    std::size_t problems_used = 0;         ///< complete rows only
    bool degenerate = false;               ///< p_e == 1, kappa pinned to 1
};

/// One scored attempt, as seen by the aggregation layer. `verdict` is
/// empty for unscored attempts (judge parse failures, hard failures).
struct VerdictRecord {
    std::string problem_id;
    std::string language;
    std::string subset;
    std::optional<bool> verdict;
};

enum class GroupBy { Language, Subset };
enum class UnscoredPolicy { CountIncorrect, Exclude };

struct AccuracyResult {
    std::map<std::string, double> by_group;
    std::vector<std::string> omitted_groups; ///< groups whose denominator was empty
};

AccuracyResult accuracy(const std::vector<VerdictRecord>& records, GroupBy group_by,
                        UnscoredPolicy policy = UnscoredPolicy::CountIncorrect);

/// Builds the problems x languages grid from records, Missing where a
/// (problem, language) pair never appears or is unscored.
CorrectnessMatrix build_matrix(const std::vector<VerdictRecord>& records,
                               UnscoredPolicy policy = UnscoredPolicy::CountIncorrect);

/// Fleiss' kappa over problems with no missing cells. Requires at least
/// two complete problems and two languages.
KappaResult fleiss_kappa(const CorrectnessMatrix& m);

struct Dispersion {
    double mean = 0.0;
    double std_dev = 0.0; ///< population standard deviation
};

Dispersion dispersion(const std::map<std::string, double>& per_language_scores);

/// Per-language treatment minus baseline, in absolute points.
std::map<std::string, double> gain(const std::map<std::string, double>& baseline,
                                   const std::map<std::string, double>& treatment);

/// Ratio variant: (treatment - baseline) / baseline per language.
/// Baseline zero yields infinity for nonzero treatment, zero otherwise.
std::map<std::string, double> relative_gain(const std::map<std::string, double>& baseline,
                                            const std::map<std::string, double>& treatment);

struct PolyFit {
    std::vector<double> coefficients; ///< ascending order, degree + 1 entries
    double residual_ss = 0.0;
    int degree = 0;
};

/// Ordinary least-squares polynomial fit via Householder QR.
/// Requires points.size() > degree and at least two distinct x values
/// for degree >= 1.
PolyFit polyfit(const std::vector<std::pair<double, double>>& points, int degree);

} // namespace scalebench
