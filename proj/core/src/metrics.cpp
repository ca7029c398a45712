#include "scalebench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace scalebench {

AccuracyResult accuracy(const std::vector<VerdictRecord>& records, GroupBy group_by,
                        UnscoredPolicy policy) {
    struct Tally {
        std::size_t correct = 0;
        std::size_t total = 0;
    };
    std::map<std::string, Tally> tallies;
    for (const auto& rec : records) {
        const std::string& key =
            group_by == GroupBy::Language ? rec.language : rec.subset;
        auto& tally = tallies[key];
        if (!rec.verdict.has_value()) {
            if (policy == UnscoredPolicy::Exclude) continue;
            tally.total += 1; // counts as incorrect
            continue;
        }
        tally.total += 1;
        if (*rec.verdict) tally.correct += 1;
    }
    AccuracyResult out;
    for (const auto& [key, tally] : tallies) {
        if (tally.total == 0) {
            out.omitted_groups.push_back(key);
            continue;
        }
        out.by_group[key] =
            static_cast<double>(tally.correct) / static_cast<double>(tally.total);
    }
    return out;
}

CorrectnessMatrix build_matrix(const std::vector<VerdictRecord>& records,
                               UnscoredPolicy policy) {
    std::set<std::string> problem_set, language_set;
    for (const auto& rec : records) {
        problem_set.insert(rec.problem_id);
        language_set.insert(rec.language);
    }
    CorrectnessMatrix m;
    m.problem_ids.assign(problem_set.begin(), problem_set.end());
    m.languages.assign(language_set.begin(), language_set.end());
    m.cells.assign(m.problem_ids.size() * m.languages.size(), Cell::Missing);

    std::map<std::string, std::size_t> problem_index, language_index;
    for (std::size_t i = 0; i < m.problem_ids.size(); ++i) problem_index[m.problem_ids[i]] = i;
    for (std::size_t j = 0; j < m.languages.size(); ++j) language_index[m.languages[j]] = j;

    for (const auto& rec : records) {
        Cell cell = Cell::Missing;
        if (rec.verdict.has_value()) {
            cell = *rec.verdict ? Cell::Correct : Cell::Incorrect;
        } else if (policy == UnscoredPolicy::CountIncorrect) {
            cell = Cell::Incorrect;
        }
        m.set(problem_index[rec.problem_id], language_index[rec.language], cell);
    }
    return m;
}

KappaResult fleiss_kappa(const CorrectnessMatrix& m) {
    const std::size_t n = m.language_count();
    if (n < 2) throw DimensionError("fleiss_kappa: need at least 2 languages");

    // kappa requires a fixed rater count per item: keep complete rows only
    std::vector<std::size_t> complete;
    for (std::size_t i = 0; i < m.problem_count(); ++i) {
        bool ok = true;
        for (std::size_t j = 0; j < n && ok; ++j) {
            if (m.at(i, j) == Cell::Missing) ok = false;
        }
        if (ok) complete.push_back(i);
    }
    if (complete.size() < 2) {
        std::ostringstream oss;
        oss << "fleiss_kappa: need at least 2 complete problems, have "
            << complete.size();
        throw InsufficientDataError(oss.str());
    }

    const double N = static_cast<double>(complete.size());
    const double nn = static_cast<double>(n);

    double sum_agreement = 0.0;
    double sum_correct = 0.0;
    double sum_incorrect = 0.0;
    for (const std::size_t i : complete) {
        double c = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (m.at(i, j) == Cell::Correct) c += 1.0;
        }
        const double inc = nn - c;
        sum_agreement += (c * (c - 1.0) + inc * (inc - 1.0)) / (nn * (nn - 1.0));
        sum_correct += c;
        sum_incorrect += inc;
    }

    KappaResult out;
    out.problems_used = complete.size();
    out.p_bar = sum_agreement / N;
    out.category_props[0] = sum_correct / (N * nn);
    out.category_props[1] = sum_incorrect / (N * nn);
    out.p_e = out.category_props[0] * out.category_props[0] +
              out.category_props[1] * out.category_props[1];
    if (out.p_e >= 1.0) {
        // unanimous labels everywhere: the formula is 0/0, define as perfect
        out.degenerate = true;
        out.kappa = 1.0;
    } else {
        out.kappa = (out.p_bar - out.p_e) / (1.0 - out.p_e);
    }
    return out;
}

Dispersion dispersion(const std::map<std::string, double>& per_language_scores) {
    Dispersion d;
    if (per_language_scores.empty()) return d;
    const double count = static_cast<double>(per_language_scores.size());
    for (const auto& [lang, score] : per_language_scores) d.mean += score;
    d.mean /= count;
    double variance = 0.0;
    for (const auto& [lang, score] : per_language_scores) {
        variance += (score - d.mean) * (score - d.mean);
    }
    d.std_dev = std::sqrt(variance / count);
    return d;
}

namespace {

void require_same_keys(const std::map<std::string, double>& baseline,
                       const std::map<std::string, double>& treatment) {
    if (baseline.size() == treatment.size() &&
        std::equal(baseline.begin(), baseline.end(), treatment.begin(),
                   [](const auto& a, const auto& b) { return a.first == b.first; })) {
        return;
    }
    std::ostringstream oss;
    oss << "gain: key sets differ;";
    for (const auto& [key, v] : baseline) {
        if (!treatment.count(key)) oss << " missing-in-treatment:" << key;
    }
    for (const auto& [key, v] : treatment) {
        if (!baseline.count(key)) oss << " missing-in-baseline:" << key;
    }
    throw DimensionError(oss.str());
}

} // namespace

std::map<std::string, double> gain(const std::map<std::string, double>& baseline,
                                   const std::map<std::string, double>& treatment) {
    require_same_keys(baseline, treatment);
    std::map<std::string, double> out;
    for (const auto& [key, base] : baseline) out[key] = treatment.at(key) - base;
    return out;
}

std::map<std::string, double> relative_gain(const std::map<std::string, double>& baseline,
                                            const std::map<std::string, double>& treatment) {
    require_same_keys(baseline, treatment);
    std::map<std::string, double> out;
    for (const auto& [key, base] : baseline) {
        const double diff = treatment.at(key) - base;
        if (base == 0.0) {
            out[key] = diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        } else {
            out[key] = diff / base;
        }
    }
    return out;
}

PolyFit polyfit(const std::vector<std::pair<double, double>>& points, int degree) {
    if (degree < 0) throw ConfigError("polyfit: degree must be >= 0");
    const std::size_t rows = points.size();
    const std::size_t cols = static_cast<std::size_t>(degree) + 1;
    if (rows <= static_cast<std::size_t>(degree)) {
        throw InsufficientDataError("polyfit: need more points than the degree");
    }
    if (degree >= 1) {
        const double x0 = points.front().first;
        const bool all_equal = std::all_of(points.begin(), points.end(),
                                           [&](const auto& p) { return p.first == x0; });
        if (all_equal) {
            throw DimensionError("polyfit: design matrix is rank deficient "
                                 "(all x values equal)");
        }
    }

    // Vandermonde matrix, column-major, reduced in place by Householder
    // reflections.
    std::vector<double> a(rows * cols);
    std::vector<double> b(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        double pw = 1.0;
        for (std::size_t j = 0; j < cols; ++j) {
            a[j * rows + i] = pw;
            pw *= points[i].first;
        }
        b[i] = points[i].second;
    }

    for (std::size_t j = 0; j < cols; ++j) {
        double norm = 0.0;
        for (std::size_t i = j; i < rows; ++i) norm += a[j * rows + i] * a[j * rows + i];
        norm = std::sqrt(norm);
        if (norm == 0.0) {
            throw DimensionError("polyfit: design matrix is rank deficient");
        }
        const double pivot = a[j * rows + j];
        const double alpha = pivot >= 0.0 ? -norm : norm;
        std::vector<double> v(rows - j);
        v[0] = pivot - alpha;
        for (std::size_t i = j + 1; i < rows; ++i) v[i - j] = a[j * rows + i];
        double vtv = 0.0;
        for (const double x : v) vtv += x * x;
        a[j * rows + j] = alpha;
        for (std::size_t i = j + 1; i < rows; ++i) a[j * rows + i] = 0.0;
        if (vtv == 0.0) continue;
        for (std::size_t col = j + 1; col < cols; ++col) {
            double dot = 0.0;
            for (std::size_t i = j; i < rows; ++i) dot += v[i - j] * a[col * rows + i];
            const double f = 2.0 * dot / vtv;
            for (std::size_t i = j; i < rows; ++i) a[col * rows + i] -= f * v[i - j];
        }
        double dot = 0.0;
        for (std::size_t i = j; i < rows; ++i) dot += v[i - j] * b[i];
        const double f = 2.0 * dot / vtv;
        for (std::size_t i = j; i < rows; ++i) b[i] -= f * v[i - j];
    }

    PolyFit fit;
    fit.degree = degree;
    fit.coefficients.assign(cols, 0.0);
    for (std::size_t j = cols; j-- > 0;) {
        double sum = b[j];
        for (std::size_t col = j + 1; col < cols; ++col) {
            sum -= a[col * rows + j] * fit.coefficients[col];
        }
        fit.coefficients[j] = sum / a[j * rows + j];
    }
    for (std::size_t i = cols; i < rows; ++i) fit.residual_ss += b[i] * b[i];
    return fit;
}

} // namespace scalebench
