#include "scalebench/bench.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "scalebench/verify.hpp"

namespace scalebench {

using nlohmann::json;

std::string to_string(Subset subset) {
    switch (subset) {
    case Subset::MtMath100: return "MT-MATH100";
    case Subset::MtAime2024: return "MT-AIME2024";
    case Subset::MImo: return "M-IMO";
    case Subset::MMo: return "M-MO";
    case Subset::Custom: return "custom";
    }
    return "custom";
}

std::string to_string(AnswerType type) {
    switch (type) {
    case AnswerType::Numeric: return "numeric";
    case AnswerType::Boolean: return "boolean";
    case AnswerType::Text: return "text";
    }
    return "numeric";
}

std::string to_string(EvalMethod method) {
    return method == EvalMethod::RuleBased ? "rule_based" : "judge";
}

Subset subset_from_string(const std::string& s) {
    if (s == "MT-MATH100") return Subset::MtMath100;
    if (s == "MT-AIME2024") return Subset::MtAime2024;
    if (s == "M-IMO") return Subset::MImo;
    if (s == "M-MO") return Subset::MMo;
    if (s == "custom") return Subset::Custom;
    throw ValidationError("unknown subset: " + s);
}

AnswerType answer_type_from_string(const std::string& s) {
    if (s == "numeric") return AnswerType::Numeric;
    if (s == "boolean") return AnswerType::Boolean;
    if (s == "text") return AnswerType::Text;
    throw ValidationError("unknown answer_type: " + s);
}

EvalMethod eval_method_from_string(const std::string& s) {
    if (s == "rule_based") return EvalMethod::RuleBased;
    if (s == "judge") return EvalMethod::Judge;
    throw ValidationError("unknown eval_method: " + s);
}

Dataset::Dataset(std::vector<Problem> problems)
    : storage_(std::make_shared<const std::vector<Problem>>(std::move(problems))) {
    index_.resize(storage_->size());
    for (std::size_t i = 0; i < index_.size(); ++i) index_[i] = i;
}

std::vector<std::string> Dataset::languages() const {
    std::set<std::string> seen;
    for (const auto& p : *this) seen.insert(p.language);
    return {seen.begin(), seen.end()};
}

std::vector<Subset> Dataset::subsets() const {
    std::set<Subset> seen;
    for (const auto& p : *this) seen.insert(p.subset);
    return {seen.begin(), seen.end()};
}

Dataset Dataset::slice(const std::optional<std::vector<Subset>>& subsets,
                       const std::optional<std::vector<std::string>>& languages) const {
    Dataset out;
    out.storage_ = storage_;
    for (const std::size_t i : index_) {
        const Problem& p = (*storage_)[i];
        if (subsets && std::find(subsets->begin(), subsets->end(), p.subset) ==
                           subsets->end()) {
            continue;
        }
        if (languages && std::find(languages->begin(), languages->end(), p.language) ==
                             languages->end()) {
            continue;
        }
        out.index_.push_back(i);
    }
    return out;
}

namespace {

Problem problem_from_json(const json& j) {
    Problem p;
    p.id = j.at("id").get<std::string>();
    p.subset = subset_from_string(j.at("subset").get<std::string>());
    p.language = j.at("language").get<std::string>();
    p.statement = j.at("statement").get<std::string>();
    p.gold_answer = j.at("gold_answer").get<std::string>();
    p.answer_type = answer_type_from_string(j.at("answer_type").get<std::string>());
    p.eval_method = eval_method_from_string(j.at("eval_method").get<std::string>());
    return p;
}

void validate_problem(const Problem& p, std::vector<std::string>& errors,
                      const std::string& where) {
    if (p.id.empty()) errors.push_back(where + ": empty id");
    if (p.language.empty()) errors.push_back(where + ": empty language");
    const bool mt = p.subset == Subset::MtMath100 || p.subset == Subset::MtAime2024;
    const bool olympiad = p.subset == Subset::MImo || p.subset == Subset::MMo;
    if (mt && p.eval_method != EvalMethod::RuleBased) {
        errors.push_back(where + ": subset " + to_string(p.subset) +
                         " requires eval_method=rule_based");
    }
    if (mt && p.answer_type != AnswerType::Numeric) {
        errors.push_back(where + ": subset " + to_string(p.subset) +
                         " requires answer_type=numeric");
    }
    if (olympiad && p.eval_method != EvalMethod::Judge) {
        errors.push_back(where + ": subset " + to_string(p.subset) +
                         " requires eval_method=judge");
    }
    // gold answers must canonicalize to their declared type
    const CanonicalAnswer gold = normalize(p.gold_answer);
    if (p.answer_type == AnswerType::Numeric && gold.kind != AnswerKind::Rational &&
        gold.kind != AnswerKind::Decimal) {
        errors.push_back(where + ": gold answer '" + p.gold_answer +
                         "' does not normalize to a number");
    }
    if (p.answer_type == AnswerType::Boolean && gold.kind != AnswerKind::Boolean) {
        errors.push_back(where + ": gold answer '" + p.gold_answer +
                         "' does not normalize to a boolean");
    }
}

void load_file(const std::filesystem::path& file, std::vector<Problem>& problems,
               std::vector<std::string>& errors) {
    std::ifstream in(file);
    if (!in) {
        errors.push_back("cannot open " + file.string());
        return;
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = file.filename().string() + ":" + std::to_string(line_no);
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            errors.push_back(where + ": malformed JSON line");
            continue;
        }
        try {
            Problem p = problem_from_json(j);
            validate_problem(p, errors, where);
            problems.push_back(std::move(p));
        } catch (const std::exception& e) {
            errors.push_back(where + ": " + e.what());
        }
    }
}

} // namespace

std::string problem_to_jsonl(const Problem& p) {
    json j;
    j["id"] = p.id;
    j["subset"] = to_string(p.subset);
    j["language"] = p.language;
    j["statement"] = p.statement;
    j["gold_answer"] = p.gold_answer;
    j["answer_type"] = to_string(p.answer_type);
    j["eval_method"] = to_string(p.eval_method);
    return j.dump(); // nlohmann orders keys lexicographically
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::vector<Problem> problems;
    std::vector<std::string> errors;

    if (std::filesystem::is_directory(path)) {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::recursive_directory_iterator(path)) {
            if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& file : files) load_file(file, problems, errors);
        if (files.empty()) errors.push_back("no .jsonl files under " + path.string());
    } else if (std::filesystem::is_regular_file(path)) {
        load_file(path, problems, errors);
    } else {
        throw ValidationError("dataset path does not exist: " + path.string());
    }

    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& p : problems) {
        if (!seen.insert({p.id, p.language}).second) {
            errors.push_back("duplicate (id, language) pair: (" + p.id + ", " +
                             p.language + ")");
        }
    }

    if (!errors.empty()) {
        std::ostringstream oss;
        oss << errors.size() << " dataset validation error(s):";
        for (const auto& e : errors) oss << "\n  - " << e;
        throw ValidationError(oss.str());
    }
    return Dataset(std::move(problems));
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
    std::map<std::pair<std::string, std::string>, std::vector<const Problem*>> files;
    for (const auto& p : dataset) {
        files[{to_string(p.subset), p.language}].push_back(&p);
    }
    for (const auto& [key, rows] : files) {
        const auto subset_dir = dir / key.first;
        std::filesystem::create_directories(subset_dir);
        std::ofstream out(subset_dir / (key.second + ".jsonl"), std::ios::trunc);
        if (!out) {
            throw Error("cannot write " + (subset_dir / (key.second + ".jsonl")).string());
        }
        for (const Problem* p : rows) out << problem_to_jsonl(*p) << "\n";
    }
}

const std::vector<std::string>& language_group(const std::string& name) {
    static const std::vector<std::string> group_a = {
        "af", "ar", "bg", "bn", "ca", "cs", "cy", "da", "de", "el", "en",
        "es", "et", "fa", "fi", "fr", "gu", "he", "hi", "hr", "hu", "id",
        "it", "ja", "kn", "ko", "lt", "lv", "mk", "ml", "mr", "ne", "nl",
        "no", "pa", "pl", "pt", "ro", "ru", "sk", "sl", "so", "sq", "sv",
        "sw", "ta", "te", "th", "tl", "tr", "uk", "ur", "vi", "zh-cn", "zh-tw"};
    static const std::vector<std::string> group_b = {
        "af", "ar", "de", "en", "es", "fr", "he", "id", "it", "ja", "ko",
        "tr", "vi", "zh-cn"};
    static const std::vector<std::string> group_c = {
        "af", "ar", "bg", "cs", "da", "de", "el", "en", "et", "es", "fi",
        "fr", "he", "hr", "hu", "id", "it", "ja", "ko", "lt", "lv", "mk",
        "nl", "no", "pl", "pt", "ro", "ru", "sk", "sl", "sq", "sv", "th",
        "tr", "uk", "vi", "zh-cn", "zh-tw"};
    static const std::vector<std::string> group_d = {
        "cs", "de", "en", "fr", "ja", "ko", "nl", "pl", "ru", "sk", "zh-cn"};
    if (name == "A") return group_a;
    if (name == "B") return group_b;
    if (name == "C") return group_c;
    if (name == "D") return group_d;
    throw ConfigError("unknown language group: " + name +
                      " (expected one of A, B, C, D)");
}

CoverageReport coverage(const Dataset& dataset) {
    struct SubsetState {
        std::set<std::string> languages;
        std::set<std::string> ids;
        std::set<std::pair<std::string, std::string>> present;
    };
    std::map<std::string, SubsetState> states;
    for (const auto& p : dataset) {
        auto& st = states[to_string(p.subset)];
        st.languages.insert(p.language);
        st.ids.insert(p.id);
        st.present.insert({p.id, p.language});
    }
    CoverageReport report;
    for (const auto& [subset, st] : states) {
        CoverageReport::SubsetCoverage cov;
        cov.languages.assign(st.languages.begin(), st.languages.end());
        for (const auto& lang : st.languages) cov.problems_per_language[lang] = 0;
        for (const auto& [id, lang] : st.present) cov.problems_per_language[lang] += 1;
        for (const auto& id : st.ids) {
            for (const auto& lang : st.languages) {
                if (!st.present.count({id, lang})) cov.missing.push_back({id, lang});
            }
        }
        report.by_subset[subset] = std::move(cov);
    }
    return report;
}

} // namespace scalebench
