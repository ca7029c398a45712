#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scalebench/errors.hpp"

namespace scalebench {

enum class Subset { MtMath100, MtAime2024, MImo, MMo, Custom };
enum class AnswerType { Numeric, Boolean, Text };
enum class EvalMethod { RuleBased, Judge };

std::string to_string(Subset subset);
std::string to_string(AnswerType type);
std::string to_string(EvalMethod method);
Subset subset_from_string(const std::string& s);
AnswerType answer_type_from_string(const std::string& s);
EvalMethod eval_method_from_string(const std::string& s);

/// One benchmark item in one language.
struct Problem {
    std::string id;
    Subset subset = Subset::Custom;
    std::string language; ///< ISO code
    std::string statement;
    std::string gold_answer;
    AnswerType answer_type = AnswerType::Numeric;
    EvalMethod eval_method = EvalMethod::RuleBased;
};

/// Immutable problem collection. Slices share the underlying storage;
/// copying a Dataset is cheap.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<Problem> problems);

    std::size_t size() const { return index_.size(); }
    bool empty() const { return index_.empty(); }
    const Problem& at(std::size_t i) const { return (*storage_)[index_[i]]; }

    std::vector<std::string> languages() const;
    std::vector<Subset> subsets() const;

    /// Filtered view preserving order. An empty filter list selects
    /// nothing; pass std::nullopt to keep a dimension unfiltered.
    Dataset slice(const std::optional<std::vector<Subset>>& subsets,
                  const std::optional<std::vector<std::string>>& languages) const;

    class const_iterator {
    public:
        const_iterator(const Dataset* ds, std::size_t pos) : ds_(ds), pos_(pos) {}
        const Problem& operator*() const { return ds_->at(pos_); }
        const Problem* operator->() const { return &ds_->at(pos_); }
        const_iterator& operator++() { ++pos_; return *this; }
        bool operator!=(const const_iterator& o) const { return pos_ != o.pos_; }
    private:
        const Dataset* ds_;
        std::size_t pos_;
    };
    const_iterator begin() const { return {this, 0}; }
    const_iterator end() const { return {this, index_.size()}; }

private:
    std::shared_ptr<const std::vector<Problem>> storage_;
    std::vector<std::size_t> index_;
};

/// Loads a JSONL file or a directory of JSONL files (sorted path order).
/// Schema violations are collected and thrown together as one
/// ValidationError; malformed JSON lines report file and line number.
Dataset load_dataset(const std::filesystem::path& path);

/// Writes the canonical per-(subset, language) layout under `dir`:
/// <subset>/<language>.jsonl with sorted-key compact JSON lines.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Canonical JSONL rendering of one problem (sorted keys, compact).
std::string problem_to_jsonl(const Problem& problem);

/// Named language groups: "A" (55), "B" (14), "C" (38), "D" (11).
/// Throws ConfigError for unknown names.
const std::vector<std::string>& language_group(const std::string& name);

struct CoverageReport {
    struct SubsetCoverage {
        std::vector<std::string> languages;
        std::map<std::string, std::size_t> problems_per_language;
        std::vector<std::pair<std::string, std::string>> missing; ///< (id, language)
    };
    std::map<std::string, SubsetCoverage> by_subset; ///< keyed by subset name
};

/// Present/missing enumeration per subset, over the subset's observed
/// language set.
CoverageReport coverage(const Dataset& dataset);

} // namespace scalebench
