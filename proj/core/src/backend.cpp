#include "scalebench/backend.hpp"

#include <cmath>

namespace scalebench {

std::string to_string(FinishReason reason) {
    switch (reason) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::Aborted: return "aborted";
    }
    return "stop";
}

void validate(const GenRequest& req) {
    if (req.max_new_tokens == 0) {
        throw ConfigError("GenRequest: max_new_tokens must be >= 1");
    }
    if (req.n_samples == 0) {
        throw ConfigError("GenRequest: n_samples must be >= 1");
    }
    if (req.sampling.temperature < 0.0) {
        throw ConfigError("GenRequest: temperature must be >= 0");
    }
    if (!(req.sampling.top_p > 0.0) || req.sampling.top_p > 1.0) {
        throw ConfigError("GenRequest: top_p must be in (0, 1]");
    }
}

namespace {

// The grading prompt. Slot markers <math_question>, <correct_answer> and
// <model_solution> are substituted verbatim; everything else, including
// the illustrative placeholders in the header, is emitted byte for byte.
constexpr const char* kJudgeTemplate =
    R"(You will be given a math problem, the correct answer, and a solution generated by a language model. Your task is to determine whether the solution generated by the model is correct.

[Question]
<question>
{..math question...}
</question>

[Correct Answer]
<answer>
{..correct answer...}
</answer>

[Model Solution]
<solution>
{..model-generated solution...}
</solution>

Instructions:
* Compare the model's solution with the correct answer.
* If the model's solution is correct, output [[TRUE]].
* If the model's solution is incorrect, output [[FALSE]].
* You do not have to judge the solution process; there are numerous possible 'Gold' solutions, and the model solution does not have to be identical with the one provided. As long as the model reaches the correct answer, it is correct.
* Do not provide any explanations -- only return your judgment ONLY.

--------------------------------------------------
The following is the math problem and solution for your task:

[Question]  
<question>
<math_question>
</question>

[Correct Answer]
<answer>
<correct_answer>
</answer>

[Model Solution]
<solution>
<model_solution>
</solution>)";

void replace_once(std::string& text, std::string_view slot, const std::string& value) {
    const auto pos = text.find(slot);
    if (pos != std::string::npos) text.replace(pos, slot.size(), value);
}

} // namespace

std::string judge_prompt(const std::string& question, const std::string& gold_answer,
                         const std::string& solution) {
    std::string prompt = kJudgeTemplate;
    replace_once(prompt, "<math_question>", question);
    replace_once(prompt, "<correct_answer>", gold_answer);
    replace_once(prompt, "<model_solution>", solution);
    return prompt;
}

std::optional<bool> parse_judge_verdict(std::string_view raw) {
    const bool has_true = raw.find("[[TRUE]]") != std::string_view::npos;
    const bool has_false = raw.find("[[FALSE]]") != std::string_view::npos;
    if (has_true == has_false) return std::nullopt;
    return has_true;
}

std::uint64_t estimate_token_count(std::string_view text, double ratio) {
    std::uint64_t pieces = 0;
    bool in_piece = false;
    for (const char ch : text) {
        const bool ws = ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r';
        if (!ws && !in_piece) pieces += 1;
        in_piece = !ws;
    }
    return static_cast<std::uint64_t>(std::ceil(static_cast<double>(pieces) * ratio));
}

} // namespace scalebench
