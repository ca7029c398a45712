#include "scalebench/mock_backend.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace scalebench {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t hash_bytes(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (const unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string prompt_text(const GenRequest& req) {
    std::string out;
    for (const auto& msg : req.prompt_messages) {
        out += msg.role;
        out += ": ";
        out += msg.content;
        out += "\n";
    }
    return out;
}

// Word chunks with their trailing separator (space or newline), so that
// partial replies keep line structure.
struct Chunk {
    std::string word;
    char sep; // ' ' or '\n'; last chunk keeps its separator too
};

std::vector<Chunk> chunk_text(std::string_view text) {
    std::vector<Chunk> chunks;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() &&
               (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' || text[i] == '\r')) {
            ++i;
        }
        if (i >= text.size()) break;
        const std::size_t start = i;
        while (i < text.size() && text[i] != ' ' && text[i] != '\t' && text[i] != '\n' &&
               text[i] != '\r') {
            ++i;
        }
        Chunk c{std::string(text.substr(start, i - start)), ' '};
        const std::size_t ws_start = i;
        while (i < text.size() &&
               (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' || text[i] == '\r')) {
            ++i;
        }
        if (text.substr(ws_start, i - ws_start).find('\n') != std::string_view::npos) {
            c.sep = '\n';
        }
        chunks.push_back(std::move(c));
    }
    return chunks;
}

std::string join_chunks(const std::vector<Chunk>& chunks, std::size_t begin,
                        std::size_t count) {
    std::string out;
    for (std::size_t i = begin; i < begin + count && i < chunks.size(); ++i) {
        out += chunks[i].word;
        if (i + 1 < begin + count && i + 1 < chunks.size()) out += chunks[i].sep;
    }
    return out;
}

// Replies behave like tokenizer output: a continuation's first token
// carries its leading separator, so prefix + reply concatenates cleanly.
Generation scripted_reply(const std::string& text, const GenRequest& req,
                          bool continuation) {
    const auto chunks = chunk_text(text);
    const std::uint64_t total = chunks.size();
    const std::uint64_t prefix_words = mock_token_count(req.prefix.value_or(""));
    const std::uint64_t pos =
        continuation ? std::min<std::uint64_t>(prefix_words, total) : 0;
    const std::uint64_t cap = req.max_new_tokens;

    Generation gen;
    if (pos < total) {
        const std::uint64_t avail = total - pos;
        const std::uint64_t take = std::min<std::uint64_t>(cap, avail);
        gen.text = join_chunks(chunks, pos, take);
        if (prefix_words > 0 && !gen.text.empty()) {
            gen.text.insert(0, 1, pos > 0 ? chunks[pos - 1].sep : ' ');
        }
        gen.new_token_count = take;
        gen.finish_reason = take == avail ? FinishReason::Stop : FinishReason::Length;
    } else {
        // stream exhausted: repeat the final line so callers keep moving
        std::size_t tail_begin = chunks.size();
        while (tail_begin > 0 && chunks[tail_begin - 1].sep != '\n') --tail_begin;
        if (tail_begin == chunks.size() && tail_begin > 0) tail_begin -= 1;
        const std::uint64_t tail_len = chunks.size() - tail_begin;
        const std::uint64_t take = std::min<std::uint64_t>(cap, std::max<std::uint64_t>(
                                                                    tail_len, 1));
        gen.text = join_chunks(chunks, tail_begin, take);
        gen.new_token_count = std::min<std::uint64_t>(take, tail_len);
        if (gen.new_token_count == 0 && cap >= 1) {
            gen.text = "Done.";
            gen.new_token_count = 1;
        }
        if (prefix_words > 0) gen.text.insert(0, 1, '\n');
        gen.finish_reason =
            gen.new_token_count >= tail_len ? FinishReason::Stop : FinishReason::Length;
    }
    return gen;
}

const char* kVocab[] = {"consider", "the", "expression", "simplifies", "after",
                        "substitution", "because", "terms", "cancel", "which",
                        "gives", "another", "bound", "when", "rearranged",
                        "so", "this", "value", "satisfies", "every",
                        "condition", "stated", "above", "hence", "result"};
constexpr std::size_t kVocabSize = sizeof(kVocab) / sizeof(kVocab[0]);

Generation synth_reply(const SynthParams& params, const GenRequest& req,
                       std::int64_t seed) {
    const std::uint64_t prefix_words = mock_token_count(req.prefix.value_or(""));
    std::uint64_t h = hash_bytes(prompt_text(req));
    h = splitmix64(h ^ static_cast<std::uint64_t>(seed));
    h = splitmix64(h ^ prefix_words);

    const std::uint64_t lo = std::max<std::uint64_t>(1, params.min_round_tokens);
    const std::uint64_t hi = std::max<std::uint64_t>(lo, params.max_round_tokens);
    const std::uint64_t natural = lo + h % (hi - lo + 1);
    const std::uint64_t take = std::min<std::uint64_t>(req.max_new_tokens, natural);

    std::string text;
    if (prefix_words > 0 && take > 0) text += ' ';
    std::uint64_t stream = splitmix64(h);
    for (std::uint64_t i = 0; i < take; ++i) {
        stream = splitmix64(stream);
        text += kVocab[stream % kVocabSize];
        if (i + 1 < take) {
            const bool line_break = params.line_break_every > 0 &&
                                    (i + 1) % params.line_break_every == 0;
            text += line_break ? '\n' : ' ';
        }
    }

    Generation gen;
    gen.text = std::move(text);
    gen.new_token_count = take;
    gen.finish_reason = natural < req.max_new_tokens ? FinishReason::Stop
                                                     : FinishReason::Length;
    return gen;
}

bool rule_matches(const MockGenRule& rule, const GenRequest& req,
                  const std::string& prompt, std::uint64_t sample_index,
                  std::int64_t seed) {
    if (rule.if_prompt_contains &&
        prompt.find(*rule.if_prompt_contains) == std::string::npos) {
        return false;
    }
    if (rule.if_prefix_contains &&
        req.prefix.value_or("").find(*rule.if_prefix_contains) == std::string::npos) {
        return false;
    }
    if (rule.if_sample_index && *rule.if_sample_index != sample_index) return false;
    if (rule.if_seed && *rule.if_seed != seed) return false;
    return true;
}

} // namespace

std::uint64_t mock_token_count(std::string_view text) {
    std::uint64_t count = 0;
    bool in_word = false;
    for (const char c : text) {
        const bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r';
        if (!ws && !in_word) ++count;
        in_word = !ws;
    }
    return count;
}

std::vector<Generation> MockGeneratorClient::generate(const GenRequest& req) {
    validate(req);
    const std::string prompt = prompt_text(req);
    std::vector<Generation> out;
    out.reserve(req.n_samples);
    for (std::uint64_t i = 0; i < req.n_samples; ++i) {
        const std::int64_t seed =
            req.sampling.seed.value_or(0) + static_cast<std::int64_t>(i);
        const MockGenRule* matched = nullptr;
        for (const auto& rule : script_->gen_rules) {
            if (rule_matches(rule, req, prompt, i, seed)) {
                matched = &rule;
                break;
            }
        }
        if (matched && matched->fail) {
            throw BackendError("mock: scripted failure");
        }
        if (matched && matched->abort) {
            Generation gen;
            gen.finish_reason = FinishReason::Aborted;
            out.push_back(std::move(gen));
            continue;
        }
        if (matched) {
            out.push_back(scripted_reply(matched->text, req, matched->continuation));
        } else if (script_->synth) {
            out.push_back(synth_reply(script_->synth_params, req, seed));
        } else if (script_->default_text) {
            out.push_back(scripted_reply(*script_->default_text, req, true));
        } else {
            throw ConfigError("mock: no generator rule matches request and no "
                              "default_text configured");
        }
    }
    return out;
}

RewardScore MockRewardClient::score_outcome(const std::string& /*problem_text*/,
                                            const std::string& response_text) {
    for (const auto& rule : script_->outcome_rules) {
        if (response_text.find(rule.if_contains) != std::string::npos) {
            return {rule.score, std::nullopt};
        }
    }
    return {script_->default_score, std::nullopt};
}

RewardScore MockRewardClient::score_step(const std::string& /*problem_text*/,
                                         const std::string& /*prefix*/,
                                         const std::string& candidate) {
    for (const auto& rule : script_->step_rules) {
        if (candidate.find(rule.if_contains) != std::string::npos) {
            return {rule.score, std::nullopt};
        }
    }
    return {script_->default_score, std::nullopt};
}

namespace {

// Pulls the payload of the last <tag>...</tag> block out of the prompt.
std::optional<std::string> last_block(const std::string& prompt, const std::string& tag) {
    const std::string open = "<" + tag + ">\n";
    const std::string close = "\n</" + tag + ">";
    const auto start = prompt.rfind(open);
    if (start == std::string::npos) return std::nullopt;
    const auto end = prompt.find(close, start + open.size());
    if (end == std::string::npos) return std::nullopt;
    return prompt.substr(start + open.size(), end - start - open.size());
}

} // namespace

JudgeVerdict MockJudgeClient::judge(const std::string& question,
                                    const std::string& gold_answer,
                                    const std::string& solution) {
    // build the real prompt so the fill path is exercised end to end
    const std::string prompt = judge_prompt(question, gold_answer, solution);

    std::string raw;
    if (script_->judge_mode == MockScript::JudgeMode::ContainsGold) {
        const auto answer = last_block(prompt, "answer");
        const auto sol = last_block(prompt, "solution");
        if (!answer || !sol) {
            raw = script_->judge_default;
        } else {
            raw = sol->find(*answer) != std::string::npos ? "[[TRUE]]" : "[[FALSE]]";
        }
    } else {
        raw = script_->judge_default;
        for (const auto& rule : script_->judge_rules) {
            if (solution.find(rule.if_solution_contains) != std::string::npos) {
                raw = rule.reply;
                break;
            }
        }
    }

    const auto verdict = parse_judge_verdict(raw);
    if (!verdict) {
        throw VerdictParseError("judge reply contained neither or both verdict "
                                "markers: " + raw);
    }
    return {*verdict, raw};
}

MockScript MockScript::from_json_text(const std::string& text) {
    const json j = json::parse(text);
    MockScript script;
    if (j.contains("generator")) {
        const auto& g = j.at("generator");
        script.synth = g.value("mode", "scripted") == "synth";
        if (g.contains("synth")) {
            const auto& s = g.at("synth");
            script.synth_params.min_round_tokens =
                s.value("min_round_tokens", script.synth_params.min_round_tokens);
            script.synth_params.max_round_tokens =
                s.value("max_round_tokens", script.synth_params.max_round_tokens);
            script.synth_params.line_break_every =
                s.value("line_break_every", script.synth_params.line_break_every);
        }
        if (g.contains("default_text")) {
            script.default_text = g.at("default_text").get<std::string>();
        }
        for (const auto& r : g.value("rules", json::array())) {
            MockGenRule rule;
            if (r.contains("prompt_contains")) {
                rule.if_prompt_contains = r.at("prompt_contains").get<std::string>();
            }
            if (r.contains("prefix_contains")) {
                rule.if_prefix_contains = r.at("prefix_contains").get<std::string>();
            }
            if (r.contains("sample_index")) {
                rule.if_sample_index = r.at("sample_index").get<std::uint64_t>();
            }
            if (r.contains("seed")) rule.if_seed = r.at("seed").get<std::int64_t>();
            rule.text = r.value("text", "");
            rule.fail = r.value("fail", false);
            rule.abort = r.value("abort", false);
            rule.continuation = r.value("continuation", true);
            script.gen_rules.push_back(std::move(rule));
        }
    }
    if (j.contains("reward")) {
        const auto& rw = j.at("reward");
        script.default_score = rw.value("default_score", 0.0);
        for (const auto& r : rw.value("outcome", json::array())) {
            script.outcome_rules.push_back(
                {r.at("contains").get<std::string>(), r.at("score").get<double>()});
        }
        for (const auto& r : rw.value("step", json::array())) {
            script.step_rules.push_back(
                {r.at("contains").get<std::string>(), r.at("score").get<double>()});
        }
    }
    if (j.contains("judge")) {
        const auto& jd = j.at("judge");
        const std::string mode = jd.value("mode", "contains_gold");
        script.judge_mode = mode == "table" ? JudgeMode::Table : JudgeMode::ContainsGold;
        script.judge_default = jd.value("default", "[[FALSE]]");
        for (const auto& r : jd.value("rules", json::array())) {
            script.judge_rules.push_back({r.at("solution_contains").get<std::string>(),
                                          r.at("reply").get<std::string>()});
        }
    }
    return script;
}

MockScript MockScript::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open mock script: " + path.string());
    std::ostringstream oss;
    oss << in.rdbuf();
    try {
        return from_json_text(oss.str());
    } catch (const json::exception& e) {
        throw ConfigError("bad mock script " + path.string() + ": " + e.what());
    }
}

Backends make_mock_backends(MockScript script) {
    auto shared = std::make_shared<const MockScript>(std::move(script));
    Backends backends;
    backends.generator = std::make_shared<MockGeneratorClient>(shared);
    backends.reward = std::make_shared<MockRewardClient>(shared);
    backends.judge = std::make_shared<MockJudgeClient>(shared);
    return backends;
}

} // namespace scalebench
