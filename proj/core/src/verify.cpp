#include "scalebench/verify.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <vector>

#include "scalebench/digest.hpp"

namespace scalebench {

std::string to_string(AnswerKind kind) {
    switch (kind) {
    case AnswerKind::Rational: return "rational";
    case AnswerKind::Decimal: return "decimal";
    case AnswerKind::Boolean: return "boolean";
    case AnswerKind::Text: return "text";
    }
    return "text";
}

namespace {

// ---------------------------------------------------------------- rationals

struct Rat {
    long long num = 0;
    long long den = 1;
};

long long gcd_ll(long long a, long long b) {
    while (b != 0) {
        const long long t = a % b;
        a = b;
        b = t;
    }
    return a < 0 ? -a : a;
}

std::optional<Rat> make_rat(long long num, long long den) {
    if (den == 0) return std::nullopt;
    if (den < 0) {
        if (num == std::numeric_limits<long long>::min() ||
            den == std::numeric_limits<long long>::min()) {
            return std::nullopt;
        }
        num = -num;
        den = -den;
    }
    const long long g = gcd_ll(num == 0 ? 1 : num, den);
    return Rat{num / g, den / g};
}

bool mul_overflow(long long a, long long b, long long& out) {
    return __builtin_mul_overflow(a, b, &out);
}

// --------------------------------------------------------- markup stripping

bool is_space_byte(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space_byte(s[b])) ++b;
    while (e > b && is_space_byte(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

// Replaces U+2212 (minus sign) and U+2009 / U+202F / U+00A0 (thin,
// narrow no-break and no-break spaces) with their ASCII counterparts so
// number parsing sees one alphabet.
std::string ascii_fold_spaces(std::string_view s) {
    static constexpr std::string_view kMinus = "\xe2\x88\x92";
    static constexpr std::string_view kThinSpace = "\xe2\x80\x89";
    static constexpr std::string_view kNarrowNbsp = "\xe2\x80\xaf";
    static constexpr std::string_view kNbsp = "\xc2\xa0";
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const auto rest = s.substr(i);
        if (rest.starts_with(kMinus)) {
            out.push_back('-');
            i += kMinus.size();
        } else if (rest.starts_with(kThinSpace) || rest.starts_with(kNarrowNbsp)) {
            out.push_back(' ');
            i += kThinSpace.size();
        } else if (rest.starts_with(kNbsp)) {
            out.push_back(' ');
            i += kNbsp.size();
        } else {
            out.push_back(s[i]);
            i += 1;
        }
    }
    return out;
}

// Finds the balanced {...} group starting at `pos` (which must point at
// '{'); returns the payload and advances `pos` past the closing brace.
std::optional<std::string> read_brace_group(std::string_view s, std::size_t& pos) {
    if (pos >= s.size() || s[pos] != '{') return std::nullopt;
    int depth = 0;
    const std::size_t start = pos + 1;
    for (std::size_t i = pos; i < s.size(); ++i) {
        if (s[i] == '{') ++depth;
        else if (s[i] == '}') {
            --depth;
            if (depth == 0) {
                const auto payload = std::string(s.substr(start, i - start));
                pos = i + 1;
                return payload;
            }
        }
    }
    return std::nullopt;
}

std::string strip_markup(std::string_view raw); // forward

// True when the opening bracket at position 0 matches the closing bracket
// at the end (depth never returns to zero in between).
bool brackets_span_whole(std::string_view s, char open, char close) {
    if (s.size() < 2 || s.front() != open || s.back() != close) return false;
    int depth = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == open) ++depth;
        else if (s[i] == close) {
            --depth;
            if (depth == 0) return i + 1 == s.size();
        }
    }
    return false;
}

// Unwraps one level of $...$, $$...$$, \(...\), \[...\] when they wrap
// the whole string, plus whole-string braces and comma-free parentheses
// (a parenthesized scalar, not a tuple).
bool unwrap_delimiters(std::string& s) {
    const auto wrapped_by = [&](std::string_view open, std::string_view close) {
        return s.size() >= open.size() + close.size() && s.starts_with(open) &&
               s.ends_with(close);
    };
    if (wrapped_by("$$", "$$")) { s = trim(s.substr(2, s.size() - 4)); return true; }
    if (wrapped_by("$", "$")) { s = trim(s.substr(1, s.size() - 2)); return true; }
    if (wrapped_by("\\(", "\\)") || wrapped_by("\\[", "\\]")) {
        s = trim(s.substr(2, s.size() - 4));
        return true;
    }
    if (brackets_span_whole(s, '{', '}')) {
        s = trim(s.substr(1, s.size() - 2));
        return true;
    }
    if (brackets_span_whole(s, '(', ')') && s.find(',') == std::string::npos) {
        s = trim(s.substr(1, s.size() - 2));
        return true;
    }
    return false;
}

std::string strip_markup(std::string_view raw) {
    std::string s = trim(ascii_fold_spaces(raw));
    while (unwrap_delimiters(s)) {}

    static constexpr std::string_view kUnwrap[] = {
        "\\boxed", "\\text", "\\textbf", "\\mathrm", "\\mathbf", "\\mathit",
        "\\operatorname"};
    static constexpr std::string_view kFractions[] = {"\\dfrac", "\\tfrac", "\\frac"};
    static constexpr std::string_view kDrop[] = {"\\left", "\\right", "\\!", "\\,",
                                                 "\\;", "\\:", "\\quad", "\\qquad"};

    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '\\') {
            const auto rest = std::string_view(s).substr(i);
            bool handled = false;
            for (const auto cmd : kFractions) {
                if (!rest.starts_with(cmd)) continue;
                std::size_t pos = i + cmd.size();
                const auto a = read_brace_group(s, pos);
                const auto b = a ? read_brace_group(s, pos) : std::nullopt;
                if (a && b) {
                    out += strip_markup(*a);
                    out += '/';
                    out += strip_markup(*b);
                    i = pos;
                    handled = true;
                }
                break;
            }
            if (handled) continue;
            for (const auto cmd : kUnwrap) {
                if (!rest.starts_with(cmd)) continue;
                std::size_t pos = i + cmd.size();
                while (pos < s.size() && is_space_byte(s[pos])) ++pos;
                const auto payload = read_brace_group(s, pos);
                if (payload) {
                    out += strip_markup(*payload);
                    i = pos;
                    handled = true;
                }
                break;
            }
            if (handled) continue;
            for (const auto cmd : kDrop) {
                if (rest.starts_with(cmd)) {
                    i += cmd.size();
                    handled = true;
                    break;
                }
            }
            if (handled) continue;
        }
        out.push_back(s[i]);
        ++i;
    }
    std::string result = trim(out);
    while (unwrap_delimiters(result)) {}
    return result;
}

// ---------------------------------------------------------- number parsing

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isdigit(c) != 0;
    });
}

// Valid digit grouping: 1-3 leading digits, then separator + exactly
// three digits repeated, with an optional '.' decimal tail (unless '.' is
// itself the separator).
bool strip_grouping(std::string_view s, char sep, std::string& out) {
    std::string_view body = s;
    std::string sign;
    if (!body.empty() && (body.front() == '+' || body.front() == '-')) {
        sign = body.front();
        body.remove_prefix(1);
    }
    std::string_view tail;
    if (sep != '.') {
        const auto dot = body.find('.');
        if (dot != std::string_view::npos) {
            tail = body.substr(dot);
            body = body.substr(0, dot);
            if (tail.size() < 2 || !all_digits(tail.substr(1))) return false;
        }
    }
    std::vector<std::string_view> groups;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= body.size(); ++i) {
        if (i == body.size() || body[i] == sep) {
            groups.push_back(body.substr(start, i - start));
            start = i + 1;
        }
    }
    if (groups.size() < 2) return false;
    if (groups.front().empty() || groups.front().size() > 3 ||
        !all_digits(groups.front())) {
        return false;
    }
    for (std::size_t g = 1; g < groups.size(); ++g) {
        if (groups[g].size() != 3 || !all_digits(groups[g])) return false;
    }
    out = sign;
    for (const auto g : groups) out += std::string(g);
    out += std::string(tail);
    return true;
}

// Digit separators are removed only when their layout is a valid
// grouping; a lone comma between digits with no other reading becomes a
// decimal point. Anything ambiguous stays as-is (and will fall back to
// text comparison).
std::optional<std::string> strip_separators(std::string_view s) {
    const bool has_comma = s.find(',') != std::string_view::npos;
    const bool has_space = s.find(' ') != std::string_view::npos;
    if (!has_comma && !has_space) return std::string(s);

    std::string out;
    if (has_comma && !has_space) {
        // comma grouping, optionally with a '.' decimal tail: "1,234.5"
        if (strip_grouping(s, ',', out)) return out;
        const auto comma = s.find(',');
        const bool single_comma = s.rfind(',') == comma;
        if (single_comma && s.find('.') != std::string_view::npos) {
            // European layout: dot-grouped head, comma decimal tail
            const auto head = s.substr(0, comma);
            const auto tail = s.substr(comma + 1);
            std::string collapsed;
            if (all_digits(tail) && strip_grouping(head, '.', collapsed)) {
                return collapsed + "." + std::string(tail);
            }
            return std::nullopt;
        }
        if (single_comma) {
            // lone comma between digits, no grouping reading: decimal comma
            const auto head = s.substr(0, comma);
            const auto tail = s.substr(comma + 1);
            std::string_view digits_head = head;
            if (!digits_head.empty() &&
                (digits_head.front() == '+' || digits_head.front() == '-')) {
                digits_head.remove_prefix(1);
            }
            if (all_digits(digits_head) && all_digits(tail)) {
                return std::string(head) + "." + std::string(tail);
            }
        }
        return std::nullopt;
    }
    if (has_space && !has_comma) {
        if (strip_grouping(s, ' ', out)) return out;
        return std::nullopt;
    }
    // comma-grouped with a dot decimal tail ("1,234.5")
    if (strip_grouping(s, ',', out)) return out;
    return std::nullopt;
}

std::optional<Rat> parse_plain_number(std::string_view s) {
    if (s.empty()) return std::nullopt;
    std::size_t i = 0;
    long long sign = 1;
    if (s[i] == '+' || s[i] == '-') {
        if (s[i] == '-') sign = -1;
        ++i;
    }
    std::string int_part, frac_part;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
        int_part.push_back(s[i++]);
    }
    if (i < s.size() && s[i] == '.') {
        ++i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
            frac_part.push_back(s[i++]);
        }
    }
    if (int_part.empty() && frac_part.empty()) return std::nullopt;
    long long exponent = 0;
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        ++i;
        long long esign = 1;
        if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
            if (s[i] == '-') esign = -1;
            ++i;
        }
        if (i >= s.size()) return std::nullopt;
        std::string digits;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
            digits.push_back(s[i++]);
        }
        if (digits.empty() || digits.size() > 4) return std::nullopt;
        exponent = esign * std::stoll(digits);
    }
    if (i != s.size()) return std::nullopt;

    long long mantissa = 0;
    for (const char c : int_part + frac_part) {
        if (mul_overflow(mantissa, 10, mantissa)) return std::nullopt;
        if (__builtin_add_overflow(mantissa, c - '0', &mantissa)) return std::nullopt;
    }
    mantissa *= sign;
    const long long net_exp = exponent - static_cast<long long>(frac_part.size());
    long long num = mantissa, den = 1;
    for (long long e = 0; e < std::llabs(net_exp); ++e) {
        if (net_exp > 0) {
            if (mul_overflow(num, 10, num)) return std::nullopt;
        } else {
            if (mul_overflow(den, 10, den)) return std::nullopt;
        }
    }
    return make_rat(num, den);
}

std::optional<Rat> parse_number(std::string_view s) {
    const auto clean = strip_separators(s);
    if (!clean) return std::nullopt;
    // fraction bar
    const auto slash = clean->find('/');
    if (slash != std::string::npos && clean->rfind('/') == slash) {
        const auto a = parse_plain_number(trim(clean->substr(0, slash)));
        const auto b = parse_plain_number(trim(clean->substr(slash + 1)));
        if (a && b && b->num != 0) {
            long long num, den;
            if (mul_overflow(a->num, b->den, num)) return std::nullopt;
            if (mul_overflow(a->den, b->num, den)) return std::nullopt;
            return make_rat(num, den);
        }
        return std::nullopt;
    }
    return parse_plain_number(*clean);
}

std::string render_rational(const Rat& r) {
    if (r.den == 1) return std::to_string(r.num);
    return std::to_string(r.num) + "/" + std::to_string(r.den);
}

std::string collapse_fold(std::string_view s) {
    std::string out;
    bool pending_space = false;
    for (const char c : s) {
        if (is_space_byte(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(
            std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

std::optional<double> numeric_value(const CanonicalAnswer& a) {
    if (a.kind == AnswerKind::Rational) {
        const auto slash = a.value.find('/');
        if (slash == std::string::npos) {
            return std::strtod(a.value.c_str(), nullptr);
        }
        const double num = std::strtod(a.value.substr(0, slash).c_str(), nullptr);
        const double den = std::strtod(a.value.substr(slash + 1).c_str(), nullptr);
        return num / den;
    }
    if (a.kind == AnswerKind::Decimal) {
        return std::strtod(a.value.c_str(), nullptr);
    }
    return std::nullopt;
}

std::optional<Rat> rational_value(const CanonicalAnswer& a) {
    if (a.kind != AnswerKind::Rational) return std::nullopt;
    return parse_number(a.value);
}

} // namespace

CanonicalAnswer normalize(std::string_view raw) {
    const std::string stripped = strip_markup(raw);

    const std::string folded = collapse_fold(stripped);
    if (folded == "true" || folded == "false") {
        return {AnswerKind::Boolean, folded};
    }

    if (const auto rat = parse_number(stripped)) {
        return {AnswerKind::Rational, render_rational(*rat)};
    }

    // numbers too large for exact arithmetic keep their double rendering
    if (!stripped.empty()) {
        const char* begin = stripped.c_str();
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin + stripped.size() && std::isfinite(v)) {
            char buf[64];
            const auto res = std::to_chars(buf, buf + sizeof(buf), v);
            return {AnswerKind::Decimal, std::string(buf, res.ptr)};
        }
    }

    return {AnswerKind::Text, folded};
}

bool equivalent(const CanonicalAnswer& a, const CanonicalAnswer& b) {
    const bool a_num = a.kind == AnswerKind::Rational || a.kind == AnswerKind::Decimal;
    const bool b_num = b.kind == AnswerKind::Rational || b.kind == AnswerKind::Decimal;
    if (a_num && b_num) {
        const auto ra = rational_value(a);
        const auto rb = rational_value(b);
        if (ra && rb) {
            const __int128 lhs = static_cast<__int128>(ra->num) * rb->den;
            const __int128 rhs = static_cast<__int128>(rb->num) * ra->den;
            if (lhs == rhs) return true;
        }
        const auto va = numeric_value(a);
        const auto vb = numeric_value(b);
        return va && vb && std::abs(*va - *vb) <= 1e-6;
    }
    if (a.kind != b.kind) return false;
    return a.value == b.value;
}

namespace {

std::optional<std::string> extract_boxed(std::string_view text) {
    std::size_t search_end = text.size();
    while (true) {
        const auto pos = text.rfind("\\boxed", search_end == text.size()
                                                 ? std::string_view::npos
                                                 : search_end);
        if (pos == std::string_view::npos) return std::nullopt;
        std::size_t cursor = pos + 6;
        while (cursor < text.size() && is_space_byte(text[cursor])) ++cursor;
        if (auto payload = read_brace_group(text, cursor)) {
            return trim(*payload);
        }
        if (pos == 0) return std::nullopt;
        search_end = pos - 1;
    }
}

std::optional<std::string> extract_final_answer_phrase(std::string_view text) {
    const auto pos = text.rfind(kFinalAnswerMarker);
    if (pos == std::string_view::npos) return std::nullopt;
    auto rest = text.substr(pos + kFinalAnswerMarker.size());
    std::size_t b = 0;
    while (b < rest.size() && (is_space_byte(rest[b]) || rest[b] == ':')) ++b;
    rest = rest.substr(b);
    const auto nl = rest.find('\n');
    if (nl != std::string_view::npos) rest = rest.substr(0, nl);
    std::string line = trim(rest);
    while (!line.empty() && (line.back() == '.' || line.back() == '!' ||
                             line.back() == ';' || line.back() == ':')) {
        line.pop_back();
        line = trim(line);
    }
    if (line.empty()) return std::nullopt;
    return line;
}

// Syntactic check only; magnitude does not matter here.
bool looks_like_number(std::string_view s) {
    std::size_t i = 0;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    std::size_t digits = 0, dots = 0;
    while (i < s.size() &&
           (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.')) {
        if (s[i] == '.') {
            if (++dots > 1) return false;
        } else {
            ++digits;
        }
        ++i;
    }
    if (digits == 0) return false;
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        ++i;
        if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
        std::size_t exp_digits = 0;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
            ++i;
            ++exp_digits;
        }
        if (exp_digits == 0) return false;
    }
    return i == s.size();
}

std::optional<std::string> extract_last_number(std::string_view text) {
    // last non-empty line
    std::size_t end = text.size();
    while (end > 0) {
        std::size_t begin = text.rfind('\n', end - 1);
        const std::size_t line_start = begin == std::string_view::npos ? 0 : begin + 1;
        const auto line = text.substr(line_start, end - line_start);
        if (!trim(line).empty()) {
            // scan for the final standalone number
            std::optional<std::string> found;
            for (std::size_t i = 0; i < line.size(); ++i) {
                const unsigned char c = line[i];
                const bool starts_number =
                    std::isdigit(c) ||
                    ((c == '+' || c == '-' || c == '.') && i + 1 < line.size() &&
                     std::isdigit(static_cast<unsigned char>(line[i + 1])));
                if (!starts_number) continue;
                if (i > 0) {
                    const unsigned char prev = line[i - 1];
                    if (std::isalnum(prev) || prev == '_' || prev == '.') continue;
                }
                std::size_t j = i;
                if (line[j] == '+' || line[j] == '-') ++j;
                while (j < line.size() &&
                       (std::isdigit(static_cast<unsigned char>(line[j])) ||
                        line[j] == '.')) {
                    ++j;
                }
                if (j < line.size() && (line[j] == 'e' || line[j] == 'E')) {
                    std::size_t k = j + 1;
                    if (k < line.size() && (line[k] == '+' || line[k] == '-')) ++k;
                    std::size_t digits = 0;
                    while (k < line.size() &&
                           std::isdigit(static_cast<unsigned char>(line[k]))) {
                        ++k;
                        ++digits;
                    }
                    if (digits > 0) j = k;
                }
                auto token = std::string(line.substr(i, j - i));
                while (!token.empty() && token.back() == '.') token.pop_back();
                if (looks_like_number(token)) found = token;
                i = j;
            }
            if (found) return found;
            return std::nullopt;
        }
        if (begin == std::string_view::npos) break;
        end = begin;
    }
    return std::nullopt;
}

} // namespace

std::optional<std::string> extract_answer(std::string_view text) {
    if (auto boxed = extract_boxed(text)) return boxed;
    if (auto phrase = extract_final_answer_phrase(text)) return phrase;
    return extract_last_number(text);
}

VerifyOutcome Verifier::verify(const Problem& problem, Attempt& attempt) {
    VerifyOutcome out;
    if (attempt.failed) {
        out.unscored = true;
        out.error = attempt.failure.empty() ? "attempt failed" : attempt.failure;
        attempt.unscored = true;
        return out;
    }

    attempt.extracted_answer = extract_answer(attempt.final_text);

    if (problem.eval_method == EvalMethod::RuleBased) {
        bool correct = false;
        if (attempt.extracted_answer) {
            correct = equivalent(normalize(*attempt.extracted_answer),
                                 normalize(problem.gold_answer));
        }
        attempt.verdict = correct;
        out.verdict = correct;
        return out;
    }

    if (!judge_) {
        out.unscored = true;
        out.error = "no judge endpoint configured";
        attempt.unscored = true;
        return out;
    }

    const std::string key = problem.id + ":" + short_digest(attempt.final_text);
    {
        std::lock_guard lock(mutex_);
        const auto it = verdict_cache_.find(key);
        if (it != verdict_cache_.end()) {
            attempt.verdict = it->second;
            out.verdict = it->second;
            return out;
        }
    }
    try {
        const JudgeVerdict verdict =
            judge_->judge(problem.statement, problem.gold_answer, attempt.final_text);
        {
            std::lock_guard lock(mutex_);
            verdict_cache_[key] = verdict.correct;
        }
        attempt.verdict = verdict.correct;
        out.verdict = verdict.correct;
    } catch (const std::exception& e) {
        out.unscored = true;
        out.error = e.what();
        attempt.unscored = true;
    }
    return out;
}

std::size_t Verifier::cache_size() const {
    std::lock_guard lock(mutex_);
    return verdict_cache_.size();
}

} // namespace scalebench
