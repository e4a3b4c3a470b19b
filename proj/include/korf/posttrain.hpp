#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "korf/unicode.hpp"

namespace korf {

enum class Task { ending_completion, fill_in_blank, mmlu_style, math, coding, instruction };

inline const char* task_name(Task t) {
    switch (t) {
        case Task::ending_completion: return "ending_completion";
        case Task::fill_in_blank: return "fill_in_blank";
        case Task::mmlu_style: return "mmlu_style";
        case Task::math: return "math";
        case Task::coding: return "coding";
        case Task::instruction: return "instruction";
    }
    return "?";
}

inline std::optional<Task> task_from_name(std::string_view name) {
    for (Task t : {Task::ending_completion, Task::fill_in_blank, Task::mmlu_style, Task::math,
                   Task::coding, Task::instruction})
        if (name == task_name(t)) return t;
    return std::nullopt;
}

// The SFT/DPO unit. Records with an empty rejected list are usable for SFT
// only and flagged as such on output.
struct PreferenceRecord {
    std::string prompt;
    std::string chosen;
    std::vector<std::string> rejected;
    std::string source;
    Task task = Task::instruction;

    void check() const {
        if (prompt.empty()) throw std::runtime_error("preference record: empty prompt");
        if (chosen.empty()) throw std::runtime_error("preference record: empty chosen");
        for (const auto& r : rejected)
            if (r == chosen) throw std::runtime_error("preference record: chosen appears in rejected");
    }
};

// ---- per-family formatters --------------------------------------------

// Context becomes the prompt verbatim; the correct choice is chosen, the
// others rejected in their original order.
inline PreferenceRecord format_ending_completion(const std::string& context,
                                                 const std::vector<std::string>& choices,
                                                 size_t answer_index) {
    if (choices.size() < 2) throw std::runtime_error("ending_completion: needs at least 2 choices");
    if (answer_index >= choices.size())
        throw std::runtime_error("ending_completion: answer index out of range");
    PreferenceRecord r;
    r.task = Task::ending_completion;
    r.prompt = context;
    r.chosen = choices[answer_index];
    for (size_t i = 0; i < choices.size(); ++i)
        if (i != answer_index) r.rejected.push_back(choices[i]);
    r.check();
    return r;
}

// Sentence must contain exactly one '_' blank. The prompt is the text before
// the blank (trailing whitespace trimmed); responses substitute each option
// into the blank-to-end remainder.
inline PreferenceRecord format_fill_in_blank(const std::string& sentence,
                                             const std::string& correct_option,
                                             const std::string& wrong_option) {
    size_t blank = sentence.find('_');
    if (blank == std::string::npos) throw std::runtime_error("fill_in_blank: no blank marker");
    if (sentence.find('_', blank + 1) != std::string::npos)
        throw std::runtime_error("fill_in_blank: multiple blank markers");
    std::string prompt = sentence.substr(0, blank);
    while (!prompt.empty() && is_space_char(prompt.back())) prompt.pop_back();
    if (prompt.empty()) throw std::runtime_error("fill_in_blank: blank at sentence start");
    std::string tail = sentence.substr(blank + 1);
    PreferenceRecord r;
    r.task = Task::fill_in_blank;
    r.prompt = prompt;
    r.chosen = correct_option + tail;
    r.rejected.push_back(wrong_option + tail);
    r.check();
    return r;
}

// MMLU layout: "Question: {q}\n{L}: {choice}\n...Answer:"; responses are the
// labeled choices.
inline PreferenceRecord format_mmlu_style(const std::string& question,
                                          const std::vector<std::string>& choices,
                                          size_t answer_index) {
    if (choices.empty() || choices.size() > 26)
        throw std::runtime_error("mmlu_style: choice count must be 1..26");
    if (answer_index >= choices.size())
        throw std::runtime_error("mmlu_style: answer index out of range");
    PreferenceRecord r;
    r.task = Task::mmlu_style;
    std::string prompt = "Question: " + question + "\n";
    for (size_t i = 0; i < choices.size(); ++i) {
        std::string labeled;
        labeled.push_back(static_cast<char>('A' + i));
        labeled += ": " + choices[i];
        prompt += labeled + "\n";
        if (i == answer_index)
            r.chosen = labeled;
        else
            r.rejected.push_back(labeled);
    }
    prompt += "Answer:";
    r.prompt = std::move(prompt);
    r.check();
    return r;
}

// Deletes every "<<...>>" calculator annotation; the "#### N" line survives.
inline std::string strip_equation_tags(const std::string& solution) {
    std::string out;
    out.reserve(solution.size());
    size_t i = 0;
    while (i < solution.size()) {
        if (solution.compare(i, 2, "<<") == 0) {
            size_t close = solution.find(">>", i + 2);
            if (close == std::string::npos)
                throw std::runtime_error("math: unbalanced '<<' at position " + std::to_string(i));
            i = close + 2;
        } else {
            out.push_back(solution[i]);
            ++i;
        }
    }
    return out;
}

inline PreferenceRecord format_math(const std::string& question, const std::string& solution) {
    PreferenceRecord r;
    r.task = Task::math;
    r.prompt = "Q: " + question + "\nA:";
    r.chosen = strip_equation_tags(solution);
    r.check();
    return r;
}

// A coding sample skipped rather than formatted, with the reason.
struct SkippedSample {
    std::string reason;
};

// Pure formatter: the description becomes the docstring under the signature,
// the body (original indentation) the chosen response.
inline PreferenceRecord format_coding(const std::string& description, const std::string& signature,
                                      const std::string& body) {
    PreferenceRecord r;
    r.task = Task::coding;
    r.prompt = signature + "\n    \"\"\"\n    " + description + "\n    \"\"\"";
    r.chosen = body;
    r.check();
    return r;
}

// Whole-source variant: the code must contain exactly one top-level function
// and no classes, otherwise the sample is skipped with the reason.
inline std::variant<PreferenceRecord, SkippedSample> format_coding(const std::string& description,
                                                                  const std::string& code) {
    std::vector<size_t> def_lines;
    bool has_class = false;
    size_t pos = 0, line_start = 0;
    std::vector<std::pair<size_t, std::string>> lines;  // (offset, text)
    while (line_start <= code.size()) {
        size_t eol = code.find('\n', line_start);
        std::string line = code.substr(
            line_start, eol == std::string::npos ? std::string::npos : eol - line_start);
        lines.emplace_back(line_start, line);
        if (line.rfind("def ", 0) == 0) def_lines.push_back(lines.size() - 1);
        if (line.rfind("class ", 0) == 0) has_class = true;
        if (eol == std::string::npos) break;
        line_start = eol + 1;
    }
    (void)pos;
    if (has_class) return SkippedSample{"contains a class definition"};
    if (def_lines.empty()) return SkippedSample{"no top-level function"};
    if (def_lines.size() > 1) return SkippedSample{"multiple top-level functions"};

    const size_t def_idx = def_lines.front();
    std::string signature = lines[def_idx].second;
    // body = everything after the signature line, original indentation kept
    std::string body;
    for (size_t i = def_idx + 1; i < lines.size(); ++i) {
        if (i > def_idx + 1) body.push_back('\n');
        body += lines[i].second;
    }
    while (!body.empty() && (body.back() == '\n' || body.back() == ' ')) body.pop_back();
    if (body.empty()) return SkippedSample{"empty function body"};

    return format_coding(description, signature, body);
}

// ---- synthetic-response filtering and grading --------------------------

enum class ExpectedLang { korean, english };

struct FilterOutcome {
    bool keep = false;
    std::string reason;  // "too_long" | "wrong_language" | empty when kept
};

// Script-ratio language guess: Hangul fraction >= 0.3 -> korean; Latin
// fraction >= 0.5 with Hangul < 0.05 -> english; anything else is
// indeterminate and dropped.
inline FilterOutcome filter_synthetic(std::string_view response, size_t max_len,
                                      ExpectedLang expected) {
    if (max_len == 0) throw std::invalid_argument("filter_synthetic: max_len must be positive");
    const size_t n_chars = codepoint_count(response);
    if (n_chars > max_len) return {false, "too_long"};
    size_t pos = 0, hangul = 0, latin = 0, total = 0;
    while (pos < response.size()) {
        char32_t cp = decode_utf8(response, pos);
        ++total;
        if (is_hangul(cp)) ++hangul;
        if ((cp >= 'A' && cp <= 'Z') || (cp >= 'a' && cp <= 'z')) ++latin;
    }
    if (total == 0) return {false, "wrong_language"};
    const double h = static_cast<double>(hangul) / total;
    const double l = static_cast<double>(latin) / total;
    std::optional<ExpectedLang> guess;
    if (h >= 0.3)
        guess = ExpectedLang::korean;
    else if (l >= 0.5 && h < 0.05)
        guess = ExpectedLang::english;
    if (!guess || *guess != expected) return {false, "wrong_language"};
    return {true, ""};
}

struct GradeResult {
    bool chosen = false;
    std::string reason;  // "correct" | "wrong_answer" | "unparsed"
};

namespace posttrain_detail {

// Pulls the first number after `pos`, tolerant of "$", thousands commas and
// trailing punctuation.
inline std::optional<double> parse_number_at(std::string_view s, size_t pos) {
    while (pos < s.size() && (is_space_char(s[pos]) || s[pos] == '$' || s[pos] == '*')) ++pos;
    std::string digits;
    bool seen_digit = false;
    if (pos < s.size() && (s[pos] == '-' || s[pos] == '+')) digits.push_back(s[pos++]);
    while (pos < s.size()) {
        char c = s[pos];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            digits.push_back(c);
            seen_digit = true;
        } else if (c == ',') {
            // thousands separator
        } else if (c == '.' && pos + 1 < s.size() &&
                   std::isdigit(static_cast<unsigned char>(s[pos + 1]))) {
            digits.push_back(c);
        } else {
            break;
        }
        ++pos;
    }
    if (!seen_digit) return std::nullopt;
    try {
        return std::stod(digits);
    } catch (...) {
        return std::nullopt;
    }
}

}  // namespace posttrain_detail

// Final answer = the number after the last "####" or the last "The answer
// is"; exact numeric match against the gold decides chosen vs rejected.
inline GradeResult grade_math_response(std::string_view response, double gold) {
    if (!std::isfinite(gold)) throw std::invalid_argument("grade: gold must be finite");
    size_t anchor = std::string_view::npos;
    size_t skip = 0;
    if (size_t p = response.rfind("####"); p != std::string_view::npos) {
        anchor = p;
        skip = 4;
    }
    if (size_t p = response.rfind("The answer is");
        p != std::string_view::npos && (anchor == std::string_view::npos || p > anchor)) {
        anchor = p;
        skip = std::string("The answer is").size();
    }
    if (anchor == std::string_view::npos) return {false, "unparsed"};
    auto parsed = posttrain_detail::parse_number_at(response, anchor + skip);
    if (!parsed) return {false, "unparsed"};
    return *parsed == gold ? GradeResult{true, "correct"} : GradeResult{false, "wrong_answer"};
}

// ---- source balancing --------------------------------------------------

struct MixPlan {
    uint64_t per_source_quota = 0;
    bool duplication_allowed = true;
    uint64_t seed = 0;
};

namespace posttrain_detail {

// Seeded Fisher-Yates; self-contained so shuffles are identical across
// standard library implementations.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace posttrain_detail

// Exactly quota records per source; short sources are extended by cyclic
// duplication. Output order is a seeded shuffle of the combined list.
inline std::vector<PreferenceRecord> balance_mix(
    const std::vector<std::pair<std::string, std::vector<PreferenceRecord>>>& per_source,
    const MixPlan& plan) {
    if (plan.per_source_quota == 0) throw std::invalid_argument("balance_mix: quota must be > 0");
    std::vector<PreferenceRecord> out;
    for (const auto& [source, records] : per_source) {
        if (records.empty())
            throw std::runtime_error("balance_mix: source has no records: " + source);
        if (records.size() < plan.per_source_quota && !plan.duplication_allowed)
            throw std::runtime_error("balance_mix: source too small and duplication disabled: " +
                                     source);
        for (uint64_t i = 0; i < plan.per_source_quota; ++i) {
            PreferenceRecord r = records[i % records.size()];
            r.source = source;
            out.push_back(std::move(r));
        }
    }
    posttrain_detail::deterministic_shuffle(out, plan.seed);
    return out;
}

// ---- JSONL wire format -------------------------------------------------

inline nlohmann::json record_to_json(const PreferenceRecord& r) {
    nlohmann::json j;
    j["prompt"] = r.prompt;
    j["chosen"] = r.chosen;
    j["rejected"] = r.rejected;
    j["source"] = r.source;
    j["task"] = task_name(r.task);
    if (r.rejected.empty()) j["sft_only"] = true;
    return j;
}

inline PreferenceRecord record_from_json(const nlohmann::json& j) {
    PreferenceRecord r;
    r.prompt = j.at("prompt").get<std::string>();
    r.chosen = j.at("chosen").get<std::string>();
    if (j.contains("rejected")) r.rejected = j["rejected"].get<std::vector<std::string>>();
    r.source = j.value("source", "");
    if (auto t = task_from_name(j.value("task", "instruction"))) r.task = *t;
    r.check();
    return r;
}

}  // namespace korf
