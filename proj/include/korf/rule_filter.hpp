#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "korf/document.hpp"
#include "korf/unicode.hpp"

namespace korf {

struct FilterConfig {
    uint64_t min_words = 10;
    uint64_t max_words = 10'000'000;
    double min_avg_word_len = 2.0;
    double max_avg_word_len = 10.0;
    double min_korean_ratio = 0.80;
    double max_top_ngram_ratio = 0.15;
    size_t ngram_n = 5;
    std::string sentence_end_marks = ".?!";
};

enum class FilterRule { word_count, avg_word_len, korean_ratio, ngram_repeat };

inline const char* filter_rule_name(FilterRule r) {
    switch (r) {
        case FilterRule::word_count: return "word_count";
        case FilterRule::avg_word_len: return "avg_word_len";
        case FilterRule::korean_ratio: return "korean_ratio";
        case FilterRule::ngram_repeat: return "ngram_repeat";
    }
    return "?";
}

struct FilterVerdict {
    bool keep = true;
    std::optional<FilterRule> failed_rule;
    std::map<std::string, double> measurements;
};

// Words are maximal runs of non-whitespace; characters are Unicode scalars.
inline std::pair<uint64_t, double> word_stats(std::string_view text) {
    auto words = split_words(text);
    if (words.empty()) return {0, 0.0};
    uint64_t chars = 0;
    for (auto w : words) chars += codepoint_count(w);
    return {words.size(), static_cast<double>(chars) / static_cast<double>(words.size())};
}

// A word counts as Korean when the majority of its characters are Hangul.
inline bool is_korean_word(std::string_view word) {
    size_t pos = 0, hangul = 0, total = 0;
    while (pos < word.size()) {
        char32_t cp = decode_utf8(word, pos);
        ++total;
        if (is_hangul(cp)) ++hangul;
    }
    return total > 0 && 2 * hangul > total;
}

inline double korean_ratio(std::string_view text) {
    auto words = split_words(text);
    if (words.empty()) return 0.0;
    size_t korean = 0;
    for (auto w : words)
        if (is_korean_word(w)) ++korean;
    return static_cast<double>(korean) / static_cast<double>(words.size());
}

// Frequency of the most common word-level n-gram relative to all n-grams.
inline double top_ngram_ratio(std::string_view text, size_t n) {
    auto words = split_words(text);
    if (words.size() < n) return 0.0;
    std::unordered_map<std::string, uint64_t> counts;
    uint64_t total = 0, best = 0;
    for (size_t i = 0; i + n <= words.size(); ++i) {
        std::string key;
        for (size_t k = 0; k < n; ++k) {
            if (k) key.push_back('\x1f');
            key.append(words[i + k]);
        }
        best = std::max(best, ++counts[key]);
        ++total;
    }
    return static_cast<double>(best) / static_cast<double>(total);
}

// Within each line, keep only the prefix up to the last sentence-ending mark;
// drop lines with no mark. Idempotent.
inline std::string strip_unterminated_sentences(std::string_view text,
                                                std::string_view marks = ".?!") {
    std::string out;
    out.reserve(text.size());
    size_t start = 0;
    bool first = true;
    while (start <= text.size()) {
        size_t eol = text.find('\n', start);
        std::string_view line =
            text.substr(start, eol == std::string_view::npos ? std::string_view::npos : eol - start);
        size_t last = line.find_last_of(marks);
        if (last != std::string_view::npos) {
            if (!first) out.push_back('\n');
            out.append(line.substr(0, last + 1));
            first = false;
        }
        if (eol == std::string_view::npos) break;
        start = eol + 1;
    }
    return out;
}

// Rules run in a fixed order on the sentence-stripped text; the first failure
// is recorded but every measurement is taken regardless.
inline FilterVerdict apply_filters(const Document& doc, const FilterConfig& cfg) {
    FilterVerdict v;
    std::string stripped = strip_unterminated_sentences(doc.text, cfg.sentence_end_marks);

    auto [wc, avg_len] = word_stats(stripped);
    double ko = korean_ratio(stripped);
    double top = top_ngram_ratio(stripped, cfg.ngram_n);
    v.measurements["word_count"] = static_cast<double>(wc);
    v.measurements["avg_word_len"] = avg_len;
    v.measurements["korean_ratio"] = ko;
    v.measurements["ngram_repeat"] = top;

    auto fail = [&](FilterRule r) {
        if (v.keep) {
            v.keep = false;
            v.failed_rule = r;
        }
    };
    if (wc < cfg.min_words || wc > cfg.max_words) fail(FilterRule::word_count);
    if (avg_len < cfg.min_avg_word_len || avg_len > cfg.max_avg_word_len)
        fail(FilterRule::avg_word_len);
    if (ko < cfg.min_korean_ratio) fail(FilterRule::korean_ratio);
    if (top > cfg.max_top_ngram_ratio) fail(FilterRule::ngram_repeat);
    return v;
}

}  // namespace korf
