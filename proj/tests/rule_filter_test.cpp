#include "korf/rule_filter.hpp"

#include <gtest/gtest.h>

#include <random>

#include "util.hpp"

namespace {

TEST(SentenceStrip, KeepsPrefixUpToLastMark) {
    EXPECT_EQ(korf::strip_unterminated_sentences("안녕하세요. 반갑습니다. 그런데"),
              "안녕하세요. 반갑습니다.");
    EXPECT_EQ(korf::strip_unterminated_sentences("질문이 있나요? 네! 그리고"),
              "질문이 있나요? 네!");
}

TEST(SentenceStrip, DropsMarklessLines) {
    EXPECT_EQ(korf::strip_unterminated_sentences("첫 줄.\n마크 없는 줄\n둘째 줄!"),
              "첫 줄.\n둘째 줄!");
    EXPECT_EQ(korf::strip_unterminated_sentences("마크 없음"), "");
}

TEST(SentenceStrip, Idempotent) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> kind(0, 4);
    for (int iter = 0; iter < 500; ++iter) {
        std::string text;
        int lines = 1 + static_cast<int>(rng() % 5);
        for (int l = 0; l < lines; ++l) {
            if (l) text.push_back('\n');
            int words = 1 + static_cast<int>(rng() % 8);
            for (int w = 0; w < words; ++w) {
                if (w) text.push_back(' ');
                text += testutil::random_korean_word(rng);
                switch (kind(rng)) {
                    case 0: text.push_back('.'); break;
                    case 1: text.push_back('?'); break;
                    case 2: text.push_back('!'); break;
                    default: break;
                }
            }
        }
        std::string once = korf::strip_unterminated_sentences(text);
        EXPECT_EQ(korf::strip_unterminated_sentences(once), once) << "input: " << text;
    }
}

TEST(RuleFilter, WordStats) {
    auto [count, avg] = korf::word_stats("하나 둘 셋");
    EXPECT_EQ(count, 3u);
    EXPECT_DOUBLE_EQ(avg, (2.0 + 1.0 + 1.0) / 3.0);
    auto [zero, zavg] = korf::word_stats("   ");
    EXPECT_EQ(zero, 0u);
    EXPECT_DOUBLE_EQ(zavg, 0.0);
}

TEST(RuleFilter, KoreanWordMajorityRule) {
    EXPECT_TRUE(korf::is_korean_word("한국어"));
    EXPECT_FALSE(korf::is_korean_word("한국어123"));  // 3 of 6, not a majority
    EXPECT_FALSE(korf::is_korean_word("hello"));
    EXPECT_FALSE(korf::is_korean_word("한1a2"));  // 1 of 4
    EXPECT_TRUE(korf::is_korean_word("한국어를,"));  // 4 of 5
}

TEST(RuleFilter, KoreanWordExactMajorityBoundary) {
    // exactly half Hangul is not a majority
    EXPECT_FALSE(korf::is_korean_word("한국ab"));
    EXPECT_TRUE(korf::is_korean_word("한국어ab"));
}

TEST(RuleFilter, KoreanRatio) {
    EXPECT_DOUBLE_EQ(korf::korean_ratio("한국어 텍스트 test english"), 0.5);
    EXPECT_DOUBLE_EQ(korf::korean_ratio(""), 0.0);
}

TEST(RuleFilter, TopNgramRatio) {
    // "a b c d e a b c d e a b c d e" : 5-gram "a b c d e" occurs at 0,5,10 -> 3 of 11
    EXPECT_DOUBLE_EQ(korf::top_ngram_ratio("a b c d e a b c d e a b c d e", 5), 3.0 / 11.0);
    EXPECT_DOUBLE_EQ(korf::top_ngram_ratio("a b c d", 5), 0.0);
    EXPECT_DOUBLE_EQ(korf::top_ngram_ratio("a b c d e", 5), 1.0);
}

TEST(RuleFilter, CleanDocPasses) {
    std::mt19937_64 rng(3);
    auto d = testutil::doc("clean", testutil::random_korean_sentence(rng, 30));
    auto v = korf::apply_filters(d, {});
    EXPECT_TRUE(v.keep);
    EXPECT_FALSE(v.failed_rule.has_value());
    EXPECT_EQ(v.measurements.at("word_count"), 30.0);
}

TEST(RuleFilter, FirstFailingRuleInFixedOrder) {
    korf::FilterConfig cfg;
    // 5 identical English words, terminated: fails word_count, korean_ratio and
    // ngram thresholds; word_count must win because it runs first.
    auto d = testutil::doc("x", "word word word word word.");
    auto v = korf::apply_filters(d, cfg);
    EXPECT_FALSE(v.keep);
    EXPECT_EQ(*v.failed_rule, korf::FilterRule::word_count);
}

TEST(RuleFilter, AvgWordLenBeforeKoreanRatio) {
    std::mt19937_64 rng(5);
    // 20 single-letter ASCII words: avg len 1 (<2) and Korean ratio 0.
    std::string text;
    for (int i = 0; i < 20; ++i) {
        if (i) text.push_back(' ');
        text.push_back(static_cast<char>('a' + (rng() % 26)));
    }
    text.push_back('.');
    auto v = korf::apply_filters(testutil::doc("x", text), {});
    EXPECT_FALSE(v.keep);
    EXPECT_EQ(*v.failed_rule, korf::FilterRule::avg_word_len);
}

TEST(RuleFilter, NgramRepeatCaught) {
    std::mt19937_64 rng(6);
    std::string phrase;
    for (int i = 0; i < 5; ++i) {
        if (i) phrase.push_back(' ');
        phrase += testutil::random_korean_word(rng, 2, 3);
    }
    std::string text;
    for (int rep = 0; rep < 6; ++rep) {
        if (rep) text.push_back(' ');
        text += phrase;
    }
    text.push_back('.');
    auto v = korf::apply_filters(testutil::doc("x", text), {});
    EXPECT_FALSE(v.keep);
    EXPECT_EQ(*v.failed_rule, korf::FilterRule::ngram_repeat);
    EXPECT_GT(v.measurements.at("ngram_repeat"), 0.15);
}

TEST(RuleFilter, RulesRunOnStrippedText) {
    std::mt19937_64 rng(8);
    // Enough words overall, but every line is unterminated: stripped text is
    // empty, so word_count fails.
    std::string text;
    for (int l = 0; l < 5; ++l) {
        if (l) text.push_back('\n');
        for (int w = 0; w < 10; ++w) {
            if (w) text.push_back(' ');
            text += testutil::random_korean_word(rng);
        }
    }
    auto v = korf::apply_filters(testutil::doc("x", text), {});
    EXPECT_FALSE(v.keep);
    EXPECT_EQ(*v.failed_rule, korf::FilterRule::word_count);
    EXPECT_EQ(v.measurements.at("word_count"), 0.0);
}

TEST(RuleFilter, DefaultThresholds) {
    korf::FilterConfig cfg;
    EXPECT_EQ(cfg.min_words, 10u);
    EXPECT_EQ(cfg.max_words, 10'000'000u);
    EXPECT_DOUBLE_EQ(cfg.min_avg_word_len, 2.0);
    EXPECT_DOUBLE_EQ(cfg.max_avg_word_len, 10.0);
    EXPECT_DOUBLE_EQ(cfg.min_korean_ratio, 0.80);
    EXPECT_DOUBLE_EQ(cfg.max_top_ngram_ratio, 0.15);
    EXPECT_EQ(cfg.ngram_n, 5u);
}

}  // namespace
