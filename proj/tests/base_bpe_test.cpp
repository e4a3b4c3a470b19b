#include "korf/base_bpe.hpp"

#include <gtest/gtest.h>

#include <random>

#include "util.hpp"

namespace {

TEST(BaseBpe, ByteFallbackCoversEverything) {
    auto v = korf::BpeVocab::byte_fallback();
    EXPECT_EQ(v.size(), 256u);
    std::string all;
    for (int b = 0; b < 256; ++b) all.push_back(static_cast<char>(b));
    auto seq = v.segment(all);
    ASSERT_EQ(seq.size(), 256u);
    for (int b = 0; b < 256; ++b) EXPECT_EQ(seq[b], static_cast<uint32_t>(b));
    EXPECT_EQ(v.decode(seq), all);
}

TEST(BaseBpe, MergeRankPriority) {
    auto v = korf::BpeVocab::byte_fallback();
    uint32_t ab = v.add_merge("a", "b");
    uint32_t abc = v.add_merge("ab", "c");
    auto seq = v.segment("abcabc");
    ASSERT_EQ(seq.size(), 2u);
    EXPECT_EQ(seq[0], abc);
    EXPECT_EQ(seq[1], abc);
    EXPECT_EQ(v.decode(seq), "abcabc");
    EXPECT_EQ(v.find_token("ab"), ab);
    EXPECT_EQ(v.find_token("zz"), korf::BpeVocab::kNoToken);
}

TEST(BaseBpe, EarlierMergesWin) {
    auto v = korf::BpeVocab::byte_fallback();
    uint32_t bc = v.add_merge("b", "c");
    v.add_merge("a", "b");
    // "abc": merge (b,c) has lower rank, so it is applied first
    auto seq = v.segment("abc");
    ASSERT_EQ(seq.size(), 2u);
    EXPECT_EQ(seq[0], static_cast<uint32_t>('a'));
    EXPECT_EQ(seq[1], bc);
}

TEST(BaseBpe, UnknownMergeOperandFatal) {
    auto v = korf::BpeVocab::byte_fallback();
    EXPECT_THROW(v.add_merge("ab", "c"), std::runtime_error);
}

TEST(BaseBpe, SaveLoadPreservesSegmentation) {
    auto dir = testutil::temp_dir("bpe_save");
    auto v = korf::BpeVocab::byte_fallback();
    v.add_merge("t", "h");
    v.add_merge("th", "e");
    // Korean UTF-8 byte merges
    std::string ga = "\xea\xb0\x80";  // 가
    v.add_merge(ga.substr(0, 1), ga.substr(1, 1));
    v.add_merge(ga.substr(0, 2), ga.substr(2, 1));
    std::string path = dir + "/bpe.bin";
    v.save(path);
    auto back = korf::BpeVocab::load(path);
    EXPECT_EQ(back.size(), v.size());

    std::mt19937_64 rng(9);
    for (int i = 0; i < 200; ++i) {
        std::string s = "the " + testutil::random_korean_word(rng) + " theme 가가";
        EXPECT_EQ(back.segment(s), v.segment(s));
        EXPECT_EQ(back.decode(back.segment(s)), s);
    }
}

TEST(BaseBpe, SegmentDecodeIdentityOnRandomBytes) {
    auto v = korf::BpeVocab::byte_fallback();
    v.add_merge("a", "a");
    v.add_merge("aa", "aa");
    std::mt19937_64 rng(10);
    for (int i = 0; i < 500; ++i) {
        std::string s;
        size_t len = rng() % 64;
        for (size_t k = 0; k < len; ++k) s.push_back(static_cast<char>(rng() % 256));
        EXPECT_EQ(v.decode(v.segment(s)), s);
    }
}

}  // namespace
