#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "korf/document.hpp"
#include "korf/unicode.hpp"

namespace testutil {

// Deterministic Korean-like text generation for fixtures.

inline std::u32string random_syllables(std::mt19937_64& rng, size_t n, size_t inventory = 600) {
    std::uniform_int_distribution<uint32_t> pick(0, static_cast<uint32_t>(inventory - 1));
    std::u32string out;
    for (size_t i = 0; i < n; ++i) out.push_back(0xAC00 + pick(rng));
    return out;
}

inline std::string random_korean_word(std::mt19937_64& rng, size_t min_syll = 2,
                                      size_t max_syll = 4) {
    std::uniform_int_distribution<size_t> len(min_syll, max_syll);
    return korf::to_utf8(random_syllables(rng, len(rng)));
}

inline std::string random_korean_sentence(std::mt19937_64& rng, size_t words) {
    std::string out;
    for (size_t i = 0; i < words; ++i) {
        if (i) out.push_back(' ');
        out += random_korean_word(rng);
    }
    out.push_back('.');
    return out;
}

inline korf::Document doc(std::string id, std::string text,
                          korf::Source source = korf::Source::other) {
    korf::Document d;
    d.id = std::move(id);
    d.text = std::move(text);
    d.source = source;
    return d;
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string temp_dir(const std::string& tag) {
    std::string dir = ::testing::TempDir() + "korf_" + tag;
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testutil
