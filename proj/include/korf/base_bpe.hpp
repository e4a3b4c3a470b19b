#pragma once

#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace korf {

// Self-contained byte-level BPE used as the injectable base tokenizer. The
// first 256 ids are single bytes, so any input is segmentable; merges extend
// the vocabulary in rank order.
class BpeVocab {
   public:
    static BpeVocab byte_fallback() {
        BpeVocab v;
        v.tokens_.reserve(256);
        for (int b = 0; b < 256; ++b) {
            std::string t(1, static_cast<char>(b));
            v.token_ids_[t] = static_cast<uint32_t>(v.tokens_.size());
            v.tokens_.push_back(t);
        }
        return v;
    }

    // Registers the merge (a, b) -> a+b at the next rank.
    uint32_t add_merge(const std::string& a, const std::string& b) {
        uint32_t ia = require_token(a);
        uint32_t ib = require_token(b);
        std::string joined = a + b;
        auto it = token_ids_.find(joined);
        uint32_t id;
        if (it == token_ids_.end()) {
            id = static_cast<uint32_t>(tokens_.size());
            token_ids_[joined] = id;
            tokens_.push_back(joined);
        } else {
            id = it->second;
        }
        merges_.push_back({ia, ib, id});
        merge_rank_[pair_key(ia, ib)] = static_cast<uint32_t>(merges_.size() - 1);
        return id;
    }

    size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::string& token(uint32_t id) const { return tokens_.at(id); }

    uint32_t find_token(std::string_view surface) const {
        auto it = token_ids_.find(std::string(surface));
        return it == token_ids_.end() ? kNoToken : it->second;
    }
    static constexpr uint32_t kNoToken = std::numeric_limits<uint32_t>::max();

    // Greedy lowest-rank merging, the classic BPE procedure.
    std::vector<uint32_t> segment(std::string_view text) const {
        std::vector<uint32_t> seq;
        seq.reserve(text.size());
        for (unsigned char b : text) seq.push_back(b);
        while (seq.size() > 1) {
            uint32_t best_rank = std::numeric_limits<uint32_t>::max();
            size_t best_pos = 0;
            for (size_t i = 0; i + 1 < seq.size(); ++i) {
                auto it = merge_rank_.find(pair_key(seq[i], seq[i + 1]));
                if (it != merge_rank_.end() && it->second < best_rank) {
                    best_rank = it->second;
                    best_pos = i;
                }
            }
            if (best_rank == std::numeric_limits<uint32_t>::max()) break;
            const auto& m = merges_[best_rank];
            // apply this merge at every site, left to right
            std::vector<uint32_t> next;
            next.reserve(seq.size());
            for (size_t i = 0; i < seq.size();) {
                if (i + 1 < seq.size() && seq[i] == m.left && seq[i + 1] == m.right) {
                    next.push_back(m.result);
                    i += 2;
                } else {
                    next.push_back(seq[i]);
                    ++i;
                }
            }
            seq.swap(next);
            (void)best_pos;
        }
        return seq;
    }

    std::string decode(const std::vector<uint32_t>& ids) const {
        std::string out;
        for (uint32_t id : ids) out += tokens_.at(id);
        return out;
    }

    void save(const std::string& path) const {
        nlohmann::json j;
        j["type"] = "bpe";
        auto& toks = j["tokens"] = nlohmann::json::array();
        for (const auto& t : tokens_) {
            // byte strings may not be valid UTF-8; store as byte arrays
            toks.push_back(nlohmann::json::binary({t.begin(), t.end()}));
        }
        auto& ms = j["merges"] = nlohmann::json::array();
        for (const auto& m : merges_) ms.push_back({m.left, m.right, m.result});
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("bpe: cannot write " + path);
        auto bytes = nlohmann::json::to_cbor(j);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }

    static BpeVocab load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("bpe: cannot open " + path);
        std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
        nlohmann::json j = nlohmann::json::from_cbor(bytes);
        BpeVocab v;
        for (const auto& t : j["tokens"]) {
            const auto& bin = t.get_binary();
            std::string tok(bin.begin(), bin.end());
            v.token_ids_[tok] = static_cast<uint32_t>(v.tokens_.size());
            v.tokens_.push_back(std::move(tok));
        }
        for (const auto& m : j["merges"]) {
            Merge merge{m[0].get<uint32_t>(), m[1].get<uint32_t>(), m[2].get<uint32_t>()};
            v.merges_.push_back(merge);
            v.merge_rank_[pair_key(merge.left, merge.right)] =
                static_cast<uint32_t>(v.merges_.size() - 1);
        }
        return v;
    }

   private:
    struct Merge {
        uint32_t left, right, result;
    };

    static uint64_t pair_key(uint32_t a, uint32_t b) {
        return (static_cast<uint64_t>(a) << 32) | b;
    }

    uint32_t require_token(const std::string& t) const {
        auto it = token_ids_.find(t);
        if (it == token_ids_.end()) throw std::runtime_error("bpe: unknown merge operand: " + t);
        return it->second;
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, uint32_t> token_ids_;
    std::vector<Merge> merges_;
    std::unordered_map<uint64_t, uint32_t> merge_rank_;
};

}  // namespace korf
