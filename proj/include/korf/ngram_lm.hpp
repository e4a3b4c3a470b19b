#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "korf/document.hpp"
#include "korf/unicode.hpp"

namespace korf {

// Interpolated modified Kneser-Ney n-gram model over whitespace tokens with
// <s>/</s> sentence padding per line. Probabilities are stored ARPA-style:
// every observed gram carries an interpolated log10 probability, every
// observed context a log10 backoff weight.

constexpr uint32_t kUnkId = 0;
constexpr uint32_t kBosId = 1;
constexpr uint32_t kEosId = 2;

struct NGramEntry {
    double log10_prob = 0.0;
    double log10_backoff = 0.0;  // 0 = unity backoff
};

struct ScoredDocument {
    std::string id;
    uint64_t token_count = 0;
    double log10_prob = 0.0;
    double perplexity = 0.0;
    bool skipped = false;  // zero scoreable tokens
};

namespace lm_detail {

inline std::string gram_key(const uint32_t* ids, size_t n) {
    return std::string(reinterpret_cast<const char*>(ids), n * sizeof(uint32_t));
}

inline std::vector<uint32_t> key_to_ids(const std::string& key) {
    std::vector<uint32_t> ids(key.size() / sizeof(uint32_t));
    std::memcpy(ids.data(), key.data(), key.size());
    return ids;
}

struct Discounts {
    double d[4] = {0.0, 0.1, 0.1, 0.1};  // indexed by min(count,3)
    double of(uint64_t count) const { return d[std::min<uint64_t>(count, 3)]; }
};

// Chen-Goodman estimates from count-of-counts; falls back to a flat 0.1
// discount when the corpus is too small for the estimate to be sane.
inline Discounts estimate_discounts(const std::map<uint64_t, uint64_t>& count_of_counts) {
    auto n = [&](uint64_t c) -> double {
        auto it = count_of_counts.find(c);
        return it == count_of_counts.end() ? 0.0 : static_cast<double>(it->second);
    };
    Discounts disc;
    const double n1 = n(1), n2 = n(2), n3 = n(3), n4 = n(4);
    if (n1 > 0 && n2 > 0 && n3 > 0 && n4 > 0) {
        const double y = n1 / (n1 + 2.0 * n2);
        const double cand[3] = {1.0 - 2.0 * y * n2 / n1, 2.0 - 3.0 * y * n3 / n2,
                                3.0 - 4.0 * y * n4 / n3};
        bool ok = true;
        for (int j = 0; j < 3; ++j)
            if (!(cand[j] > 0.0) || cand[j] > static_cast<double>(j + 1)) ok = false;
        if (ok)
            for (int j = 0; j < 3; ++j) disc.d[j + 1] = cand[j];
    }
    return disc;
}

}  // namespace lm_detail

class NGramModel {
   public:
    size_t order() const { return order_; }
    size_t vocab_size() const { return vocab_.size(); }
    const std::vector<std::string>& vocab() const { return vocab_; }

    uint32_t token_id(std::string_view token) const {
        auto it = token_ids_.find(std::string(token));
        return it == token_ids_.end() ? kUnkId : it->second;
    }

    // Conditional probability with recursive backoff. `context` may be any
    // length; only its last order-1 tokens are used.
    double log10_prob(const std::vector<uint32_t>& context, uint32_t word) const {
        size_t start = context.size() > order_ - 1 ? context.size() - (order_ - 1) : 0;
        return lookup(context.data() + start, context.size() - start, word);
    }

    ScoredDocument score(const Document& doc) const {
        ScoredDocument out;
        out.id = doc.id;
        std::istringstream lines(doc.text);
        std::string line;
        while (std::getline(lines, line)) {
            auto words = split_words(line);
            if (words.empty()) continue;
            std::vector<uint32_t> seq;
            seq.push_back(kBosId);
            for (auto w : words) seq.push_back(token_id(w));
            seq.push_back(kEosId);
            for (size_t i = 1; i < seq.size(); ++i) {
                size_t start = i > order_ - 1 ? i - (order_ - 1) : 0;
                out.log10_prob += lookup(seq.data() + start, i - start, seq[i]);
                out.token_count++;
            }
        }
        if (out.token_count == 0) {
            out.skipped = true;
            return out;
        }
        out.perplexity =
            std::pow(10.0, -out.log10_prob / static_cast<double>(out.token_count));
        return out;
    }

    static NGramModel train(const std::vector<Document>& corpus, size_t order);

    void save(const std::string& path) const;
    static NGramModel load(const std::string& path);

    // Sorted table views, used by serialization and the normalization tests.
    std::vector<std::pair<std::vector<uint32_t>, NGramEntry>> sorted_table(size_t k) const {
        std::vector<std::pair<std::vector<uint32_t>, NGramEntry>> out;
        out.reserve(tables_[k - 1].size());
        for (const auto& [key, e] : tables_[k - 1])
            out.emplace_back(lm_detail::key_to_ids(key), e);
        std::sort(out.begin(), out.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        return out;
    }

   private:
    double lookup(const uint32_t* context, size_t clen, uint32_t word) const {
        // find longest stored gram context+word; otherwise back off
        std::vector<uint32_t> gram(context, context + clen);
        gram.push_back(word);
        const auto& table = tables_[gram.size() - 1];
        auto it = table.find(lm_detail::gram_key(gram.data(), gram.size()));
        if (it != table.end()) return it->second.log10_prob;
        if (clen == 0) {
            // word unseen even as unigram: treat as <unk>
            const uint32_t u = kUnkId;
            auto uit = tables_[0].find(lm_detail::gram_key(&u, 1));
            return uit->second.log10_prob;
        }
        double bo = 0.0;
        auto cit = tables_[clen - 1].find(lm_detail::gram_key(context, clen));
        if (cit != tables_[clen - 1].end()) bo = cit->second.log10_backoff;
        return bo + lookup(context + 1, clen - 1, word);
    }

    size_t order_ = 0;
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, uint32_t> token_ids_;
    std::vector<std::unordered_map<std::string, NGramEntry>> tables_;  // [k-1] -> grams of order k
};

inline NGramModel NGramModel::train(const std::vector<Document>& corpus, size_t order) {
    if (order < 1) throw std::invalid_argument("lm: order must be >= 1");

    NGramModel m;
    m.order_ = order;
    m.vocab_ = {"<unk>", "<s>", "</s>"};
    m.token_ids_ = {{"<unk>", kUnkId}, {"<s>", kBosId}, {"</s>", kEosId}};

    // Raw counts per order over padded sentences. The unigram <s> is not a
    // predicted event and is excluded.
    std::vector<std::unordered_map<std::string, uint64_t>> raw(order);
    bool any_sentence = false;
    for (const auto& doc : corpus) {
        std::istringstream lines(doc.text);
        std::string line;
        while (std::getline(lines, line)) {
            auto words = split_words(line);
            if (words.empty()) continue;
            any_sentence = true;
            std::vector<uint32_t> seq;
            seq.push_back(kBosId);
            for (auto w : words) {
                std::string tok(w);
                auto [it, inserted] =
                    m.token_ids_.emplace(tok, static_cast<uint32_t>(m.vocab_.size()));
                if (inserted) m.vocab_.push_back(tok);
                seq.push_back(it->second);
            }
            seq.push_back(kEosId);
            for (size_t k = 1; k <= order; ++k) {
                for (size_t i = 0; i + k <= seq.size(); ++i) {
                    if (k == 1 && seq[i] == kBosId) continue;
                    raw[k - 1][lm_detail::gram_key(seq.data() + i, k)]++;
                }
            }
        }
    }
    if (!any_sentence) throw std::runtime_error("lm: empty corpus");

    // Adjusted counts: highest order keeps raw counts; lower orders use
    // continuation counts except for <s>-initial grams, which cannot be
    // extended to the left.
    std::vector<std::unordered_map<std::string, uint64_t>> adj(order);
    adj[order - 1] = raw[order - 1];
    for (size_t k = order; k-- > 1;) {  // k = order-1 .. 1
        auto& out = adj[k - 1];
        for (const auto& [key, count] : raw[k - 1]) {
            auto ids = lm_detail::key_to_ids(key);
            if (ids.front() == kBosId) out[key] = count;
        }
        // each distinct (k+1)-gram v.g contributes one predecessor type to g
        for (const auto& [key, count] : raw[k]) {
            auto ids = lm_detail::key_to_ids(key);
            if (ids[1] == kBosId) continue;  // suffix would start with <s>; unreachable by construction
            out[lm_detail::gram_key(ids.data() + 1, k)]++;
        }
    }

    // Discounts per order from count-of-counts of adjusted counts.
    std::vector<lm_detail::Discounts> disc(order);
    for (size_t k = 1; k <= order; ++k) {
        std::map<uint64_t, uint64_t> coc;
        for (const auto& [key, c] : adj[k - 1]) coc[c]++;
        disc[k - 1] = lm_detail::estimate_discounts(coc);
    }

    m.tables_.assign(order, {});

    // Unigrams: discounted relative adjusted counts; <unk> takes the whole
    // leftover mass so the distribution sums to one exactly.
    {
        double total = 0.0;
        for (const auto& [key, c] : adj[0]) total += static_cast<double>(c);
        double leftover = 0.0;
        for (const auto& [key, c] : adj[0]) {
            double d = disc[0].of(c);
            double p = (static_cast<double>(c) - d) / total;
            leftover += d / total;
            m.tables_[0][key] = {std::log10(p), 0.0};
        }
        const uint32_t u = kUnkId;
        m.tables_[0][lm_detail::gram_key(&u, 1)] = {std::log10(leftover), 0.0};
        // <s> carries no probability but may need a backoff slot; created below.
    }

    // Higher orders, bottom-up.
    for (size_t k = 2; k <= order; ++k) {
        // group successors by context
        std::unordered_map<std::string, std::vector<std::pair<uint32_t, uint64_t>>> by_context;
        for (const auto& [key, c] : adj[k - 1]) {
            auto ids = lm_detail::key_to_ids(key);
            by_context[lm_detail::gram_key(ids.data(), k - 1)].emplace_back(ids.back(), c);
        }
        for (const auto& [ctx_key, successors] : by_context) {
            double total = 0.0;
            double gamma_num = 0.0;
            for (const auto& [w, c] : successors) {
                total += static_cast<double>(c);
                gamma_num += disc[k - 1].of(c);
            }
            const double gamma = gamma_num / total;
            auto ctx_ids = lm_detail::key_to_ids(ctx_key);
            for (const auto& [w, c] : successors) {
                std::vector<uint32_t> gram = ctx_ids;
                gram.push_back(w);
                // lower-order interpolated probability of the suffix gram
                std::string low_key = lm_detail::gram_key(gram.data() + 1, k - 1);
                auto low_it = m.tables_[k - 2].find(low_key);
                double p_low = std::pow(10.0, low_it->second.log10_prob);
                double p = (static_cast<double>(c) - disc[k - 1].of(c)) / total + gamma * p_low;
                m.tables_[k - 1][lm_detail::gram_key(gram.data(), gram.size())] = {std::log10(p),
                                                                                  0.0};
            }
            // store the backoff weight on the context gram
            auto& ctx_table = m.tables_[k - 2];
            auto cit = ctx_table.find(ctx_key);
            if (cit == ctx_table.end()) {
                // context observed only as a prefix (e.g. bare <s>)
                ctx_table[ctx_key] = {0.0, std::log10(gamma)};
                if (ctx_ids.size() == 1 && ctx_ids[0] == kBosId) {
                    // <s> is never predicted; park prob at -inf sentinel
                    ctx_table[ctx_key].log10_prob = -99.0;
                }
            } else {
                cit->second.log10_backoff = std::log10(gamma);
            }
        }
    }
    return m;
}

// --- serialization ------------------------------------------------------
// Text header followed by little-endian binary tables; reload is bit-exact.

namespace lm_detail {

inline void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

inline uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

inline uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

inline double get_f64(std::istream& in) {
    uint64_t bits = get_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace lm_detail

inline void NGramModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("lm: cannot write model file: " + path);
    out << "KNLM 1 little-endian\n";
    out << "order " << order_ << "\n";
    out << "vocab " << vocab_.size() << "\n";
    for (size_t k = 1; k <= order_; ++k) out << "ngram " << k << " " << tables_[k - 1].size() << "\n";
    out << "data\n";
    for (const auto& tok : vocab_) {
        lm_detail::put_u32(out, static_cast<uint32_t>(tok.size()));
        out.write(tok.data(), static_cast<std::streamsize>(tok.size()));
    }
    for (size_t k = 1; k <= order_; ++k) {
        for (const auto& [ids, e] : sorted_table(k)) {
            for (uint32_t id : ids) lm_detail::put_u32(out, id);
            lm_detail::put_f64(out, e.log10_prob);
            lm_detail::put_f64(out, e.log10_backoff);
        }
    }
    if (!out) throw std::runtime_error("lm: write failed: " + path);
}

inline NGramModel NGramModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("lm: cannot open model file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "KNLM 1 little-endian")
        throw std::runtime_error("lm: bad model header: " + path);
    NGramModel m;
    size_t vocab_size = 0;
    std::vector<uint64_t> gram_counts;
    while (std::getline(in, line) && line != "data") {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "order") {
            ls >> m.order_;
        } else if (key == "vocab") {
            ls >> vocab_size;
        } else if (key == "ngram") {
            size_t k;
            uint64_t c;
            ls >> k >> c;
            gram_counts.push_back(c);
        }
    }
    if (m.order_ == 0 || gram_counts.size() != m.order_)
        throw std::runtime_error("lm: malformed model header: " + path);
    m.vocab_.reserve(vocab_size);
    for (size_t i = 0; i < vocab_size; ++i) {
        uint32_t len = lm_detail::get_u32(in);
        std::string tok(len, '\0');
        in.read(tok.data(), len);
        m.token_ids_[tok] = static_cast<uint32_t>(i);
        m.vocab_.push_back(std::move(tok));
    }
    m.tables_.assign(m.order_, {});
    for (size_t k = 1; k <= m.order_; ++k) {
        for (uint64_t i = 0; i < gram_counts[k - 1]; ++i) {
            std::vector<uint32_t> ids(k);
            for (size_t j = 0; j < k; ++j) ids[j] = lm_detail::get_u32(in);
            NGramEntry e;
            e.log10_prob = lm_detail::get_f64(in);
            e.log10_backoff = lm_detail::get_f64(in);
            m.tables_[k - 1][lm_detail::gram_key(ids.data(), k)] = e;
        }
    }
    if (!in) throw std::runtime_error("lm: truncated model file: " + path);
    return m;
}

// --- budget selection ---------------------------------------------------

// Ascending perplexity, ties by id; documents are taken until the next one
// would push the cumulative token count past the budget.
inline std::vector<std::string> select_by_budget(std::vector<ScoredDocument> scored,
                                                 uint64_t token_budget) {
    std::sort(scored.begin(), scored.end(), [](const ScoredDocument& a, const ScoredDocument& b) {
        if (a.perplexity != b.perplexity) return a.perplexity < b.perplexity;
        return a.id < b.id;
    });
    std::vector<std::string> kept;
    uint64_t used = 0;
    for (const auto& s : scored) {
        if (s.skipped) continue;
        if (used + s.token_count > token_budget) break;
        used += s.token_count;
        kept.push_back(s.id);
    }
    return kept;
}

}  // namespace korf
