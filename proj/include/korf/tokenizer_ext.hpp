#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "korf/document.hpp"
#include "korf/unicode.hpp"

namespace korf {

// Base tokenizer seen through an injected callback; ids are dense in
// [0, tokens.size()).
struct BaseVocab {
    std::vector<std::string> tokens;  // id -> byte sequence
    std::function<std::vector<uint32_t>(std::string_view)> segment;
};

struct NewToken {
    std::string surface;
    double log_prob = 0.0;                     // natural log, < 0
    std::vector<uint32_t> base_decomposition;  // base ids re-joining to surface
};

struct MergeReport {
    std::vector<std::string> skipped_duplicates;
    std::vector<std::string> segmenter_failures;
};

struct ExtendedVocab {
    BaseVocab base;
    std::vector<double> base_log_probs;  // natural log, one per base id
    std::vector<NewToken> new_tokens;    // id = base size + index
    std::unordered_set<char32_t> new_alphabet;
    MergeReport report;

    size_t base_size() const { return base.tokens.size(); }
    size_t total_size() const { return base.tokens.size() + new_tokens.size(); }
};

// ---- new-vocabulary construction (unigram EM over Hangul syllables) ----
//
// Candidate tokens are contiguous runs of whole Hangul syllables; every
// observed syllable is always retained so any input stays segmentable.

namespace tok_detail {

constexpr size_t kMaxTokenSyllables = 8;
constexpr double kEmFloor = 1e-10;

struct LatticeToken {
    std::u32string surface;
    double prob = 0.0;
    double expected = 0.0;
    bool is_single = false;
};

// Maximal runs of Hangul syllables with multiplicities.
inline std::map<std::u32string, uint64_t> hangul_words(const std::vector<Document>& corpus) {
    std::map<std::u32string, uint64_t> words;
    for (const auto& doc : corpus) {
        std::u32string run;
        size_t pos = 0;
        while (pos <= doc.text.size()) {
            char32_t cp = 0;
            bool at_end = pos == doc.text.size();
            if (!at_end) cp = decode_utf8(doc.text, pos);
            if (!at_end && is_hangul_syllable(cp)) {
                run.push_back(cp);
            } else {
                if (!run.empty()) {
                    words[run]++;
                    run.clear();
                }
                if (at_end) break;
            }
        }
    }
    return words;
}

}  // namespace tok_detail

// Trains a unigram vocabulary of `target_size` entries by EM with pruning.
// Returned log probabilities are natural logs and sum to one in probability.
inline std::vector<std::pair<std::string, double>> build_new_vocab(
    const std::vector<Document>& corpus, size_t target_size) {
    using tok_detail::kEmFloor;
    using tok_detail::kMaxTokenSyllables;

    auto words = tok_detail::hangul_words(corpus);
    if (words.empty()) throw std::runtime_error("tok-build: no Hangul text in corpus");

    std::set<char32_t> syllables;
    for (const auto& [w, c] : words)
        for (char32_t cp : w) syllables.insert(cp);
    if (target_size < syllables.size())
        throw std::runtime_error("tok-build: target_size " + std::to_string(target_size) +
                                 " below syllable inventory; minimum is " +
                                 std::to_string(syllables.size()));

    // Seed: singles plus substring candidates weighted by word frequency.
    std::map<std::u32string, double> counts;
    for (char32_t cp : syllables) counts[std::u32string(1, cp)] = 0.0;
    for (const auto& [w, c] : words) {
        for (size_t i = 0; i < w.size(); ++i) {
            for (size_t len = 1; len <= kMaxTokenSyllables && i + len <= w.size(); ++len) {
                counts[w.substr(i, len)] += static_cast<double>(c);
            }
        }
    }

    std::vector<tok_detail::LatticeToken> vocab;
    double total = 0.0;
    for (const auto& [surface, c] : counts) {
        tok_detail::LatticeToken t;
        t.surface = surface;
        t.prob = c + 1.0;
        t.is_single = surface.size() == 1;
        total += t.prob;
        vocab.push_back(std::move(t));
    }
    for (auto& t : vocab) t.prob /= total;

    auto em_round = [&]() {
        std::unordered_map<std::u32string, size_t> index;
        for (size_t i = 0; i < vocab.size(); ++i) index[vocab[i].surface] = i;
        for (auto& t : vocab) t.expected = 0.0;
        for (const auto& [w, wcount] : words) {
            const size_t L = w.size();
            // forward/backward sums over all segmentations
            std::vector<double> fwd(L + 1, 0.0), bwd(L + 1, 0.0);
            fwd[0] = 1.0;
            bwd[L] = 1.0;
            auto arcs_from = [&](size_t i) {
                std::vector<std::pair<size_t, size_t>> arcs;  // (end, vocab index)
                for (size_t len = 1; len <= kMaxTokenSyllables && i + len <= L; ++len) {
                    auto it = index.find(w.substr(i, len));
                    if (it != index.end()) arcs.emplace_back(i + len, it->second);
                }
                return arcs;
            };
            for (size_t i = 0; i < L; ++i) {
                if (fwd[i] == 0.0) continue;
                for (auto [j, t] : arcs_from(i)) fwd[j] += fwd[i] * vocab[t].prob;
            }
            for (size_t i = L; i-- > 0;) {
                for (auto [j, t] : arcs_from(i)) bwd[i] += vocab[t].prob * bwd[j];
            }
            const double z = fwd[L];
            if (z <= 0.0) continue;  // unreachable: singles cover everything
            for (size_t i = 0; i < L; ++i) {
                if (fwd[i] == 0.0) continue;
                for (auto [j, t] : arcs_from(i)) {
                    vocab[t].expected +=
                        static_cast<double>(wcount) * fwd[i] * vocab[t].prob * bwd[j] / z;
                }
            }
        }
        double sum = 0.0;
        for (auto& t : vocab) sum += t.expected + kEmFloor;
        for (auto& t : vocab) t.prob = (t.expected + kEmFloor) / sum;
    };

    // EM, then prune multi-syllable tokens down to the target, then polish.
    for (int iter = 0; iter < 4; ++iter) em_round();
    if (vocab.size() > target_size) {
        const size_t multi_budget = target_size - syllables.size();
        std::vector<size_t> multis;
        for (size_t i = 0; i < vocab.size(); ++i)
            if (!vocab[i].is_single) multis.push_back(i);
        std::sort(multis.begin(), multis.end(), [&](size_t a, size_t b) {
            if (vocab[a].prob != vocab[b].prob) return vocab[a].prob > vocab[b].prob;
            return vocab[a].surface < vocab[b].surface;  // deterministic ties
        });
        std::unordered_set<size_t> keep(multis.begin(),
                                        multis.begin() + std::min(multi_budget, multis.size()));
        std::vector<tok_detail::LatticeToken> pruned;
        for (size_t i = 0; i < vocab.size(); ++i)
            if (vocab[i].is_single || keep.count(i)) pruned.push_back(vocab[i]);
        vocab.swap(pruned);
    }
    for (int iter = 0; iter < 2; ++iter) em_round();

    std::vector<std::pair<std::string, double>> out;
    out.reserve(vocab.size());
    for (const auto& t : vocab) out.emplace_back(to_utf8(t.surface), std::log(t.prob));
    std::sort(out.begin(), out.end());
    return out;
}

// ---- vocabulary merge --------------------------------------------------

// Base token probabilities are add-one-smoothed relative frequencies under
// the base segmenter; base and new distributions then split the total mass
// proportionally to their token counts on the reference corpus.
inline ExtendedVocab merge_vocab(BaseVocab base,
                                 const std::vector<std::pair<std::string, double>>& new_vocab,
                                 const std::vector<Document>& base_corpus) {
    ExtendedVocab ext;
    ext.base = std::move(base);
    const size_t vb = ext.base.tokens.size();

    std::vector<uint64_t> base_counts(vb, 0);
    uint64_t base_total = 0;
    for (const auto& doc : base_corpus) {
        for (uint32_t id : ext.base.segment(doc.text)) {
            if (id < vb) base_counts[id]++;
            base_total++;
        }
    }

    std::unordered_set<std::string> base_surfaces(ext.base.tokens.begin(), ext.base.tokens.end());
    for (const auto& [surface, log_prob] : new_vocab) {
        if (base_surfaces.count(surface)) {
            ext.report.skipped_duplicates.push_back(surface);
            continue;
        }
        NewToken t;
        t.surface = surface;
        t.log_prob = log_prob;
        t.base_decomposition = ext.base.segment(surface);
        std::string rejoined;
        for (uint32_t id : t.base_decomposition) rejoined += ext.base.tokens.at(id);
        if (t.base_decomposition.empty() || rejoined != surface) {
            ext.report.segmenter_failures.push_back(surface);
            continue;
        }
        ext.new_tokens.push_back(std::move(t));
    }

    for (const auto& t : ext.new_tokens) {
        size_t pos = 0;
        while (pos < t.surface.size()) ext.new_alphabet.insert(decode_utf8(t.surface, pos));
    }

    // Count new-side tokens on the reference corpus: spans of new-alphabet
    // characters segmented with the trained unigram probabilities.
    uint64_t new_total = 0;
    if (!ext.new_tokens.empty()) {
        std::unordered_map<std::string, double> new_probs;
        for (const auto& t : ext.new_tokens) new_probs[t.surface] = t.log_prob;
        for (const auto& doc : base_corpus) {
            size_t pos = 0;
            std::string span;
            auto flush = [&]() {
                if (span.empty()) return;
                // Viterbi token count over the span using only new tokens;
                // characters are all in the new alphabet so singles cover it.
                std::u32string u = to_u32(span);
                const size_t L = u.size();
                std::vector<double> best(L + 1, -1e300);
                std::vector<uint64_t> toks(L + 1, 0);
                best[0] = 0.0;
                for (size_t i = 0; i < L; ++i) {
                    if (best[i] == -1e300) continue;
                    for (size_t len = 1; len <= tok_detail::kMaxTokenSyllables && i + len <= L;
                         ++len) {
                        auto it = new_probs.find(to_utf8(u.substr(i, len)));
                        if (it == new_probs.end()) continue;
                        double cand = best[i] + it->second;
                        if (cand > best[i + len]) {
                            best[i + len] = cand;
                            toks[i + len] = toks[i] + 1;
                        }
                    }
                }
                if (best[L] > -1e300) new_total += toks[L];
                span.clear();
            };
            while (pos < doc.text.size()) {
                size_t prev = pos;
                char32_t cp = decode_utf8(doc.text, pos);
                if (ext.new_alphabet.count(cp))
                    span.append(doc.text, prev, pos - prev);
                else
                    flush();
            }
            flush();
        }
    }

    const double nb = static_cast<double>(std::max<uint64_t>(base_total, 1));
    const double nn = static_cast<double>(std::max<uint64_t>(new_total, 1));
    const double log_w_base = std::log(nb / (nb + nn));
    const double log_w_new = std::log(nn / (nb + nn));

    ext.base_log_probs.resize(vb);
    const double denom = static_cast<double>(base_total) + static_cast<double>(vb);
    for (size_t i = 0; i < vb; ++i)
        ext.base_log_probs[i] =
            log_w_base + std::log((static_cast<double>(base_counts[i]) + 1.0) / denom);
    for (auto& t : ext.new_tokens) t.log_prob += log_w_new;
    return ext;
}

// ---- encode / decode ---------------------------------------------------

namespace tok_detail {

struct Arc {
    size_t end;      // byte position after the token
    uint32_t id;     // extended id
    double log_prob;
};

}  // namespace tok_detail

// Maximum-log-probability segmentation. Inputs with no new-alphabet
// characters delegate to the base segmenter verbatim, which keeps the
// extended tokenizer bit-identical to the base one on such text.
inline std::vector<uint32_t> encode(const ExtendedVocab& vocab, std::string_view text) {
    if (text.empty()) return {};
    bool touches_new = false;
    {
        size_t pos = 0;
        while (pos < text.size()) {
            if (vocab.new_alphabet.count(decode_utf8(text, pos))) {
                touches_new = true;
                break;
            }
        }
    }
    if (!touches_new) return vocab.base.segment(text);

    const size_t vb = vocab.base_size();
    // index token surfaces by first byte
    std::unordered_map<unsigned char, std::vector<uint32_t>> by_first;
    for (uint32_t id = 0; id < vb; ++id) {
        const std::string& s = vocab.base.tokens[id];
        if (!s.empty()) by_first[static_cast<unsigned char>(s[0])].push_back(id);
    }
    for (uint32_t i = 0; i < vocab.new_tokens.size(); ++i) {
        const std::string& s = vocab.new_tokens[i].surface;
        by_first[static_cast<unsigned char>(s[0])].push_back(static_cast<uint32_t>(vb + i));
    }

    const size_t B = text.size();
    constexpr double kNoPath = -1e300;
    std::vector<double> best(B + 1, kNoPath);
    std::vector<uint64_t> ntok(B + 1, 0);
    std::vector<uint32_t> back_id(B + 1, 0);
    std::vector<size_t> back_pos(B + 1, 0);
    best[0] = 0.0;

    auto surface_of = [&](uint32_t id) -> const std::string& {
        return id < vb ? vocab.base.tokens[id] : vocab.new_tokens[id - vb].surface;
    };
    auto log_prob_of = [&](uint32_t id) {
        return id < vb ? vocab.base_log_probs[id] : vocab.new_tokens[id - vb].log_prob;
    };
    auto path_lengths = [&](size_t end, uint32_t last_id, size_t last_pos) {
        std::vector<size_t> lens;
        lens.push_back(surface_of(last_id).size());
        size_t p = last_pos;
        while (p > 0) {
            lens.push_back(surface_of(back_id[p]).size());
            p = back_pos[p];
        }
        std::reverse(lens.begin(), lens.end());
        (void)end;
        return lens;
    };

    for (size_t i = 0; i < B; ++i) {
        if (best[i] == kNoPath) continue;
        auto it = by_first.find(static_cast<unsigned char>(text[i]));
        if (it == by_first.end()) continue;
        for (uint32_t id : it->second) {
            const std::string& s = surface_of(id);
            if (s.size() > B - i || text.compare(i, s.size(), s) != 0) continue;
            const size_t j = i + s.size();
            const double cand = best[i] + log_prob_of(id);
            const uint64_t cand_toks = ntok[i] + 1;
            bool take = false;
            if (cand > best[j]) {
                take = true;
            } else if (cand == best[j]) {
                if (cand_toks < ntok[j]) {
                    take = true;
                } else if (cand_toks == ntok[j] && best[j] != kNoPath) {
                    // leftmost-longest: lexicographically greater length sequence
                    take = path_lengths(j, id, i) > path_lengths(j, back_id[j], back_pos[j]);
                }
            }
            if (take) {
                best[j] = cand;
                ntok[j] = cand_toks;
                back_id[j] = id;
                back_pos[j] = i;
            }
        }
    }
    if (best[B] == kNoPath)
        throw std::runtime_error("encode: unsegmentable input (base vocab lacks byte coverage)");

    std::vector<uint32_t> out;
    for (size_t p = B; p > 0; p = back_pos[p]) out.push_back(back_id[p]);
    std::reverse(out.begin(), out.end());
    return out;
}

inline std::string decode(const ExtendedVocab& vocab, const std::vector<uint32_t>& ids) {
    std::string out;
    const size_t vb = vocab.base_size();
    for (uint32_t id : ids) {
        if (id < vb)
            out += vocab.base.tokens[id];
        else if (id - vb < vocab.new_tokens.size())
            out += vocab.new_tokens[id - vb].surface;
        else
            throw std::runtime_error("decode: unknown token id " + std::to_string(id));
    }
    return out;
}

// ---- serialization -----------------------------------------------------

inline void save_new_vocab(const std::vector<std::pair<std::string, double>>& vocab,
                           const std::string& path) {
    nlohmann::json j;
    j["type"] = "unigram";
    auto& entries = j["entries"] = nlohmann::json::array();
    for (const auto& [surface, log_prob] : vocab)
        entries.push_back({{"surface", surface}, {"log_prob", log_prob}});
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write vocab file: " + path);
    out << j.dump(2) << '\n';
}

inline std::vector<std::pair<std::string, double>> load_new_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocab file: " + path);
    nlohmann::json j;
    in >> j;
    std::vector<std::pair<std::string, double>> vocab;
    for (const auto& e : j["entries"])
        vocab.emplace_back(e["surface"].get<std::string>(), e["log_prob"].get<double>());
    return vocab;
}

// The extended vocab file records where the base scores came from so the
// choice is auditable later.
inline void save_extended_vocab(const ExtendedVocab& ext, const std::string& path) {
    nlohmann::json j;
    j["type"] = "extended";
    j["base_score_source"] = "relative frequency under base segmenter, add-one smoothed";
    j["base_size"] = ext.base_size();
    j["base_log_probs"] = ext.base_log_probs;
    auto& entries = j["new_tokens"] = nlohmann::json::array();
    for (size_t i = 0; i < ext.new_tokens.size(); ++i) {
        const auto& t = ext.new_tokens[i];
        entries.push_back({{"surface", t.surface},
                           {"id", ext.base_size() + i},
                           {"log_prob", t.log_prob},
                           {"decomposition", t.base_decomposition}});
    }
    j["skipped_duplicates"] = ext.report.skipped_duplicates;
    j["segmenter_failures"] = ext.report.segmenter_failures;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write vocab file: " + path);
    out << j.dump(2) << '\n';
}

// Rebuilds an ExtendedVocab around a freshly loaded base. The base must be
// the same one used when the file was written.
inline ExtendedVocab load_extended_vocab(BaseVocab base, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocab file: " + path);
    nlohmann::json j;
    in >> j;
    ExtendedVocab ext;
    ext.base = std::move(base);
    if (j.value("base_size", size_t{0}) != ext.base.tokens.size())
        throw std::runtime_error("extended vocab was built against a different base vocabulary");
    ext.base_log_probs = j["base_log_probs"].get<std::vector<double>>();
    for (const auto& e : j["new_tokens"]) {
        NewToken t;
        t.surface = e["surface"].get<std::string>();
        t.log_prob = e["log_prob"].get<double>();
        t.base_decomposition = e["decomposition"].get<std::vector<uint32_t>>();
        ext.new_tokens.push_back(std::move(t));
    }
    for (const auto& t : ext.new_tokens) {
        size_t pos = 0;
        while (pos < t.surface.size()) ext.new_alphabet.insert(decode_utf8(t.surface, pos));
    }
    return ext;
}

}  // namespace korf
