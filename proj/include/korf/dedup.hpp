#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "korf/document.hpp"
#include "korf/unicode.hpp"

namespace korf {

struct DedupConfig {
    size_t shingle_size = 5;  // codepoints of the normalized text
    size_t num_hashes = 128;
    size_t bands = 16;
    size_t rows_per_band = 8;
    double jaccard_threshold = 0.8;
    enum class KeepPolicy { longest, first } keep_policy = KeepPolicy::longest;
    uint64_t seed = 0x6b6f7266;

    void validate() const {
        if (bands * rows_per_band != num_hashes)
            throw std::invalid_argument("dedup: bands * rows_per_band must equal num_hashes");
        if (jaccard_threshold <= 0.0 || jaccard_threshold > 1.0)
            throw std::invalid_argument("dedup: jaccard_threshold must be in (0,1]");
    }
};

struct Cluster {
    std::string representative;
    std::vector<std::string> members;
};

struct ClusterReport {
    std::vector<Cluster> clusters;
    uint64_t removed = 0;
    double removal_fraction = 0.0;
};

using MinHashSignature = std::vector<uint64_t>;

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string normalize_for_shingles(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
    }
    return out;
}

inline std::vector<uint64_t> shingle_hashes(std::string_view normalized, size_t shingle_size) {
    std::vector<uint64_t> hashes;
    std::u32string u = to_u32(normalized);
    if (u.size() < shingle_size) return hashes;
    hashes.reserve(u.size() - shingle_size + 1);
    for (size_t i = 0; i + shingle_size <= u.size(); ++i) {
        uint64_t h = 0xcbf29ce484222325ULL;
        for (size_t j = 0; j < shingle_size; ++j) {
            h ^= static_cast<uint64_t>(u[i + j]);
            h *= 0x100000001b3ULL;
        }
        hashes.push_back(h);
    }
    std::sort(hashes.begin(), hashes.end());
    hashes.erase(std::unique(hashes.begin(), hashes.end()), hashes.end());
    return hashes;
}

struct UnionFind {
    std::vector<size_t> parent;
    explicit UnionFind(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    size_t find(size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(size_t a, size_t b) { parent[find(a)] = find(b); }
};

}  // namespace detail

// Exact Jaccard over the shingle sets of two texts. Shared with tests as the
// brute-force verification route.
inline double exact_shingle_jaccard(std::string_view a, std::string_view b, size_t shingle_size) {
    auto sa = detail::shingle_hashes(detail::normalize_for_shingles(a), shingle_size);
    auto sb = detail::shingle_hashes(detail::normalize_for_shingles(b), shingle_size);
    if (sa.empty() && sb.empty()) return 1.0;
    size_t inter = 0, i = 0, j = 0;
    while (i < sa.size() && j < sb.size()) {
        if (sa[i] == sb[j]) {
            ++inter;
            ++i;
            ++j;
        } else if (sa[i] < sb[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    size_t uni = sa.size() + sb.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Returns nullopt when the normalized text is too short to shingle; such
// documents are exempt from dedup.
inline std::optional<MinHashSignature> minhash_signature(std::string_view text,
                                                        const DedupConfig& cfg) {
    std::string norm = detail::normalize_for_shingles(text);
    auto shingles = detail::shingle_hashes(norm, cfg.shingle_size);
    if (shingles.empty()) return std::nullopt;
    MinHashSignature sig(cfg.num_hashes, std::numeric_limits<uint64_t>::max());
    for (size_t i = 0; i < cfg.num_hashes; ++i) {
        // hash_i(x) via a per-function mix key
        const uint64_t key = detail::splitmix64(cfg.seed + i);
        uint64_t best = std::numeric_limits<uint64_t>::max();
        for (uint64_t s : shingles) best = std::min(best, detail::splitmix64(s ^ key));
        sig[i] = best;
    }
    return sig;
}

inline double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
    size_t eq = 0;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] == b[i]) ++eq;
    return static_cast<double>(eq) / static_cast<double>(a.size());
}

// LSH banding -> candidate pairs -> signature-Jaccard verification ->
// union-find transitive closure. `lengths` drives keep_policy=longest.
inline ClusterReport cluster(const std::vector<std::string>& ids,
                             const std::vector<MinHashSignature>& signatures,
                             const std::vector<size_t>& lengths, const DedupConfig& cfg) {
    cfg.validate();
    const size_t n = ids.size();
    detail::UnionFind uf(n);

    for (size_t band = 0; band < cfg.bands; ++band) {
        std::unordered_map<uint64_t, std::vector<size_t>> buckets;
        for (size_t d = 0; d < n; ++d) {
            uint64_t h = detail::splitmix64(band + 1);
            for (size_t r = 0; r < cfg.rows_per_band; ++r)
                h = detail::splitmix64(h ^ signatures[d][band * cfg.rows_per_band + r]);
            buckets[h].push_back(d);
        }
        for (const auto& [key, members] : buckets) {
            if (members.size() < 2) continue;
            for (size_t i = 0; i < members.size(); ++i)
                for (size_t j = i + 1; j < members.size(); ++j) {
                    size_t a = members[i], b = members[j];
                    if (uf.find(a) == uf.find(b)) continue;
                    if (estimate_jaccard(signatures[a], signatures[b]) >= cfg.jaccard_threshold)
                        uf.unite(a, b);
                }
        }
    }

    std::map<size_t, std::vector<size_t>> groups;  // root -> member indices, input order
    for (size_t d = 0; d < n; ++d) groups[uf.find(d)].push_back(d);

    ClusterReport report;
    uint64_t removed = 0;
    for (auto& [root, members] : groups) {
        if (members.size() < 2) continue;
        size_t rep = members.front();
        if (cfg.keep_policy == DedupConfig::KeepPolicy::longest) {
            for (size_t m : members)
                if (lengths[m] > lengths[rep]) rep = m;
        }
        Cluster c;
        c.representative = ids[rep];
        for (size_t m : members) c.members.push_back(ids[m]);
        report.clusters.push_back(std::move(c));
        removed += members.size() - 1;
    }
    report.removed = removed;
    report.removal_fraction = n == 0 ? 0.0 : static_cast<double>(removed) / static_cast<double>(n);
    return report;
}

// One survivor per cluster; too-short and unclustered docs all survive.
// Output preserves input order.
inline std::pair<std::vector<Document>, ClusterReport> dedup_corpus(
    const std::vector<Document>& docs, const DedupConfig& cfg) {
    cfg.validate();
    std::unordered_set<std::string> seen_ids;
    for (const auto& d : docs)
        if (!seen_ids.insert(d.id).second)
            throw std::runtime_error("dedup: duplicate document id: " + d.id);

    std::vector<std::string> ids;
    std::vector<MinHashSignature> sigs;
    std::vector<size_t> lengths;
    std::vector<const Document*> hashed_docs;
    std::vector<const Document*> exempt;
    for (const auto& d : docs) {
        auto sig = minhash_signature(d.text, cfg);
        if (!sig) {
            exempt.push_back(&d);
            continue;
        }
        ids.push_back(d.id);
        sigs.push_back(std::move(*sig));
        lengths.push_back(d.text.size());
        hashed_docs.push_back(&d);
    }

    ClusterReport report = cluster(ids, sigs, lengths, cfg);
    report.removal_fraction =
        docs.empty() ? 0.0 : static_cast<double>(report.removed) / static_cast<double>(docs.size());
    std::unordered_set<std::string> drop;
    for (const auto& c : report.clusters)
        for (const auto& m : c.members)
            if (m != c.representative) drop.insert(m);

    std::vector<Document> kept;
    kept.reserve(docs.size() - drop.size());
    for (const auto& d : docs)
        if (!drop.count(d.id)) kept.push_back(d);
    return {std::move(kept), std::move(report)};
}

}  // namespace korf
