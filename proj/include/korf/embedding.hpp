#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "korf/tokenizer_ext.hpp"

namespace korf {

// Row-major float32 matrix with a fixed 16-byte header:
//   bytes 0-3   magic "KEMB"
//   bytes 4-7   rows   (uint32, little-endian)
//   bytes 8-11  dim    (uint32, little-endian)
//   bytes 12-15 endian flag (1 = little)
struct EmbeddingMatrix {
    uint32_t rows = 0;
    uint32_t dim = 0;
    std::vector<float> values;  // rows * dim

    float* row(uint32_t r) { return values.data() + static_cast<size_t>(r) * dim; }
    const float* row(uint32_t r) const { return values.data() + static_cast<size_t>(r) * dim; }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("embedding: cannot write " + path);
        char header[16] = {'K', 'E', 'M', 'B'};
        auto put = [&](size_t off, uint32_t v) {
            for (int i = 0; i < 4; ++i) header[off + i] = static_cast<char>(v >> (8 * i));
        };
        put(4, rows);
        put(8, dim);
        put(12, 1);
        out.write(header, 16);
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(float)));
        if (!out) throw std::runtime_error("embedding: write failed: " + path);
    }

    static EmbeddingMatrix load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("embedding: cannot open " + path);
        char header[16];
        in.read(header, 16);
        if (!in || std::memcmp(header, "KEMB", 4) != 0)
            throw std::runtime_error("embedding: bad header in " + path);
        auto get = [&](size_t off) {
            uint32_t v = 0;
            for (int i = 0; i < 4; ++i)
                v |= static_cast<uint32_t>(static_cast<unsigned char>(header[off + i])) << (8 * i);
            return v;
        };
        EmbeddingMatrix m;
        m.rows = get(4);
        m.dim = get(8);
        if (get(12) != 1) throw std::runtime_error("embedding: unsupported endianness in " + path);
        m.values.resize(static_cast<size_t>(m.rows) * m.dim);
        in.read(reinterpret_cast<char*>(m.values.data()),
                static_cast<std::streamsize>(m.values.size() * sizeof(float)));
        if (!in) throw std::runtime_error("embedding: truncated file: " + path);
        return m;
    }
};

// New-token rows are the arithmetic mean of their base sub-token rows; base
// rows are copied bit-exactly.
inline EmbeddingMatrix init_embeddings(const EmbeddingMatrix& base_emb, const ExtendedVocab& vocab) {
    if (base_emb.rows != vocab.base_size())
        throw std::runtime_error("embedding: base matrix rows do not match base vocab size");
    EmbeddingMatrix out;
    out.rows = static_cast<uint32_t>(vocab.total_size());
    out.dim = base_emb.dim;
    out.values.resize(static_cast<size_t>(out.rows) * out.dim);
    std::memcpy(out.values.data(), base_emb.values.data(),
                base_emb.values.size() * sizeof(float));
    for (size_t t = 0; t < vocab.new_tokens.size(); ++t) {
        const auto& decomp = vocab.new_tokens[t].base_decomposition;
        if (decomp.empty())
            throw std::runtime_error("embedding: empty decomposition for token " +
                                     vocab.new_tokens[t].surface);
        float* dst = out.row(static_cast<uint32_t>(vocab.base_size() + t));
        for (uint32_t d = 0; d < out.dim; ++d) {
            double sum = 0.0;
            for (uint32_t id : decomp) sum += base_emb.row(id)[d];
            double v = sum / static_cast<double>(decomp.size());
            if (!std::isfinite(v))
                throw std::runtime_error("embedding: non-finite value in initialized row");
            dst[d] = static_cast<float>(v);
        }
    }
    return out;
}

}  // namespace korf
