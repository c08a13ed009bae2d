#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "error.hpp"
#include "rng.hpp"
#include "text.hpp"

namespace nsnet {

// Dense vocab-indexed embedding matrix backed by an autodiff leaf so lookups
// are differentiable and rows fine-tune during joint training. Row 0 (padding)
// stays zero; vocab words missing from the vector file (the unknown token
// included) get rows drawn uniform in ±0.05 from the seeded stream, in
// ascending id order.
struct EmbeddingTable {
    size_t dim = 0;
    TensorPtr table;
    size_t oov_rows = 0;

    const double* row(size_t id) const {
        if (!table || id >= table->rows) fail_contract("EmbeddingTable: row out of range");
        return table->value.data() + id * dim;
    }
};

// File format: one row per line, "word v1 v2 ... vdim", space separated.
// A row with the wrong arity is an ingestion error naming the line; the first
// occurrence of a word wins; words outside the vocabulary are skipped.
inline EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab,
                                      size_t dim, Rng& rng, bool trainable) {
    if (dim < 1) fail_contract("load_embeddings: dim must be >= 1");
    std::ifstream in(path);
    if (!in) fail_config("load_embeddings: cannot read " + path);

    EmbeddingTable emb;
    emb.dim = dim;
    emb.table = make_leaf(vocab.size(), dim, trainable);

    std::vector<char> seen(vocab.size(), 0);
    seen[Vocabulary::kPad] = 1;  // padding row stays zero

    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        size_t ws = line.find(' ');
        if (ws == std::string::npos) {
            fail_ingest("load_embeddings: " + path + " line " + std::to_string(lineno) +
                        ": expected word followed by " + std::to_string(dim) + " values");
        }
        std::string word = line.substr(0, ws);
        if (!vocab.contains(word)) continue;
        size_t id = vocab.id(word);
        if (seen[id]) continue;

        double* dst = emb.table->value.data() + id * dim;
        const char* p = line.data() + ws;
        const char* end = line.data() + line.size();
        size_t got = 0;
        while (p < end) {
            while (p < end && *p == ' ') ++p;
            if (p == end) break;
            double v = 0.0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc()) {
                fail_ingest("load_embeddings: " + path + " line " + std::to_string(lineno) +
                            ": bad number");
            }
            if (got < dim) dst[got] = v;
            ++got;
            p = next;
        }
        if (got != dim) {
            fail_ingest("load_embeddings: " + path + " line " + std::to_string(lineno) +
                        ": expected " + std::to_string(dim) + " values, found " +
                        std::to_string(got));
        }
        seen[id] = 1;
    }

    for (size_t id = 0; id < vocab.size(); ++id) {
        if (seen[id]) continue;
        double* dst = emb.table->value.data() + id * dim;
        for (size_t j = 0; j < dim; ++j) dst[j] = rng.uniform(-0.05, 0.05);
        ++emb.oov_rows;
    }
    return emb;
}

// Mean of the embedding rows for the given ids, as a 1 x dim graph node.
// An empty id list encodes an empty span and yields a constant zero vector.
inline TensorPtr encode_average(const std::vector<size_t>& ids, const EmbeddingTable& emb) {
    std::vector<size_t> kept;
    kept.reserve(ids.size());
    for (size_t id : ids) {
        if (id != Vocabulary::kPad) kept.push_back(id);
    }
    if (kept.empty()) return constant(1, emb.dim, 0.0);
    return mean_rows(gather_rows(emb.table, kept));
}

// Non-graph helpers for the embedding-based field matchers, which treat the
// current table values as constants.
inline std::vector<double> average_rows_raw(const std::vector<size_t>& ids,
                                            const EmbeddingTable& emb) {
    std::vector<double> out(emb.dim, 0.0);
    if (ids.empty()) return out;
    for (size_t id : ids) {
        const double* r = emb.row(id);
        for (size_t j = 0; j < emb.dim; ++j) out[j] += r[j];
    }
    for (auto& v : out) v /= static_cast<double>(ids.size());
    return out;
}

inline double cosine(const double* a, const double* b, size_t n) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) fail_contract("cosine: dimension mismatch");
    return cosine(a.data(), b.data(), a.size());
}

}  // namespace nsnet
