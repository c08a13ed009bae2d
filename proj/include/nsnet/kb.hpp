#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "decompose.hpp"
#include "embeddings.hpp"
#include "error.hpp"
#include "text.hpp"

namespace nsnet {

// (subject; predicate; object) knowledge tuple. subject and predicate are
// non-empty; each field holds at most 25 tokens; all_tokens is the union used
// for retrieval scoring (stopwords included).
struct KbTuple {
    int64_t id = -1;
    std::vector<std::string> subject, predicate, object;
    TokenSet all_tokens;

    void rebuild_token_set() {
        all_tokens.clear();
        for (const auto* f : {&subject, &predicate, &object}) {
            for (const auto& t : *f) all_tokens.insert(t);
        }
    }
};

struct KbLoadStats {
    size_t kept = 0;
    size_t skipped = 0;  // rows whose subject or predicate tokenized to nothing
};

// Three tab-separated columns: subject, predicate, object. Ids are assigned in
// file order. Rows with a missing column are a hard error; rows that tokenize
// to an empty subject or predicate are counted and skipped.
inline std::vector<KbTuple> load_kb_tsv(const std::string& path, KbLoadStats* stats = nullptr,
                                        size_t max_field_len = 25) {
    std::ifstream in(path);
    if (!in) fail_config("load_kb_tsv: cannot read " + path);
    std::vector<KbTuple> tuples;
    KbLoadStats local;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        size_t t1 = line.find('\t');
        size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos) {
            fail_ingest("load_kb_tsv: " + path + " line " + std::to_string(lineno) +
                        ": expected 3 tab-separated columns");
        }
        KbTuple t;
        t.subject = tokenize(line.substr(0, t1), max_field_len);
        t.predicate = tokenize(line.substr(t1 + 1, t2 - t1 - 1), max_field_len);
        t.object = tokenize(line.substr(t2 + 1), max_field_len);
        if (t.subject.empty() || t.predicate.empty()) {
            ++local.skipped;
            continue;
        }
        t.id = static_cast<int64_t>(tuples.size());
        t.rebuild_token_set();
        tuples.push_back(std::move(t));
    }
    local.kept = tuples.size();
    if (stats) *stats = local;
    return tuples;
}

// Token -> tuple-id postings over all_tokens minus the stopword list.
// Stopwords are excluded from candidate generation only; retrieval scores are
// Jaccard over the full token sets.
class InvertedIndex {
public:
    InvertedIndex() = default;

    static InvertedIndex build(std::vector<KbTuple> tuples) {
        InvertedIndex idx;
        idx.tuples_ = std::move(tuples);
        for (size_t i = 0; i < idx.tuples_.size(); ++i) {
            if (!idx.by_id_.emplace(idx.tuples_[i].id, i).second) {
                fail_contract("InvertedIndex: duplicate tuple id " +
                              std::to_string(idx.tuples_[i].id));
            }
        }
        for (size_t i = 0; i < idx.tuples_.size(); ++i) {
            for (const auto& tok : idx.tuples_[i].all_tokens) {
                if (is_stopword(tok)) continue;
                idx.postings_[tok].push_back(i);
            }
        }
        return idx;
    }

    size_t tuple_count() const { return tuples_.size(); }
    const std::vector<KbTuple>& tuples() const { return tuples_; }

    const KbTuple& tuple_by_id(int64_t id) const {
        auto it = by_id_.find(id);
        if (it == by_id_.end()) fail_lookup("InvertedIndex: no tuple with id " + std::to_string(id));
        return tuples_[it->second];
    }

    // Top-k candidates by (jaccard desc, id asc). Candidates are tuples
    // sharing at least one non-stopword token with the fact's flat form.
    // Returns fewer than k entries when fewer candidates exist.
    std::vector<std::pair<int64_t, double>> retrieve_top_k(const SubFact& fact,
                                                           size_t k) const {
        TokenSet fact_set = to_set(fact.flat);
        std::vector<char> is_candidate(tuples_.size(), 0);
        std::vector<size_t> candidates;
        for (const auto& tok : fact_set) {
            if (is_stopword(tok)) continue;
            auto it = postings_.find(tok);
            if (it == postings_.end()) continue;
            for (size_t pos : it->second) {
                if (!is_candidate[pos]) {
                    is_candidate[pos] = 1;
                    candidates.push_back(pos);
                }
            }
        }
        std::vector<std::pair<int64_t, double>> scored;
        scored.reserve(candidates.size());
        for (size_t pos : candidates) {
            scored.emplace_back(tuples_[pos].id, jaccard(fact_set, tuples_[pos].all_tokens));
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        if (scored.size() > k) scored.resize(k);
        return scored;
    }

    // Snapshot: tuples only; postings are rebuilt deterministically on load.
    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) fail_config("InvertedIndex: cannot write " + path);
        const char magic[4] = {'N', 'S', 'K', 'B'};
        out.write(magic, 4);
        uint32_t version = 1;
        out.write(reinterpret_cast<const char*>(&version), sizeof(version));
        uint64_t n = tuples_.size();
        out.write(reinterpret_cast<const char*>(&n), sizeof(n));
        auto write_field = [&out](const std::vector<std::string>& field) {
            uint32_t cnt = static_cast<uint32_t>(field.size());
            out.write(reinterpret_cast<const char*>(&cnt), sizeof(cnt));
            for (const auto& tok : field) {
                uint32_t len = static_cast<uint32_t>(tok.size());
                out.write(reinterpret_cast<const char*>(&len), sizeof(len));
                out.write(tok.data(), len);
            }
        };
        for (const auto& t : tuples_) {
            out.write(reinterpret_cast<const char*>(&t.id), sizeof(t.id));
            write_field(t.subject);
            write_field(t.predicate);
            write_field(t.object);
        }
        if (!out) fail_config("InvertedIndex: write failed for " + path);
    }

    static InvertedIndex load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) fail_config("InvertedIndex: cannot read " + path);
        char magic[4];
        in.read(magic, 4);
        if (!in || std::memcmp(magic, "NSKB", 4) != 0) {
            fail_ingest("InvertedIndex: bad magic in " + path);
        }
        uint32_t version = 0;
        in.read(reinterpret_cast<char*>(&version), sizeof(version));
        if (version != 1) fail_ingest("InvertedIndex: unsupported format-version in " + path);
        uint64_t n = 0;
        in.read(reinterpret_cast<char*>(&n), sizeof(n));
        auto read_field = [&in, &path](std::vector<std::string>& field) {
            uint32_t cnt = 0;
            in.read(reinterpret_cast<char*>(&cnt), sizeof(cnt));
            field.resize(cnt);
            for (auto& tok : field) {
                uint32_t len = 0;
                in.read(reinterpret_cast<char*>(&len), sizeof(len));
                tok.assign(len, '\0');
                in.read(tok.data(), len);
            }
            if (!in) fail_ingest("InvertedIndex: truncated snapshot " + path);
        };
        std::vector<KbTuple> tuples(n);
        for (auto& t : tuples) {
            in.read(reinterpret_cast<char*>(&t.id), sizeof(t.id));
            read_field(t.subject);
            read_field(t.predicate);
            read_field(t.object);
            t.rebuild_token_set();
        }
        return build(std::move(tuples));
    }

private:
    std::vector<KbTuple> tuples_;
    std::unordered_map<int64_t, size_t> by_id_;
    std::unordered_map<std::string, std::vector<size_t>> postings_;
};

enum class MatcherKind { word_over, emb_avg, emb_over };

inline MatcherKind matcher_from_string(const std::string& s) {
    if (s == "word_over") return MatcherKind::word_over;
    if (s == "emb_avg") return MatcherKind::emb_avg;
    if (s == "emb_over") return MatcherKind::emb_over;
    fail_config("unknown matcher '" + s + "' (expected word_over, emb_avg or emb_over)");
}

namespace detail {

// Fraction of cross-field token pairs whose embedding cosine exceeds 0.9,
// normalized by |a| * |b| over distinct tokens.
inline double emb_over_field(const std::vector<std::string>& a, const std::vector<std::string>& b,
                             const EmbeddingTable& emb, const Vocabulary& vocab) {
    TokenSet sa = to_set(a), sb = to_set(b);
    size_t hits = 0;
    for (const auto& ta : sa) {
        const double* ra = emb.row(vocab.id(ta));
        for (const auto& tb : sb) {
            const double* rb = emb.row(vocab.id(tb));
            if (cosine(ra, rb, emb.dim) > 0.9) ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(sa.size() * sb.size());
}

inline double field_score(const std::vector<std::string>& a, const std::vector<std::string>& b,
                          MatcherKind matcher, const EmbeddingTable* emb,
                          const Vocabulary* vocab) {
    // Both-empty means the same structural slot is absent on both sides.
    if (a.empty() && b.empty()) return 1.0;
    if (a.empty() || b.empty()) return 0.0;
    switch (matcher) {
        case MatcherKind::word_over:
            return jaccard(to_set(a), to_set(b));
        case MatcherKind::emb_avg: {
            if (!emb || !vocab) fail_contract("sim_f: emb_avg requires embeddings");
            auto va = average_rows_raw(vocab->ids_of(a), *emb);
            auto vb = average_rows_raw(vocab->ids_of(b), *emb);
            return std::max(0.0, cosine(va, vb));
        }
        case MatcherKind::emb_over:
            if (!emb || !vocab) fail_contract("sim_f: emb_over requires embeddings");
            return emb_over_field(a, b, *emb, *vocab);
    }
    fail_contract("sim_f: unreachable matcher");
}

}  // namespace detail

// Tuplized: Sim_f(h, kb) = (sum over subject/predicate/object field pairs) / 3.
// Untuplized: one matcher call over the flattened token sets.
inline double sim_f(const SubFact& fact, const KbTuple& tuple, bool tuplized, MatcherKind matcher,
                    const EmbeddingTable* emb = nullptr, const Vocabulary* vocab = nullptr) {
    if (tuplized) {
        double s = detail::field_score(fact.subject, tuple.subject, matcher, emb, vocab) +
                   detail::field_score(fact.predicate, tuple.predicate, matcher, emb, vocab) +
                   detail::field_score(fact.object, tuple.object, matcher, emb, vocab);
        return s / 3.0;
    }
    std::vector<std::string> flat_tuple;
    flat_tuple.reserve(tuple.subject.size() + tuple.predicate.size() + tuple.object.size());
    for (const auto* f : {&tuple.subject, &tuple.predicate, &tuple.object}) {
        flat_tuple.insert(flat_tuple.end(), f->begin(), f->end());
    }
    return detail::field_score(fact.flat, flat_tuple, matcher, emb, vocab);
}

struct LookupConfig {
    size_t top_k = 100;
    bool tuplized = true;
    MatcherKind matcher = MatcherKind::word_over;
    const EmbeddingTable* emb = nullptr;  // required for the embedding matchers
    const Vocabulary* vocab = nullptr;
};

// l(h) = max sim_f over the retrieved candidates; emb is the per-candidate
// sim_f vector in retrieval-rank order, zero-padded to top_k entries.
struct LookupResult {
    std::vector<std::pair<int64_t, double>> retrieved;  // (tuple id, sim_f), retrieval order
    double l_score = 0.0;
    int64_t best_tuple = -1;  // argmax sim_f, first in retrieval order on ties
    std::vector<double> emb;
};

inline LookupResult lookup(const SubFact& fact, const InvertedIndex& index,
                           const LookupConfig& cfg) {
    if (cfg.top_k < 1) fail_contract("lookup: top_k must be >= 1");
    LookupResult res;
    res.emb.assign(cfg.top_k, 0.0);
    auto ranked = index.retrieve_top_k(fact, cfg.top_k);
    res.retrieved.reserve(ranked.size());
    for (size_t i = 0; i < ranked.size(); ++i) {
        const KbTuple& t = index.tuple_by_id(ranked[i].first);
        double s = sim_f(fact, t, cfg.tuplized, cfg.matcher, cfg.emb, cfg.vocab);
        res.retrieved.emplace_back(t.id, s);
        res.emb[i] = s;
        if (s > res.l_score) {
            res.l_score = s;
            res.best_tuple = t.id;
        }
    }
    return res;
}

}  // namespace nsnet
