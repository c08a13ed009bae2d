#pragma once

#include <string>
#include <vector>

#include "autodiff.hpp"
#include "embeddings.hpp"
#include "error.hpp"

namespace nsnet {

// Decomposable-attention entailment scorer (attend / compare / aggregate),
// without intra-sentence attention. F and G are one-hidden-layer feed-forward
// nets (hidden 200, relu); raw 300-d embeddings feed F directly.
struct EntailConfig {
    size_t emb_dim = 300;
    size_t hidden = 200;
    double dropout = 0.1;  // applied inside F and G at train time only
};

struct FwdCtx {
    bool train = false;
    double dropout = 0.0;
    Rng* rng = nullptr;  // required when train && dropout > 0
};

inline void init_entail_params(ParamStore& store, const EntailConfig& cfg, Rng& rng) {
    store.create("entail.f.w1", cfg.emb_dim, cfg.hidden, Init::xavier, rng);
    store.create("entail.f.b1", 1, cfg.hidden, Init::zeros, rng);
    store.create("entail.f.w2", cfg.hidden, cfg.hidden, Init::xavier, rng);
    store.create("entail.f.b2", 1, cfg.hidden, Init::zeros, rng);
    store.create("entail.g.w1", 2 * cfg.emb_dim, cfg.hidden, Init::xavier, rng);
    store.create("entail.g.b1", 1, cfg.hidden, Init::zeros, rng);
    store.create("entail.g.w2", cfg.hidden, cfg.hidden, Init::xavier, rng);
    store.create("entail.g.b2", 1, cfg.hidden, Init::zeros, rng);
    store.create("entail.out.w", 2 * cfg.hidden, 2, Init::xavier, rng);
    store.create("entail.out.b", 1, 2, Init::zeros, rng);
}

struct EntailOutput {
    TensorPtr logits;  // 1 x 2, class 1 = entails
    TensorPtr prob;    // 1 x 1, P(entails)
    TensorPtr n_v;     // 1 x 2*hidden, [v1; v2]
};

namespace detail {

inline TensorPtr ffn(const TensorPtr& x, const ParamStore& store, const std::string& prefix,
                     const FwdCtx& ctx) {
    TensorPtr h = x;
    if (ctx.train && ctx.dropout > 0.0) {
        if (!ctx.rng) fail_contract("entail_forward: dropout requires an rng");
        h = dropout(h, ctx.dropout, true, *ctx.rng);
    }
    h = relu(add(matmul(h, store.get(prefix + ".w1")), store.get(prefix + ".b1")));
    if (ctx.train && ctx.dropout > 0.0) h = dropout(h, ctx.dropout, true, *ctx.rng);
    return relu(add(matmul(h, store.get(prefix + ".w2")), store.get(prefix + ".b2")));
}

}  // namespace detail

// fact_ids x premise_ids -> entailment probability. Both sequences must be
// non-empty (the caller truncates: facts/hypotheses to 25 tokens, premises to
// 40). Identical inputs in eval mode always produce identical outputs.
inline EntailOutput entail_forward(const std::vector<size_t>& fact_ids,
                                   const std::vector<size_t>& premise_ids,
                                   const EmbeddingTable& emb, const ParamStore& store,
                                   const FwdCtx& ctx = {}) {
    if (fact_ids.empty() || premise_ids.empty()) {
        fail_contract("entail_forward: empty token sequence");
    }
    TensorPtr a = gather_rows(emb.table, fact_ids);     // la x d
    TensorPtr b = gather_rows(emb.table, premise_ids);  // lb x d

    TensorPtr fa = detail::ffn(a, store, "entail.f", ctx);  // la x h
    TensorPtr fb = detail::ffn(b, store, "entail.f", ctx);  // lb x h

    // e_ij = F(a_i) . F(b_j); softmax over j aligns premise to each fact
    // token, softmax over i aligns fact to each premise token.
    TensorPtr e = matmul(fa, transpose(fb));                     // la x lb
    TensorPtr align_a = matmul(row_softmax(e), b);               // la x d
    TensorPtr align_b = matmul(row_softmax(transpose(e)), a);    // lb x d

    TensorPtr va = detail::ffn(concat_cols({a, align_a}), store, "entail.g", ctx);
    TensorPtr vb = detail::ffn(concat_cols({b, align_b}), store, "entail.g", ctx);

    TensorPtr v1 = sum_rows(va);
    TensorPtr v2 = sum_rows(vb);

    EntailOutput out;
    out.n_v = concat_cols({v1, v2});
    out.logits = add(matmul(out.n_v, store.get("entail.out.w")), store.get("entail.out.b"));
    out.prob = slice_cols(row_softmax(out.logits), 1, 1);
    return out;
}

}  // namespace nsnet
