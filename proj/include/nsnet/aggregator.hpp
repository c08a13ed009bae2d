#pragma once

#include <string>
#include <vector>

#include "autodiff.hpp"
#include "error.hpp"

namespace nsnet {

// Learned aggregation over per-sub-fact module scores. The hybrid layer maps
//   in(h_i, p) = [enc(h_i); l; m; n; emb_i; n_v]   (300+1+1+1+100+400 = 803)
// to a 50-d sub-representation with one weight matrix shared across sub-fact
// positions; the compositional layer concatenates the (zero-padded) slots and
// classifies.
struct AggConfig {
    size_t enc_dim = 300;
    size_t emb_k = 100;   // lookup sim vector length
    size_t nv_dim = 400;  // 2 * entail hidden
    size_t hybrid = 50;
    size_t comp_hidden = 50;
    size_t max_facts = 5;

    size_t in_dim() const { return enc_dim + 3 + emb_k + nv_dim; }
};

inline void init_agg_params(ParamStore& store, const AggConfig& cfg, Rng& rng) {
    store.create("agg.hybrid.w", cfg.in_dim(), cfg.hybrid, Init::xavier, rng);
    store.create("agg.hybrid.b", 1, cfg.hybrid, Init::zeros, rng);
    store.create("agg.comp.w1", cfg.max_facts * cfg.hybrid, cfg.comp_hidden, Init::xavier, rng);
    store.create("agg.comp.b1", 1, cfg.comp_hidden, Init::zeros, rng);
    store.create("agg.comp.w2", cfg.comp_hidden, 2, Init::xavier, rng);
    store.create("agg.comp.b2", 1, 2, Init::zeros, rng);
}

// Per-sub-fact inputs. h_enc, n_prob and n_v are graph nodes (gradients flow
// into the encoder embeddings and the neural module); l, m and emb are
// constants by construction.
struct ScoreBundle {
    TensorPtr h_enc;           // 1 x enc_dim
    double l = 0.0;
    double m = 0.0;
    TensorPtr n_prob;          // 1 x 1
    std::vector<double> emb;   // emb_k entries, zero-padded
    TensorPtr n_v;             // 1 x nv_dim
};

inline TensorPtr hybrid_forward(const ScoreBundle& bundle, const ParamStore& store,
                                const AggConfig& cfg) {
    if (!bundle.h_enc || !bundle.n_prob || !bundle.n_v) {
        fail_contract("hybrid_forward: bundle tensors missing");
    }
    if (bundle.h_enc->cols != cfg.enc_dim || bundle.n_v->cols != cfg.nv_dim ||
        bundle.emb.size() != cfg.emb_k) {
        fail_contract("hybrid_forward: bundle dimensions do not match config");
    }
    TensorPtr in = concat_cols({bundle.h_enc, constant(1, 1, bundle.l), constant(1, 1, bundle.m),
                                bundle.n_prob, row_constant(bundle.emb), bundle.n_v});
    return relu(add(matmul(in, store.get("agg.hybrid.w")), store.get("agg.hybrid.b")));
}

struct NsnetOutput {
    TensorPtr logits;  // 1 x 2, class 1 = entails
    TensorPtr prob;    // 1 x 1, P(entails)
};

// Missing sub-fact slots (beyond the ones provided) are zero-padded, so
// trailing padding never changes the result.
inline NsnetOutput compositional_forward(const std::vector<TensorPtr>& hybrid_outs,
                                         const ParamStore& store, const AggConfig& cfg) {
    if (hybrid_outs.empty()) fail_contract("compositional_forward: no sub-fact slots");
    if (hybrid_outs.size() > cfg.max_facts) {
        fail_contract("compositional_forward: more slots than max_facts");
    }
    std::vector<TensorPtr> parts = hybrid_outs;
    size_t missing = cfg.max_facts - hybrid_outs.size();
    if (missing > 0) parts.push_back(constant(1, missing * cfg.hybrid, 0.0));
    TensorPtr in = concat_cols(parts);
    TensorPtr h = relu(add(matmul(in, store.get("agg.comp.w1")), store.get("agg.comp.b1")));
    NsnetOutput out;
    out.logits = add(matmul(h, store.get("agg.comp.w2")), store.get("agg.comp.b2"));
    out.prob = slice_cols(row_softmax(out.logits), 1, 1);
    return out;
}

}  // namespace nsnet
