#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "aggregator.hpp"
#include "autodiff.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "decompose.hpp"
#include "embeddings.hpp"
#include "ensemble.hpp"
#include "entail.hpp"
#include "error.hpp"
#include "kb.hpp"
#include "matcher.hpp"
#include "metrics.hpp"
#include "text.hpp"

namespace nsnet {

// Symbolic signals for one sub-fact, computed once per example: they are
// constants with respect to the trainable parameters.
struct FactSignals {
    SubFact fact;
    std::vector<size_t> ids;  // vocabulary ids of the flat tokens
    double m = 0.0;
    double l = 0.0;
    int64_t best_tuple = -1;
    std::vector<double> emb;  // per-retrieved-tuple scores, zero-padded
};

struct PreparedExample {
    std::string id;
    int gold = 0;
    std::vector<size_t> premise_ids;
    std::vector<size_t> hypothesis_ids;
    std::vector<FactSignals> facts;
};

// Per-fact numbers surfaced for explain/predict output.
struct FactTrace {
    SubFact fact;
    double n = 0.0;
    double m = 0.0;
    double l = 0.0;
    double or_value = 0.0;
    int64_t best_tuple = -1;
};

// Full forward pass for one example: per sub-fact the entailment network and
// the symbolic constants feed the hybrid layer; the compositional layer
// combines all sub-facts. Ablation zeroes values without changing shapes.
inline NsnetOutput nsnet_forward(const PreparedExample& pe, const ParamStore& store,
                                 const EmbeddingTable& emb, const AggConfig& acfg,
                                 const FwdCtx& ctx = {}, bool ablate_matcher = false,
                                 bool ablate_lookup = false,
                                 std::vector<FactTrace>* trace = nullptr) {
    if (pe.facts.empty()) fail_contract("nsnet_forward: example has no sub-facts");
    std::vector<TensorPtr> hybrids;
    hybrids.reserve(pe.facts.size());
    for (const auto& fs : pe.facts) {
        EntailOutput eo = entail_forward(fs.ids, pe.premise_ids, emb, store, ctx);
        ScoreBundle b;
        b.h_enc = encode_average(fs.ids, emb);
        b.l = ablate_lookup ? 0.0 : fs.l;
        b.m = ablate_matcher ? 0.0 : fs.m;
        b.n_prob = eo.prob;
        b.emb = ablate_lookup ? std::vector<double>(acfg.emb_k, 0.0) : fs.emb;
        b.n_v = eo.n_v;
        hybrids.push_back(hybrid_forward(b, store, acfg));
        if (trace) {
            FactTrace t;
            t.fact = fs.fact;
            t.n = eo.prob->value[0];
            t.m = b.m;
            t.l = b.l;
            t.or_value = combine_fact(t.n, t.m, t.l, CombineMode::prob_or);
            t.best_tuple = fs.best_tuple;
            trace->push_back(std::move(t));
        }
    }
    return compositional_forward(hybrids, store, acfg);
}

struct PredictOutcome {
    double prob = 0.0;
    bool entails = false;
    std::string text;
};

class Pipeline {
public:
    explicit Pipeline(RunConfig cfg, std::ostream* log = &std::cout)
        : cfg_(std::move(cfg)), log_(log) {
        cfg_.validate();
    }

    const RunConfig& config() const { return cfg_; }

    // Builds the inverted index from the KB file and persists the snapshot.
    void build_index() {
        ensure_workdir();
        KbLoadStats stats;
        auto tuples = load_kb_tsv(cfg_.kb_file, &stats, cfg_.max_hypothesis_len);
        auto idx = InvertedIndex::build(std::move(tuples));
        idx.save(cfg_.index_path());
        log() << "indexed " << stats.kept << " tuples (" << stats.skipped
              << " skipped) -> " << cfg_.index_path() << "\n";
        index_.reset();
    }

    // Writes the heuristic decomposition of a split in the replay file format,
    // so it can be inspected or swapped for an external decomposition.
    void write_decomposition_file(const std::string& split, const std::string& out_path) {
        auto examples = load_split(split);
        std::vector<std::pair<std::string, std::vector<SubFact>>> rows;
        rows.reserve(examples.size());
        for (auto& ex : examples) rows.emplace_back(ex.id, std::move(ex.sub_facts));
        write_decompositions(out_path, rows);
        log() << "wrote decompositions for " << rows.size() << " examples -> " << out_path << "\n";
    }

    // Trains the entailment network alone. on_sub_facts=false trains on full
    // (premise, hypothesis) pairs; on_sub_facts=true trains one item per
    // (premise, sub-fact) pair, with validation at the example level via the
    // mean sub-fact probability. Builds and saves the vocabulary as a side
    // effect, since this is the first training stage.
    void pretrain(bool on_sub_facts) {
        ensure_workdir();
        auto train_ex = load_split("train");
        auto dev_ex = load_split("dev");
        if (train_ex.empty()) fail_contract("pretrain: empty training set");
        Vocabulary vocab = build_vocab();
        auto train = prepare(train_ex, vocab, false);
        auto dev = prepare(dev_ex, vocab, false);

        ParamStore store;
        store.seed = cfg_.seed;
        Rng init_rng(derive_seed(cfg_.seed, "entail-init"));
        init_entail_params(store, entail_cfg(), init_rng);
        EmbeddingTable emb = load_table(store);

        struct Item {
            const PreparedExample* pe;
            const std::vector<size_t>* fact_ids;
        };
        std::vector<Item> items;
        for (const auto& pe : train) {
            if (on_sub_facts) {
                for (const auto& fs : pe.facts) items.push_back({&pe, &fs.ids});
            } else {
                items.push_back({&pe, &pe.hypothesis_ids});
            }
        }

        const std::string tag = on_sub_facts ? "pretrain-facts" : "pretrain";
        const std::string ckpt = on_sub_facts ? cfg_.decomp_ckpt_path() : cfg_.base_ckpt_path();
        auto loss_fn = [&](const Item& it, FwdCtx& ctx) {
            auto out = entail_forward(*it.fact_ids, it.pe->premise_ids, emb, store, ctx);
            return cross_entropy(out.logits, static_cast<size_t>(it.pe->gold));
        };
        auto dev_acc = [&]() {
            return on_sub_facts ? mean_fact_accuracy(dev, store, emb)
                                : pair_accuracy(dev, store, emb);
        };
        run_training(items, store, cfg_.dropout, tag, ckpt, loss_fn, dev_acc);
    }

    // Joint training of the full network, initialized from the pretrained
    // entailment checkpoint. Gradients reach the hybrid/compositional weights,
    // the entailment network and the embedding table; the symbolic scores stay
    // constant.
    void train() {
        ensure_workdir();
        Vocabulary vocab = load_vocab();
        auto train_ex = load_split("train");
        auto dev_ex = load_split("dev");
        if (train_ex.empty()) fail_contract("train: empty training set");

        ParamStore store;
        store.seed = cfg_.seed;
        Rng entail_rng(derive_seed(cfg_.seed, "entail-init"));
        init_entail_params(store, entail_cfg(), entail_rng);
        Rng agg_rng(derive_seed(cfg_.seed, "agg-init"));
        init_agg_params(store, agg_cfg(), agg_rng);
        EmbeddingTable emb = load_table(store);

        if (!std::filesystem::exists(cfg_.base_ckpt_path())) {
            fail_config("missing pretrained checkpoint " + cfg_.base_ckpt_path() +
                        "; run pretrain first");
        }
        ParamStore pre = ParamStore::load(cfg_.base_ckpt_path());
        store.load_values_from(pre, "entail.");
        store.load_values_from(pre, "emb.");

        auto train = prepare(train_ex, vocab, true, &emb);
        auto dev = prepare(dev_ex, vocab, true, &emb);

        const AggConfig acfg = agg_cfg();
        struct Item {
            const PreparedExample* pe;
        };
        std::vector<Item> items;
        items.reserve(train.size());
        for (const auto& pe : train) items.push_back({&pe});

        auto loss_fn = [&](const Item& it, FwdCtx& ctx) {
            auto out = nsnet_forward(*it.pe, store, emb, acfg, ctx, cfg_.disable_matcher,
                                     cfg_.disable_lookup);
            return cross_entropy(out.logits, static_cast<size_t>(it.pe->gold));
        };
        auto dev_acc = [&]() {
            size_t hits = 0;
            for (const auto& pe : dev) {
                auto out = nsnet_forward(pe, store, emb, acfg, {}, cfg_.disable_matcher,
                                         cfg_.disable_lookup);
                int pred = out.prob->value[0] > cfg_.threshold ? 1 : 0;
                if (pred == pe.gold) ++hits;
            }
            return dev.empty() ? 0.0 : static_cast<double>(hits) / dev.size();
        };
        run_training(items, store, cfg_.joint_dropout, "joint", cfg_.nsnet_ckpt_path(), loss_fn,
                     dev_acc);
    }

    // Scores one split with one model. compare_with, when non-empty, names a
    // previously saved report JSON whose predictions are tested against this
    // run's via the exact McNemar test.
    EvalReport evaluate(const std::string& model, const std::string& split,
                        bool ablate_matcher = false, bool ablate_lookup = false,
                        const std::string& compare_with = "", bool save_report = true) {
        ensure_workdir();
        auto examples = load_split(split);
        std::vector<ExampleResult> rows;

        if (model == "majority") {
            int maj = majority_train_label();
            rows.reserve(examples.size());
            for (const auto& ex : examples) {
                rows.push_back({ex.id, ex.gold, maj, static_cast<double>(maj)});
            }
        } else if (model == "neural_base" || model == "neural_decomp") {
            Vocabulary vocab = load_vocab();
            const std::string ckpt =
                model == "neural_base" ? cfg_.base_ckpt_path() : cfg_.decomp_ckpt_path();
            ParamStore store = load_checkpoint(ckpt);
            EmbeddingTable emb = table_from(store);
            auto prepared = prepare(examples, vocab, false);
            const bool decomp = model == "neural_decomp";
            rows = score_all(prepared, [&](const PreparedExample& pe) {
                double prob = decomp ? mean_fact_prob(pe, store, emb)
                                     : entail_prob(pe.hypothesis_ids, pe.premise_ids, store, emb);
                return finish_row(pe, prob);
            });
        } else if (model == "ensemble") {
            Vocabulary vocab = load_vocab();
            const std::string ckpt = cfg_.ensemble_neural == "base" ? cfg_.base_ckpt_path()
                                                                    : cfg_.decomp_ckpt_path();
            ParamStore store = load_checkpoint(ckpt);
            EmbeddingTable emb = table_from(store);
            auto prepared = prepare(examples, vocab, true, &emb);
            CombineMode mode = combine_mode_from_string(cfg_.ensemble_mode);
            rows = score_all(prepared, [&](const PreparedExample& pe) {
                std::vector<FactScores> scores;
                scores.reserve(pe.facts.size());
                for (const auto& fs : pe.facts) {
                    FactScores s;
                    s.n = entail_prob(fs.ids, pe.premise_ids, store, emb);
                    s.m = ablate_matcher ? 0.0 : fs.m;
                    s.l = ablate_lookup ? 0.0 : fs.l;
                    scores.push_back(s);
                }
                auto dec = ensemble_predict(scores, mode, cfg_.threshold);
                ExampleResult r;
                r.id = pe.id;
                r.gold = pe.gold;
                r.pred = dec.entails ? 1 : 0;
                r.prob = dec.prob;
                return r;
            });
        } else if (model == "nsnet") {
            Vocabulary vocab = load_vocab();
            ParamStore store = load_checkpoint(cfg_.nsnet_ckpt_path());
            EmbeddingTable emb = table_from(store);
            auto prepared = prepare(examples, vocab, true, &emb);
            const AggConfig acfg = agg_cfg();
            rows = score_all(prepared, [&](const PreparedExample& pe) {
                auto out = nsnet_forward(pe, store, emb, acfg, {}, ablate_matcher, ablate_lookup);
                return finish_row(pe, out.prob->value[0]);
            });
        } else {
            fail_config("unknown model '" + model +
                        "' (expected nsnet, ensemble, neural_base, neural_decomp or majority)");
        }

        nlohmann::json echo = cfg_.to_json();
        echo["disable_matcher"] = ablate_matcher;
        echo["disable_lookup"] = ablate_lookup;
        EvalReport rep = make_report(model, split, std::move(rows), std::move(echo));

        if (ablate_matcher || ablate_lookup) {
            EvalReport base = evaluate(model, split, false, false, "", false);
            rep.has_ablation = true;
            rep.ablate_matcher = ablate_matcher;
            rep.ablate_lookup = ablate_lookup;
            rep.unablated_acc = base.acc;
        }
        if (!compare_with.empty()) attach_comparison(rep, compare_with);

        if (save_report) {
            std::string stem = report_stem(model, split, ablate_matcher, ablate_lookup);
            rep.save(stem);
            log() << rep.to_text() << "report: " << stem << ".txt\n";
        }
        return rep;
    }

    // Renders the per-sub-fact breakdown for one example of a split.
    std::string explain(const std::string& split, const std::string& id) {
        auto examples = load_split(split);
        const EntailExample* found = nullptr;
        for (const auto& ex : examples) {
            if (ex.id == id) {
                found = &ex;
                break;
            }
        }
        if (!found) fail_lookup("no example with id '" + id + "' in split " + split);
        Vocabulary vocab = load_vocab();
        ParamStore store = load_checkpoint(cfg_.nsnet_ckpt_path());
        EmbeddingTable emb = table_from(store);
        std::vector<EntailExample> one = {*found};
        auto prepared = prepare(one, vocab, true, &emb);
        return render_breakdown(prepared[0], *found, store, emb, true);
    }

    // Scores one ad-hoc premise/hypothesis pair with the trained network.
    PredictOutcome predict(const std::string& premise, const std::string& hypothesis) {
        EntailExample ex;
        ex.id = "adhoc-1";
        ex.premise = premise;
        ex.hypothesis = hypothesis;
        ex.premise_tokens = tokenize(premise, cfg_.max_premise_len);
        ex.hypothesis_tokens = tokenize(hypothesis, cfg_.max_hypothesis_len);
        if (ex.premise_tokens.empty()) fail_ingest("predict: premise has no tokens");
        if (ex.hypothesis_tokens.empty()) fail_ingest("predict: hypothesis has no tokens");
        ex.sub_facts = decompose(ex.hypothesis, cfg_.max_sub_facts, cfg_.max_hypothesis_len);
        ex.gold = 0;

        Vocabulary vocab = load_vocab();
        ParamStore store = load_checkpoint(cfg_.nsnet_ckpt_path());
        EmbeddingTable emb = table_from(store);
        std::vector<EntailExample> one = {ex};
        auto prepared = prepare(one, vocab, true, &emb);

        PredictOutcome out;
        out.text = render_breakdown(prepared[0], ex, store, emb, false);
        auto res = nsnet_forward(prepared[0], store, emb, agg_cfg(), {}, cfg_.disable_matcher,
                                 cfg_.disable_lookup);
        out.prob = res.prob->value[0];
        out.entails = out.prob > cfg_.threshold;
        return out;
    }

    // Exposed for tests and tools that need the same preprocessing path.
    std::vector<EntailExample> load_split(const std::string& split) {
        auto examples = ingest_dataset(cfg_.split_file(split), split, cfg_.max_premise_len,
                                       cfg_.max_hypothesis_len);
        const std::map<std::string, std::vector<SubFact>>* replay = nullptr;
        if (!cfg_.decompositions_file.empty()) {
            if (!replay_.has_value()) {
                replay_ = ingest_decompositions(cfg_.decompositions_file, cfg_.max_sub_facts,
                                                cfg_.max_hypothesis_len);
            }
            replay = &*replay_;
        }
        attach_sub_facts(examples, replay, cfg_.max_sub_facts, cfg_.max_hypothesis_len);
        return examples;
    }

    std::vector<PreparedExample> prepare(const std::vector<EntailExample>& examples,
                                         const Vocabulary& vocab, bool with_lookup,
                                         const EmbeddingTable* match_emb = nullptr) {
        LookupConfig lcfg;
        lcfg.top_k = cfg_.top_k;
        lcfg.tuplized = cfg_.tuplized;
        lcfg.matcher = matcher_from_string(cfg_.matcher);
        lcfg.emb = match_emb;
        lcfg.vocab = &vocab;
        const InvertedIndex* idx = with_lookup ? &index() : nullptr;

        std::vector<PreparedExample> out;
        out.reserve(examples.size());
        for (const auto& ex : examples) {
            PreparedExample pe;
            pe.id = ex.id;
            pe.gold = ex.gold;
            pe.premise_ids = vocab.ids_of(ex.premise_tokens);
            pe.hypothesis_ids = vocab.ids_of(ex.hypothesis_tokens);
            for (const auto& f : ex.sub_facts) {
                FactSignals fs;
                fs.fact = f;
                fs.ids = vocab.ids_of(f.flat);
                fs.m = premise_match(f, ex.premise_tokens);
                if (idx) {
                    LookupResult lr = lookup(f, *idx, lcfg);
                    fs.l = lr.l_score;
                    fs.best_tuple = lr.best_tuple;
                    fs.emb = std::move(lr.emb);
                } else {
                    fs.emb.assign(cfg_.top_k, 0.0);
                }
                pe.facts.push_back(std::move(fs));
            }
            out.push_back(std::move(pe));
        }
        return out;
    }

    EntailConfig entail_cfg() const {
        EntailConfig e;
        e.emb_dim = cfg_.emb_dim;
        e.hidden = cfg_.hidden;
        e.dropout = cfg_.dropout;
        return e;
    }

    AggConfig agg_cfg() const {
        AggConfig a;
        a.enc_dim = cfg_.emb_dim;
        a.emb_k = cfg_.top_k;
        a.nv_dim = 2 * cfg_.hidden;
        a.hybrid = cfg_.hybrid_hidden;
        a.comp_hidden = cfg_.comp_hidden;
        a.max_facts = cfg_.max_sub_facts;
        return a;
    }

    const InvertedIndex& index() {
        if (!index_.has_value()) {
            if (!std::filesystem::exists(cfg_.index_path())) {
                fail_config("missing index snapshot " + cfg_.index_path() +
                            "; run the index command first");
            }
            index_ = InvertedIndex::load(cfg_.index_path());
        }
        return *index_;
    }

    Vocabulary load_vocab() const {
        if (!std::filesystem::exists(cfg_.vocab_path())) {
            fail_config("missing vocabulary " + cfg_.vocab_path() + "; run pretrain first");
        }
        return Vocabulary::load(cfg_.vocab_path());
    }

private:
    std::ostream& log() { return *log_; }

    void ensure_workdir() const {
        std::filesystem::create_directories(cfg_.workdir);
        std::filesystem::create_directories(cfg_.workdir + "/reports");
    }

    // Vocabulary spans every split plus the KB, most-frequent words first.
    Vocabulary build_vocab() {
        VocabBuilder vb;
        for (const char* split : {"train", "dev", "test"}) {
            for (const auto& ex : load_split(split)) {
                vb.add(ex.premise_tokens);
                vb.add(ex.hypothesis_tokens);
            }
        }
        KbLoadStats stats;
        for (const auto& t : load_kb_tsv(cfg_.kb_file, &stats, cfg_.max_hypothesis_len)) {
            vb.add(t.subject);
            vb.add(t.predicate);
            vb.add(t.object);
        }
        Vocabulary v = vb.finalize(cfg_.vocab_cap);
        v.save(cfg_.vocab_path());
        log() << "vocabulary: " << v.size() << " entries -> " << cfg_.vocab_path() << "\n";
        return v;
    }

    EmbeddingTable load_table(ParamStore& store) {
        Vocabulary vocab = load_vocab();
        Rng rng(derive_seed(cfg_.seed, "emb-init"));
        EmbeddingTable emb = load_embeddings(cfg_.embeddings_file, vocab, cfg_.emb_dim, rng,
                                             !cfg_.freeze_embeddings);
        store.adopt("emb.table", emb.table);
        return emb;
    }

    static EmbeddingTable table_from(const ParamStore& store) {
        EmbeddingTable emb;
        emb.table = store.get("emb.table");
        emb.dim = emb.table->cols;
        return emb;
    }

    ParamStore load_checkpoint(const std::string& path) const {
        if (!std::filesystem::exists(path)) {
            fail_config("missing checkpoint " + path + "; train it first");
        }
        return ParamStore::load(path);
    }

    int majority_train_label() {
        auto train = ingest_dataset(cfg_.train_file, "train", cfg_.max_premise_len,
                                    cfg_.max_hypothesis_len);
        if (train.empty()) fail_contract("majority model: empty training split");
        size_t pos = 0;
        for (const auto& ex : train) pos += static_cast<size_t>(ex.gold);
        return 2 * pos > train.size() ? 1 : 0;
    }

    double entail_prob(const std::vector<size_t>& fact_ids, const std::vector<size_t>& premise_ids,
                       const ParamStore& store, const EmbeddingTable& emb) const {
        return entail_forward(fact_ids, premise_ids, emb, store, {}).prob->value[0];
    }

    double mean_fact_prob(const PreparedExample& pe, const ParamStore& store,
                          const EmbeddingTable& emb) const {
        double sum = 0.0;
        for (const auto& fs : pe.facts) sum += entail_prob(fs.ids, pe.premise_ids, store, emb);
        return pe.facts.empty() ? 0.0 : sum / static_cast<double>(pe.facts.size());
    }

    double pair_accuracy(const std::vector<PreparedExample>& pes, const ParamStore& store,
                         const EmbeddingTable& emb) const {
        if (pes.empty()) return 0.0;
        size_t hits = 0;
        for (const auto& pe : pes) {
            double p = entail_prob(pe.hypothesis_ids, pe.premise_ids, store, emb);
            if ((p > cfg_.threshold ? 1 : 0) == pe.gold) ++hits;
        }
        return static_cast<double>(hits) / pes.size();
    }

    double mean_fact_accuracy(const std::vector<PreparedExample>& pes, const ParamStore& store,
                              const EmbeddingTable& emb) const {
        if (pes.empty()) return 0.0;
        size_t hits = 0;
        for (const auto& pe : pes) {
            double p = mean_fact_prob(pe, store, emb);
            if ((p > cfg_.threshold ? 1 : 0) == pe.gold) ++hits;
        }
        return static_cast<double>(hits) / pes.size();
    }

    ExampleResult finish_row(const PreparedExample& pe, double prob) const {
        ExampleResult r;
        r.id = pe.id;
        r.gold = pe.gold;
        r.prob = prob;
        r.pred = prob > cfg_.threshold ? 1 : 0;
        return r;
    }

    // Common epoch/batch skeleton. Mini-batch loss is the mean cross-entropy
    // over the batch; one optimizer step per batch; the checkpoint tracks the
    // best validation accuracy seen so far (strictly greater to win).
    template <typename Item, typename LossFn, typename DevFn>
    void run_training(std::vector<Item>& items, ParamStore& store, double dropout_rate,
                      const std::string& tag, const std::string& ckpt_path, LossFn loss_fn,
                      DevFn dev_accuracy) {
        if (items.empty()) fail_contract("training: no items");
        Adam opt;
        opt.lr = cfg_.lr;
        opt.clip_norm = cfg_.clip_norm;
        Rng drop_rng(derive_seed(cfg_.seed, tag + "-dropout"));
        std::vector<size_t> order(items.size());
        std::iota(order.begin(), order.end(), 0);
        double best = -1.0;
        for (size_t epoch = 1; epoch <= cfg_.epochs; ++epoch) {
            Rng order_rng(derive_seed(cfg_.seed, tag + "-epoch-" + std::to_string(epoch)));
            order_rng.shuffle(order);
            double epoch_loss = 0.0;
            size_t batches = 0;
            for (size_t start = 0; start < order.size(); start += cfg_.batch_size) {
                size_t end = std::min(order.size(), start + cfg_.batch_size);
                store.zero_grads();
                TensorPtr total;
                for (size_t i = start; i < end; ++i) {
                    FwdCtx ctx;
                    ctx.train = true;
                    ctx.dropout = dropout_rate;
                    ctx.rng = &drop_rng;
                    TensorPtr li = loss_fn(items[order[i]], ctx);
                    total = total ? add(total, li) : li;
                }
                total = scale(total, 1.0 / static_cast<double>(end - start));
                backward(total);
                opt.step(store);
                epoch_loss += total->value[0];
                ++batches;
            }
            double acc = dev_accuracy();
            bool saved = acc > best;
            if (saved) {
                best = acc;
                store.save(ckpt_path);
            }
            log() << tag << " epoch " << epoch << "/" << cfg_.epochs << " loss "
                  << std::fixed << std::setprecision(4)
                  << (batches ? epoch_loss / static_cast<double>(batches) : 0.0) << " dev_acc "
                  << acc * 100.0 << "%" << (saved ? " (saved)" : "") << "\n";
        }
        log() << tag << " best dev_acc " << std::fixed << std::setprecision(4) << best * 100.0
              << "% -> " << ckpt_path << "\n";
    }

    // Order-preserving evaluation: results land at their example's position
    // regardless of worker count.
    template <typename ScoreFn>
    std::vector<ExampleResult> score_all(const std::vector<PreparedExample>& pes,
                                         ScoreFn score_one) {
        std::vector<ExampleResult> rows(pes.size());
        auto run_range = [&](size_t lo, size_t hi) {
            for (size_t i = lo; i < hi; ++i) rows[i] = score_one(pes[i]);
        };
        size_t workers = std::min<size_t>(cfg_.eval_workers, pes.size());
        if (workers <= 1) {
            run_range(0, pes.size());
        } else {
            std::vector<std::thread> pool;
            size_t chunk = (pes.size() + workers - 1) / workers;
            for (size_t w = 0; w < workers; ++w) {
                size_t lo = w * chunk;
                size_t hi = std::min(pes.size(), lo + chunk);
                if (lo >= hi) break;
                pool.emplace_back(run_range, lo, hi);
            }
            for (auto& t : pool) t.join();
        }
        return rows;
    }

    void attach_comparison(EvalReport& rep, const std::string& report_json_path) const {
        auto other = load_predictions(report_json_path);
        if (other.size() != rep.rows.size()) {
            fail_contract("comparison: prediction counts differ (" +
                          std::to_string(rep.rows.size()) + " vs " +
                          std::to_string(other.size()) + ")");
        }
        size_t b = 0, c = 0;
        for (size_t i = 0; i < other.size(); ++i) {
            if (other[i].id != rep.rows[i].id || other[i].gold != rep.rows[i].gold) {
                fail_contract("comparison: example ids or labels do not align at position " +
                              std::to_string(i));
            }
            bool mine = rep.rows[i].pred == rep.rows[i].gold;
            bool theirs = other[i].pred == rep.rows[i].gold;
            if (mine && !theirs) ++b;
            if (!mine && theirs) ++c;
        }
        rep.has_comparison = true;
        rep.compared_to = report_json_path;
        rep.b = b;
        rep.c = c;
        rep.p_value = mcnemar_exact(b, c);
    }

    std::string report_stem(const std::string& model, const std::string& split, bool am,
                            bool al) const {
        std::string stem = cfg_.workdir + "/reports/" + model + "_" + split;
        if (am) stem += "_nomatcher";
        if (al) stem += "_nolookup";
        return stem;
    }

    std::string render_breakdown(const PreparedExample& pe, const EntailExample& ex,
                                 const ParamStore& store, const EmbeddingTable& emb,
                                 bool show_gold) {
        std::vector<FactTrace> traces;
        auto out = nsnet_forward(pe, store, emb, agg_cfg(), {}, cfg_.disable_matcher,
                                 cfg_.disable_lookup, &traces);
        std::ostringstream os;
        os << std::fixed << std::setprecision(4);
        os << "premise:    " << ex.premise << "\n";
        os << "hypothesis: " << ex.hypothesis << "\n";
        if (show_gold) os << "gold:       " << (ex.gold ? "entails" : "neutral") << "\n";
        const InvertedIndex* idx = index_.has_value() ? &*index_ : nullptr;
        for (size_t i = 0; i < traces.size(); ++i) {
            const auto& t = traces[i];
            os << "sub-fact " << (i + 1) << ": (" << join_tokens(t.fact.subject) << "; "
               << join_tokens(t.fact.predicate) << "; " << join_tokens(t.fact.object) << ")\n";
            os << "  n=" << t.n << " m=" << t.m << " l=" << t.l << " or=" << t.or_value << "\n";
            if (t.l > 0.0 && t.best_tuple >= 0 && idx) {
                const KbTuple& kt = idx->tuple_by_id(t.best_tuple);
                os << "  best kb tuple: (" << join_tokens(kt.subject) << "; "
                   << join_tokens(kt.predicate) << "; " << join_tokens(kt.object) << ")\n";
            } else {
                os << "  best kb tuple: (no KB match)\n";
            }
        }
        double prob = out.prob->value[0];
        os << "prob_entail: " << prob << "\n";
        os << "label: " << (prob > cfg_.threshold ? "entails" : "neutral") << "\n";
        return os.str();
    }

    RunConfig cfg_;
    std::ostream* log_;
    std::optional<InvertedIndex> index_;
    std::optional<std::map<std::string, std::vector<SubFact>>> replay_;
};

}  // namespace nsnet
