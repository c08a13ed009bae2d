#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "error.hpp"

namespace nsnet {

using json = nlohmann::json;

// Run configuration. Defaults are the published training setup; everything is
// overridable from a JSON file (unknown keys are rejected so typos fail fast).
struct RunConfig {
    // data
    std::string train_file = "data/train.tsv";
    std::string dev_file = "data/dev.tsv";
    std::string test_file = "data/test.tsv";
    std::string kb_file = "data/kb.tsv";
    std::string embeddings_file = "data/embeddings.txt";
    std::string decompositions_file;  // optional replay of external decompositions
    std::string workdir = "artifacts";

    // model
    size_t emb_dim = 300;
    size_t hidden = 200;          // F/G hidden size
    size_t hybrid_hidden = 50;
    size_t comp_hidden = 50;
    size_t max_premise_len = 40;
    size_t max_hypothesis_len = 25;
    size_t max_sub_facts = 5;
    size_t vocab_cap = 30000;
    size_t top_k = 100;

    // training
    double lr = 0.05;
    double clip_norm = 5.0;
    size_t batch_size = 32;
    size_t epochs = 25;
    double dropout = 0.1;        // pretraining
    double joint_dropout = 0.0;  // joint training
    uint64_t seed = 13;

    // scoring
    bool tuplized = true;
    std::string matcher = "word_over";
    std::string ensemble_mode = "or";
    std::string ensemble_neural = "decomp";  // decomp | base
    double threshold = 0.5;
    bool freeze_embeddings = false;
    bool disable_matcher = false;
    bool disable_lookup = false;

    // evaluation
    size_t eval_workers = 1;

    std::string vocab_path() const { return workdir + "/vocab.txt"; }
    std::string index_path() const { return workdir + "/kb.index"; }
    std::string base_ckpt_path() const { return workdir + "/neural_base.ckpt"; }
    std::string decomp_ckpt_path() const { return workdir + "/neural_decomp.ckpt"; }
    std::string nsnet_ckpt_path() const { return workdir + "/nsnet.ckpt"; }
    std::string cache_dir() const { return workdir + "/cache"; }

    const std::string& split_file(const std::string& split) const {
        if (split == "train") return train_file;
        if (split == "dev") return dev_file;
        if (split == "test") return test_file;
        fail_config("unknown split '" + split + "' (expected train/dev/test)");
    }

    json to_json() const {
        json j;
        j["train_file"] = train_file;
        j["dev_file"] = dev_file;
        j["test_file"] = test_file;
        j["kb_file"] = kb_file;
        j["embeddings_file"] = embeddings_file;
        j["decompositions_file"] = decompositions_file;
        j["workdir"] = workdir;
        j["emb_dim"] = emb_dim;
        j["hidden"] = hidden;
        j["hybrid_hidden"] = hybrid_hidden;
        j["comp_hidden"] = comp_hidden;
        j["max_premise_len"] = max_premise_len;
        j["max_hypothesis_len"] = max_hypothesis_len;
        j["max_sub_facts"] = max_sub_facts;
        j["vocab_cap"] = vocab_cap;
        j["top_k"] = top_k;
        j["lr"] = lr;
        j["clip_norm"] = clip_norm;
        j["batch_size"] = batch_size;
        j["epochs"] = epochs;
        j["dropout"] = dropout;
        j["joint_dropout"] = joint_dropout;
        j["seed"] = seed;
        j["tuplized"] = tuplized;
        j["matcher"] = matcher;
        j["ensemble_mode"] = ensemble_mode;
        j["ensemble_neural"] = ensemble_neural;
        j["threshold"] = threshold;
        j["freeze_embeddings"] = freeze_embeddings;
        j["disable_matcher"] = disable_matcher;
        j["disable_lookup"] = disable_lookup;
        j["eval_workers"] = eval_workers;
        return j;
    }

    static RunConfig from_json(const json& j) {
        RunConfig c;
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string& k = it.key();
            try {
                if (k == "train_file") c.train_file = it->get<std::string>();
                else if (k == "dev_file") c.dev_file = it->get<std::string>();
                else if (k == "test_file") c.test_file = it->get<std::string>();
                else if (k == "kb_file") c.kb_file = it->get<std::string>();
                else if (k == "embeddings_file") c.embeddings_file = it->get<std::string>();
                else if (k == "decompositions_file") c.decompositions_file = it->get<std::string>();
                else if (k == "workdir") c.workdir = it->get<std::string>();
                else if (k == "emb_dim") c.emb_dim = it->get<size_t>();
                else if (k == "hidden") c.hidden = it->get<size_t>();
                else if (k == "hybrid_hidden") c.hybrid_hidden = it->get<size_t>();
                else if (k == "comp_hidden") c.comp_hidden = it->get<size_t>();
                else if (k == "max_premise_len") c.max_premise_len = it->get<size_t>();
                else if (k == "max_hypothesis_len") c.max_hypothesis_len = it->get<size_t>();
                else if (k == "max_sub_facts") c.max_sub_facts = it->get<size_t>();
                else if (k == "vocab_cap") c.vocab_cap = it->get<size_t>();
                else if (k == "top_k") c.top_k = it->get<size_t>();
                else if (k == "lr") c.lr = it->get<double>();
                else if (k == "clip_norm") c.clip_norm = it->get<double>();
                else if (k == "batch_size") c.batch_size = it->get<size_t>();
                else if (k == "epochs") c.epochs = it->get<size_t>();
                else if (k == "dropout") c.dropout = it->get<double>();
                else if (k == "joint_dropout") c.joint_dropout = it->get<double>();
                else if (k == "seed") c.seed = it->get<uint64_t>();
                else if (k == "tuplized") c.tuplized = it->get<bool>();
                else if (k == "matcher") c.matcher = it->get<std::string>();
                else if (k == "ensemble_mode") c.ensemble_mode = it->get<std::string>();
                else if (k == "ensemble_neural") c.ensemble_neural = it->get<std::string>();
                else if (k == "threshold") c.threshold = it->get<double>();
                else if (k == "freeze_embeddings") c.freeze_embeddings = it->get<bool>();
                else if (k == "disable_matcher") c.disable_matcher = it->get<bool>();
                else if (k == "disable_lookup") c.disable_lookup = it->get<bool>();
                else if (k == "eval_workers") c.eval_workers = it->get<size_t>();
                else fail_config("unknown config key '" + k + "'");
            } catch (const json::exception& e) {
                fail_config("config key '" + k + "': " + e.what());
            }
        }
        c.validate();
        return c;
    }

    static RunConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) fail_config("cannot read config file " + path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            fail_config("config file " + path + " is not valid JSON: " + e.what());
        }
        return from_json(j);
    }

    void validate() const {
        if (lr <= 0.0) fail_config("lr must be positive");
        if (batch_size < 1) fail_config("batch_size must be >= 1");
        if (epochs < 1) fail_config("epochs must be >= 1");
        if (max_sub_facts < 1) fail_config("max_sub_facts must be >= 1");
        if (top_k < 1) fail_config("top_k must be >= 1");
        if (threshold < 0.0 || threshold > 1.0) fail_config("threshold must be in [0, 1]");
        if (dropout < 0.0 || dropout >= 1.0) fail_config("dropout must be in [0, 1)");
        if (joint_dropout < 0.0 || joint_dropout >= 1.0) fail_config("joint_dropout must be in [0, 1)");
        if (ensemble_neural != "decomp" && ensemble_neural != "base") {
            fail_config("ensemble_neural must be decomp or base");
        }
        if (eval_workers < 1) fail_config("eval_workers must be >= 1");
    }
};

}  // namespace nsnet
