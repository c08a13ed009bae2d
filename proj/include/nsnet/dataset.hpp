#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "decompose.hpp"
#include "error.hpp"
#include "text.hpp"

namespace nsnet {

// One premise/hypothesis pair. gold is 1 for entails, 0 for neutral.
struct EntailExample {
    std::string id;
    std::string premise;
    std::string hypothesis;
    std::vector<std::string> premise_tokens;
    std::vector<std::string> hypothesis_tokens;
    int gold = 0;
    std::vector<SubFact> sub_facts;
};

namespace detail {

inline int parse_label(const std::string& label, const std::string& where) {
    if (label == "entails") return 1;
    if (label == "neutral") return 0;
    fail_ingest(where + ": unknown label '" + label + "' (expected entails or neutral)");
}

inline void finish_example(EntailExample& ex, const std::string& where,
                           size_t max_premise_len, size_t max_hypothesis_len) {
    ex.premise_tokens = tokenize(ex.premise, max_premise_len);
    ex.hypothesis_tokens = tokenize(ex.hypothesis, max_hypothesis_len);
    if (ex.premise_tokens.empty()) fail_ingest(where + ": premise has no tokens");
    if (ex.hypothesis_tokens.empty()) fail_ingest(where + ": hypothesis has no tokens");
}

}  // namespace detail

// Reads tab-separated "premise<TAB>hypothesis<TAB>label" rows. Example ids are
// "<split>-<line>" with 1-based line numbers, so rows are addressable in
// reports and error messages.
inline std::vector<EntailExample> ingest_tsv(const std::string& path, const std::string& split,
                                             size_t max_premise_len = 40,
                                             size_t max_hypothesis_len = 25) {
    std::ifstream in(path);
    if (!in) fail_ingest("cannot read dataset file " + path);
    std::vector<EntailExample> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        size_t t1 = line.find('\t');
        size_t t2 = (t1 == std::string::npos) ? std::string::npos : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos ||
            line.find('\t', t2 + 1) != std::string::npos) {
            fail_ingest(where + ": expected 3 tab-separated fields");
        }
        EntailExample ex;
        ex.id = split + "-" + std::to_string(lineno);
        ex.premise = line.substr(0, t1);
        ex.hypothesis = line.substr(t1 + 1, t2 - t1 - 1);
        ex.gold = detail::parse_label(line.substr(t2 + 1), where);
        detail::finish_example(ex, where, max_premise_len, max_hypothesis_len);
        out.push_back(std::move(ex));
    }
    return out;
}

// Reads JSON-lines rows with keys sentence1 (premise), sentence2 (hypothesis)
// and gold_label. Rows whose gold_label is neither entails nor neutral are an
// error, matching the two-way task.
inline std::vector<EntailExample> ingest_jsonl(const std::string& path, const std::string& split,
                                               size_t max_premise_len = 40,
                                               size_t max_hypothesis_len = 25) {
    std::ifstream in(path);
    if (!in) fail_ingest("cannot read dataset file " + path);
    std::vector<EntailExample> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail_ingest(where + ": invalid JSON: " + e.what());
        }
        if (!j.contains("sentence1") || !j.contains("sentence2") || !j.contains("gold_label")) {
            fail_ingest(where + ": missing sentence1/sentence2/gold_label");
        }
        EntailExample ex;
        ex.id = split + "-" + std::to_string(lineno);
        try {
            ex.premise = j["sentence1"].get<std::string>();
            ex.hypothesis = j["sentence2"].get<std::string>();
            ex.gold = detail::parse_label(j["gold_label"].get<std::string>(), where);
        } catch (const nlohmann::json::exception& e) {
            fail_ingest(where + ": " + e.what());
        }
        detail::finish_example(ex, where, max_premise_len, max_hypothesis_len);
        out.push_back(std::move(ex));
    }
    return out;
}

// Dispatches on file extension: .jsonl uses the JSON-lines reader, everything
// else is treated as TSV.
inline std::vector<EntailExample> ingest_dataset(const std::string& path, const std::string& split,
                                                 size_t max_premise_len = 40,
                                                 size_t max_hypothesis_len = 25) {
    if (path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl") {
        return ingest_jsonl(path, split, max_premise_len, max_hypothesis_len);
    }
    return ingest_tsv(path, split, max_premise_len, max_hypothesis_len);
}

// Fills ex.sub_facts for every example, either from a replay map keyed by
// example id (rows produced elsewhere) or from the built-in decomposer.
inline void attach_sub_facts(std::vector<EntailExample>& examples,
                             const std::map<std::string, std::vector<SubFact>>* replay,
                             size_t max_facts = 5, size_t max_flat_len = 25) {
    for (auto& ex : examples) {
        if (replay) {
            auto it = replay->find(ex.id);
            if (it != replay->end()) {
                ex.sub_facts = it->second;
                continue;
            }
        }
        ex.sub_facts = decompose(ex.hypothesis, max_facts, max_flat_len);
    }
}

}  // namespace nsnet
