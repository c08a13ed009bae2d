#pragma once

#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "error.hpp"
#include "text.hpp"

namespace nsnet {

enum class SubFactSource { heuristic, external };

// One proposition extracted from a hypothesis. predicate is never empty; flat
// is subject ++ predicate ++ object, truncated, and never empty. The copula
// fallback is the only path that introduces a token ("is") absent from the
// source sentence.
struct SubFact {
    std::vector<std::string> subject;
    std::vector<std::string> predicate;
    std::vector<std::string> object;
    std::vector<std::string> flat;
    SubFactSource source = SubFactSource::heuristic;
};

namespace detail {

inline const std::unordered_set<std::string>& verb_list() {
    static const std::unordered_set<std::string> verbs = {
        "am", "is", "are", "was", "were", "be", "been", "being",
        "has", "have", "had", "do", "does", "did",
        "can", "could", "will", "would", "shall", "should", "may", "might", "must",
        "make", "makes", "made", "use", "uses", "used", "find", "finds", "found",
        "call", "calls", "called", "know", "knows", "known", "see", "sees", "seen",
        "give", "gives", "given", "take", "takes", "taken", "get", "gets", "got",
        "contain", "contains", "produce", "produces", "produced", "cause", "causes",
        "caused", "form", "forms", "formed", "occur", "occurs", "occurred",
        "consist", "consists", "require", "requires", "required", "include",
        "includes", "included", "allow", "allows", "allowed", "help", "helps",
        "helped", "mean", "means", "meant", "move", "moves", "moved", "need",
        "needs", "needed", "show", "shows", "shown", "carry", "carries", "carried",
        "grow", "grows", "grown", "live", "lives", "lived", "eat", "eats", "eaten",
        "become", "becomes", "became", "provide", "provides", "provided", "create",
        "creates", "created", "release", "releases", "released", "absorb",
        "absorbs", "absorbed", "store", "stores", "stored", "hold", "holds",
        "held", "keep", "keeps", "kept", "turn", "turns", "turned", "change",
        "changes", "changed", "lead", "leads", "led", "locate", "located",
        "compose", "composes", "composed", "divide", "divides", "divided",
        "pump", "pumps", "pumped", "fly", "flies", "flew", "run", "runs", "swim",
        "swims", "walk", "walks", "jump", "jumps", "drink", "drinks", "breathe",
        "breathes", "split", "splits", "feed", "feeds", "fed", "cover", "covers",
        "covered", "protect", "protects", "protected", "supply", "supplies",
        "supplied", "surround", "surrounds", "surrounded",
    };
    return verbs;
}

// Words that end like participles/gerunds but are not verbs.
inline const std::unordered_set<std::string>& suffix_exceptions() {
    static const std::unordered_set<std::string> words = {
        "during", "thing", "things", "something", "anything", "everything",
        "nothing", "king", "kings", "ring", "rings", "wing", "wings", "spring",
        "springs", "string", "strings", "morning", "evening", "offspring",
        "lightning", "sibling", "siblings", "ceiling",
        "seed", "weed", "deed", "reed", "creed", "hundred", "sacred", "indeed",
    };
    return words;
}

inline bool ends_with(const std::string& s, std::string_view suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

}  // namespace detail

// Closed word list plus -s/-ed/-ing suffix heuristics.
inline bool is_verb(const std::string& token) {
    const auto& verbs = detail::verb_list();
    if (verbs.count(token)) return true;
    if (detail::suffix_exceptions().count(token)) return false;
    if (detail::ends_with(token, "s")) {
        std::string stem = token.substr(0, token.size() - 1);
        if (verbs.count(stem)) return true;
        if (detail::ends_with(token, "es") && verbs.count(token.substr(0, token.size() - 2))) {
            return true;
        }
    }
    if (detail::ends_with(token, "ed") && token.size() >= 4) return true;
    if (detail::ends_with(token, "ing") && token.size() >= 5) return true;
    return false;
}

namespace detail {

inline bool has_verb(const std::vector<std::string>& toks, size_t from, size_t to) {
    for (size_t i = from; i < to; ++i) {
        if (is_verb(toks[i])) return true;
    }
    return false;
}

struct Spo {
    std::vector<std::string> subject, predicate, object;
};

inline std::vector<std::string> slice(const std::vector<std::string>& v, size_t from, size_t to) {
    return {v.begin() + static_cast<long>(from), v.begin() + static_cast<long>(to)};
}

// Splits a noun-phrase span on conjunction tokens; returns the span itself if
// no split produces two non-empty pieces.
inline std::vector<std::vector<std::string>> split_np(const std::vector<std::string>& span) {
    std::vector<std::vector<std::string>> pieces;
    std::vector<std::string> cur;
    for (const auto& t : span) {
        if (t == "and" || t == "but") {
            if (!cur.empty()) pieces.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(t);
        }
    }
    if (!cur.empty()) pieces.push_back(cur);
    if (pieces.size() < 2) return {span};
    return pieces;
}

}  // namespace detail

// Heuristic hypothesis decomposition:
//   1. split into clauses on "and"/"but"/";" when both sides contain a verb
//   2. per clause: subject = tokens before the first verb, predicate = the
//      maximal run of verb tokens, object = the rest
//   3. an object containing a relative pronoun (that/which/who) followed by a
//      verb yields a second proposition whose subject is the pre-pronoun span
//   4. conjoined noun phrases in subject/object distribute into copies
//   5. no verb at all -> single fact with predicate ["is"] and the sentence as
//      object
// Caps the result at max_facts (earlier clauses kept) and each flat form at
// max_flat tokens. Never returns an empty list.
inline std::vector<SubFact> decompose(std::string_view hypothesis, size_t max_facts = 5,
                                      size_t max_flat = 25) {
    if (max_facts < 1) fail_contract("decompose: max_facts must be >= 1");

    // clause segmentation; ';' is handled before tokenization discards it
    std::vector<std::vector<std::string>> clauses;
    std::string text(hypothesis);
    size_t pos = 0;
    std::vector<std::string> segments;
    while (pos <= text.size()) {
        size_t semi = text.find(';', pos);
        if (semi == std::string::npos) {
            segments.push_back(text.substr(pos));
            break;
        }
        segments.push_back(text.substr(pos, semi - pos));
        pos = semi + 1;
    }
    for (const auto& seg : segments) {
        auto toks = tokenize(seg);
        if (toks.empty()) continue;
        size_t start = 0;
        for (size_t i = 0; i < toks.size(); ++i) {
            if (toks[i] != "and" && toks[i] != "but") continue;
            if (i > start && detail::has_verb(toks, start, i) &&
                detail::has_verb(toks, i + 1, toks.size())) {
                clauses.push_back(detail::slice(toks, start, i));
                start = i + 1;
            }
        }
        if (start < toks.size()) clauses.push_back(detail::slice(toks, start, toks.size()));
    }

    std::vector<SubFact> facts;
    auto emit = [&](std::vector<std::string> subj, std::vector<std::string> pred,
                    std::vector<std::string> obj) {
        for (auto& sp : detail::split_np(subj)) {
            for (auto& op : detail::split_np(obj)) {
                SubFact f;
                f.subject = sp;
                f.predicate = pred;
                f.object = op;
                f.source = SubFactSource::heuristic;
                facts.push_back(std::move(f));
            }
        }
    };

    for (const auto& clause : clauses) {
        size_t vi = clause.size();
        for (size_t i = 0; i < clause.size(); ++i) {
            if (is_verb(clause[i])) {
                vi = i;
                break;
            }
        }
        if (vi == clause.size()) {
            emit({}, {"is"}, clause);
            continue;
        }
        size_t vj = vi;
        while (vj + 1 < clause.size() && is_verb(clause[vj + 1])) ++vj;
        auto subject = detail::slice(clause, 0, vi);
        auto predicate = detail::slice(clause, vi, vj + 1);
        auto object = detail::slice(clause, vj + 1, clause.size());

        // relative clause inside the object
        size_t rel = object.size();
        for (size_t t = 1; t < object.size(); ++t) {
            if (object[t] == "that" || object[t] == "which" || object[t] == "who") {
                if (detail::has_verb(object, t + 1, object.size())) {
                    rel = t;
                    break;
                }
            }
        }
        if (rel < object.size()) {
            auto head = detail::slice(object, 0, rel);
            size_t rv = rel + 1;
            while (rv < object.size() && !is_verb(object[rv])) ++rv;
            size_t rj = rv;
            while (rj + 1 < object.size() && is_verb(object[rj + 1])) ++rj;
            auto subj2 = head;
            for (size_t k = rel + 1; k < rv; ++k) subj2.push_back(object[k]);
            emit(subject, predicate, head);
            emit(subj2, detail::slice(object, rv, rj + 1),
                 detail::slice(object, rj + 1, object.size()));
        } else {
            emit(subject, predicate, object);
        }
    }

    if (facts.empty()) {
        SubFact f;
        f.predicate = {"is"};
        f.object = tokenize(hypothesis);
        facts.push_back(std::move(f));
    }
    if (facts.size() > max_facts) facts.resize(max_facts);

    for (auto& f : facts) {
        f.flat = f.subject;
        f.flat.insert(f.flat.end(), f.predicate.begin(), f.predicate.end());
        f.flat.insert(f.flat.end(), f.object.begin(), f.object.end());
        if (f.flat.size() > max_flat) f.flat.resize(max_flat);
    }
    return facts;
}

// Replay file for externally produced decompositions, one proposition per
// line: id<TAB>subject<TAB>predicate<TAB>object. Also the output format of the
// `decompose` CLI command, so dumps can be round-tripped.
inline std::map<std::string, std::vector<SubFact>> ingest_decompositions(const std::string& path,
                                                                         size_t max_facts = 5,
                                                                         size_t max_flat = 25) {
    std::ifstream in(path);
    if (!in) fail_config("ingest_decompositions: cannot read " + path);
    std::map<std::string, std::vector<SubFact>> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        size_t start = 0;
        while (true) {
            size_t tab = line.find('\t', start);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        if (fields.size() != 4) {
            fail_ingest("ingest_decompositions: " + path + " line " + std::to_string(lineno) +
                        ": expected 4 tab-separated fields, found " +
                        std::to_string(fields.size()));
        }
        SubFact f;
        f.subject = tokenize(fields[1]);
        f.predicate = tokenize(fields[2]);
        f.object = tokenize(fields[3]);
        f.source = SubFactSource::external;
        if (f.predicate.empty()) {
            fail_ingest("ingest_decompositions: " + path + " line " + std::to_string(lineno) +
                        ": empty predicate");
        }
        f.flat = f.subject;
        f.flat.insert(f.flat.end(), f.predicate.begin(), f.predicate.end());
        f.flat.insert(f.flat.end(), f.object.begin(), f.object.end());
        if (f.flat.size() > max_flat) f.flat.resize(max_flat);
        auto& list = out[fields[0]];
        if (list.size() < max_facts) list.push_back(std::move(f));
    }
    return out;
}

inline std::string join_tokens(const std::vector<std::string>& toks) {
    std::string s;
    for (size_t i = 0; i < toks.size(); ++i) {
        if (i) s += ' ';
        s += toks[i];
    }
    return s;
}

inline void write_decompositions(
    const std::string& path,
    const std::vector<std::pair<std::string, std::vector<SubFact>>>& rows) {
    std::ofstream out(path);
    if (!out) fail_config("write_decompositions: cannot write " + path);
    for (const auto& [id, facts] : rows) {
        for (const auto& f : facts) {
            out << id << '\t' << join_tokens(f.subject) << '\t' << join_tokens(f.predicate)
                << '\t' << join_tokens(f.object) << '\n';
        }
    }
}

}  // namespace nsnet
