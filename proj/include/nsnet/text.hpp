#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "error.hpp"

namespace nsnet {

using TokenSet = std::set<std::string>;

// Lowercases, splits on whitespace/punctuation boundaries, discards the
// punctuation, truncates to max_len. Bytes >= 0x80 are kept so multi-byte
// UTF-8 words survive as opaque tokens. Idempotent on its own output.
inline std::vector<std::string> tokenize(std::string_view text, size_t max_len = SIZE_MAX) {
    if (max_len < 1) fail_contract("tokenize: max_len must be >= 1");
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty() && out.size() < max_len) out.push_back(cur);
        cur.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
        if (out.size() >= max_len) return out;
    }
    flush();
    return out;
}

inline TokenSet to_set(const std::vector<std::string>& tokens) {
    return TokenSet(tokens.begin(), tokens.end());
}

inline size_t intersection_size(const TokenSet& a, const TokenSet& b) {
    size_t n = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++n;
            ++ia;
            ++ib;
        }
    }
    return n;
}

// Sim(a, b) = |a ∩ b| / |a ∪ b|; both empty -> 0.0
inline double jaccard(const TokenSet& a, const TokenSet& b) {
    if (a.empty() && b.empty()) return 0.0;
    size_t inter = intersection_size(a, b);
    size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

// |h ∩ p| / |p|; empty p -> 0.0
inline double asym_overlap(const TokenSet& h, const TokenSet& p) {
    if (p.empty()) return 0.0;
    return static_cast<double>(intersection_size(h, p)) / static_cast<double>(p.size());
}

// Closed-class words excluded from retrieval candidate generation (never from
// scoring). Exactly 50 entries.
inline const TokenSet& stopwords() {
    static const TokenSet words = {
        "a", "an", "the", "is", "are", "was", "were", "be", "been", "being",
        "of", "in", "on", "at", "to", "for", "with", "by", "from", "as",
        "and", "or", "but", "not", "no", "it", "its", "this", "that", "these",
        "those", "they", "them", "their", "we", "you", "i", "he", "she", "his",
        "her", "our", "your", "do", "does", "did", "has", "have", "had", "can",
    };
    return words;
}

inline bool is_stopword(const std::string& token) {
    return stopwords().count(token) > 0;
}

// Token ids are dense: 0 = padding, 1 = unknown, then entries ranked by
// descending corpus frequency (ties broken lexicographically) up to the cap.
class Vocabulary {
public:
    static constexpr size_t kPad = 0;
    static constexpr size_t kUnk = 1;

    Vocabulary() { words_ = {"<pad>", "<unk>"}; }

    size_t id(const std::string& token) const {
        auto it = ids_.find(token);
        return it == ids_.end() ? kUnk : it->second;
    }

    std::vector<size_t> ids_of(const std::vector<std::string>& tokens) const {
        std::vector<size_t> out;
        out.reserve(tokens.size());
        for (const auto& t : tokens) out.push_back(id(t));
        return out;
    }

    bool contains(const std::string& token) const { return ids_.count(token) > 0; }
    size_t size() const { return words_.size(); }
    const std::string& word(size_t i) const {
        if (i >= words_.size()) fail_contract("Vocabulary: id out of range");
        return words_[i];
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) fail_config("Vocabulary: cannot write " + path);
        for (size_t i = 2; i < words_.size(); ++i) out << words_[i] << "\n";
    }

    static Vocabulary load(const std::string& path) {
        std::ifstream in(path);
        if (!in) fail_config("Vocabulary: cannot read " + path);
        Vocabulary v;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            v.push_word(line);
        }
        return v;
    }

private:
    friend class VocabBuilder;

    void push_word(const std::string& w) {
        ids_.emplace(w, words_.size());
        words_.push_back(w);
    }

    std::unordered_map<std::string, size_t> ids_;
    std::vector<std::string> words_;
};

class VocabBuilder {
public:
    void add(const std::vector<std::string>& tokens) {
        for (const auto& t : tokens) ++freq_[t];
    }

    Vocabulary finalize(size_t cap) const {
        if (cap < 2) fail_contract("VocabBuilder: cap must leave room for pad/unk");
        std::vector<std::pair<std::string, size_t>> ranked(freq_.begin(), freq_.end());
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        Vocabulary v;
        for (const auto& [word, n] : ranked) {
            (void)n;
            if (v.size() >= cap) break;
            v.push_word(word);
        }
        return v;
    }

private:
    std::unordered_map<std::string, size_t> freq_;
};

}  // namespace nsnet
