#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"

namespace nsnet {

inline double accuracy(const std::vector<int>& gold, const std::vector<int>& pred) {
    if (gold.size() != pred.size()) fail_contract("accuracy: gold/pred size mismatch");
    if (gold.empty()) fail_contract("accuracy: empty input");
    size_t hits = 0;
    for (size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] == pred[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(gold.size());
}

// Exact two-sided McNemar test on the discordant pair counts. b counts items
// the first model got right and the second wrong, c the reverse. Under the
// null the discordant flips are Binomial(n = b + c, 1/2); the p-value doubles
// the tail at min(b, c) and clamps at 1. n = 0 gives p = 1 (no evidence).
inline double mcnemar_exact(size_t b, size_t c) {
    const size_t n = b + c;
    if (n == 0) return 1.0;
    const size_t m = std::min(b, c);
    const double log2n = static_cast<double>(n) * std::log(2.0);
    double tail = 0.0;
    for (size_t i = 0; i <= m; ++i) {
        const double log_binom = std::lgamma(static_cast<double>(n) + 1.0) -
                                 std::lgamma(static_cast<double>(i) + 1.0) -
                                 std::lgamma(static_cast<double>(n - i) + 1.0);
        tail += std::exp(log_binom - log2n);
    }
    return std::min(1.0, 2.0 * tail);
}

// Convenience overload on aligned prediction vectors sharing one gold vector.
inline double mcnemar_exact(const std::vector<int>& gold, const std::vector<int>& pred_a,
                            const std::vector<int>& pred_b) {
    if (gold.size() != pred_a.size() || gold.size() != pred_b.size()) {
        fail_contract("mcnemar_exact: prediction vectors must align with gold");
    }
    size_t b = 0, c = 0;
    for (size_t i = 0; i < gold.size(); ++i) {
        const bool a_right = pred_a[i] == gold[i];
        const bool b_right = pred_b[i] == gold[i];
        if (a_right && !b_right) ++b;
        if (!a_right && b_right) ++c;
    }
    return mcnemar_exact(b, c);
}

struct ExampleResult {
    std::string id;
    int gold = 0;
    int pred = 0;
    double prob = 0.0;
};

namespace detail {
inline std::string acc_pct(double a) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << a * 100.0;
    return os.str();
}
}  // namespace detail
using detail::acc_pct;

// Reads the per-example prediction rows back out of a saved report JSON, so a
// later run can be compared against it.
inline std::vector<ExampleResult> load_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_config("cannot read report file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail_ingest("report file " + path + " is not valid JSON: " + std::string(e.what()));
    }
    if (!j.contains("examples") || !j["examples"].is_array()) {
        fail_ingest("report file " + path + " has no examples array");
    }
    std::vector<ExampleResult> rows;
    for (const auto& r : j["examples"]) {
        ExampleResult e;
        try {
            e.id = r.at("id").get<std::string>();
            e.gold = r.at("gold").get<int>();
            e.pred = r.at("pred").get<int>();
            e.prob = r.at("prob").get<double>();
        } catch (const nlohmann::json::exception& ex) {
            fail_ingest("report file " + path + ": bad example row: " + std::string(ex.what()));
        }
        rows.push_back(std::move(e));
    }
    return rows;
}

// Evaluation output for one model on one split. Serialized both as a
// human-readable text report and as JSON; neither embeds timestamps, so
// identical runs produce identical bytes.
struct EvalReport {
    std::string model;
    std::string split;
    double acc = 0.0;
    std::vector<ExampleResult> rows;
    nlohmann::json config_echo;
    bool has_ablation = false;
    bool ablate_matcher = false;
    bool ablate_lookup = false;
    double unablated_acc = 0.0;  // same model without the ablation flags
    bool has_comparison = false;
    std::string compared_to;
    size_t b = 0;
    size_t c = 0;
    double p_value = 1.0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["model"] = model;
        j["split"] = split;
        j["accuracy"] = acc;
        j["count"] = rows.size();
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : rows) {
            arr.push_back({{"id", r.id}, {"gold", r.gold}, {"pred", r.pred}, {"prob", r.prob}});
        }
        j["examples"] = arr;
        j["config"] = config_echo;
        if (has_ablation) {
            j["ablation"] = {{"matcher", ablate_matcher},
                             {"lookup", ablate_lookup},
                             {"unablated_accuracy", unablated_acc},
                             {"delta", acc - unablated_acc}};
        }
        if (has_comparison) {
            j["comparison"] = {{"against", compared_to}, {"b", b}, {"c", c}, {"p_value", p_value}};
        }
        return j;
    }

    std::string to_text() const {
        std::ostringstream os;
        os << "model: " << model << "\n";
        os << "split: " << split << "\n";
        os << "examples: " << rows.size() << "\n";
        os << "accuracy: " << std::fixed << std::setprecision(4) << acc * 100.0 << "%\n";
        if (has_ablation) {
            os << "ablation:";
            if (ablate_matcher) os << " matcher";
            if (ablate_lookup) os << " lookup";
            os << " (unablated " << acc_pct(unablated_acc) << "%, delta "
               << acc_pct(acc - unablated_acc) << ")\n";
        }
        if (has_comparison) {
            os << "mcnemar vs " << compared_to << ": b=" << b << " c=" << c
               << " p=" << std::setprecision(6) << p_value << "\n";
        }
        return os.str();
    }

    void save(const std::string& stem) const {
        {
            std::ofstream out(stem + ".txt");
            if (!out) fail_config("cannot write report " + stem + ".txt");
            out << to_text();
        }
        {
            std::ofstream out(stem + ".json");
            if (!out) fail_config("cannot write report " + stem + ".json");
            out << to_json().dump(2) << "\n";
        }
    }
};

inline EvalReport make_report(const std::string& model, const std::string& split,
                              std::vector<ExampleResult> rows, nlohmann::json config_echo) {
    EvalReport rep;
    rep.model = model;
    rep.split = split;
    rep.rows = std::move(rows);
    rep.config_echo = std::move(config_echo);
    std::vector<int> gold, pred;
    gold.reserve(rep.rows.size());
    pred.reserve(rep.rows.size());
    for (const auto& r : rep.rows) {
        gold.push_back(r.gold);
        pred.push_back(r.pred);
    }
    rep.acc = accuracy(gold, pred);
    return rep;
}

}  // namespace nsnet
