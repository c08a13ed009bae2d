#pragma once

#include <string>
#include <vector>

#include "error.hpp"

namespace nsnet {

enum class CombineMode { prob_or, prob_and };

inline CombineMode combine_mode_from_string(const std::string& s) {
    if (s == "or") return CombineMode::prob_or;
    if (s == "and") return CombineMode::prob_and;
    fail_config("unknown ensemble mode '" + s + "' (expected or/and)");
}

struct FactScores {
    double n = 0.0;  // neural entailment probability
    double m = 0.0;  // symbolic matcher overlap
    double l = 0.0;  // symbolic lookup score
};

// Noisy-OR treats the three modules as independent weak detectors:
//   or:  1 - (1-n)(1-m)(1-l)
//   and: n * m * l
inline double combine_fact(double n, double m, double l, CombineMode mode) {
    for (double v : {n, m, l}) {
        if (!(v >= 0.0 && v <= 1.0)) {
            fail_contract("combine_fact: scores must lie in [0, 1]");
        }
    }
    if (mode == CombineMode::prob_and) return n * m * l;
    return 1.0 - (1.0 - n) * (1.0 - m) * (1.0 - l);
}

struct EnsembleDecision {
    double prob = 0.0;
    bool entails = false;  // strictly greater than the threshold; ties stay neutral
};

// Mean of the per-fact combined scores over all sub-facts.
inline EnsembleDecision ensemble_predict(const std::vector<FactScores>& facts, CombineMode mode,
                                         double threshold = 0.5) {
    if (facts.empty()) fail_contract("ensemble_predict: no sub-facts");
    double sum = 0.0;
    for (const auto& f : facts) sum += combine_fact(f.n, f.m, f.l, mode);
    EnsembleDecision d;
    d.prob = sum / static_cast<double>(facts.size());
    d.entails = d.prob > threshold;
    return d;
}

}  // namespace nsnet
