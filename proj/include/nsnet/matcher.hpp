#pragma once

#include <string>
#include <vector>

#include "decompose.hpp"
#include "text.hpp"

namespace nsnet {

// m(h, p) = |h ∩ p| / |p| over distinct tokens; symmetric inputs are NOT
// interchangeable (covering more of a long premise is harder than covering a
// short fact). Empty premise -> 0.
inline double premise_match(const SubFact& fact, const std::vector<std::string>& premise_tokens) {
    return asym_overlap(to_set(fact.flat), to_set(premise_tokens));
}

}  // namespace nsnet
