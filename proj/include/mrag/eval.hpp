#pragma once

#include <string>
#include <vector>

#include "mrag/error.hpp"

namespace mrag {

enum class Metric { F1, EM };

std::string to_string(Metric m);
Metric parse_metric(const std::string& s);

struct Score {
    double value = 0.0; // in [0, 1]; EM is 0 or 1
    Metric metric = Metric::F1;
};

// Extractive-QA normalization: lowercase, strip punctuation, drop the
// articles a/an/the, split on whitespace. Empty input gives an empty list.
std::vector<std::string> normalize_answer(const std::string& s);

// Token-level F1 over normalized multisets. Both sides empty after
// normalization scores 1.0; exactly one empty scores 0.0.
Score f1_score(const std::string& pred, const std::string& gold);

// 1 iff the normalized token sequences are identical.
Score exact_match(const std::string& pred, const std::string& gold);

// Max score over the gold alternatives.
Score evaluate(const std::string& pred, const std::vector<std::string>& golds, Metric metric);

} // namespace mrag
