#include "mrag/eval.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>

namespace mrag {

std::string to_string(Metric m) { return m == Metric::F1 ? "f1" : "em"; }

Metric parse_metric(const std::string& s) {
    if (s == "f1") return Metric::F1;
    if (s == "em") return Metric::EM;
    throw Error("unknown metric \"" + s + "\" (expected \"f1\" or \"em\")");
}

std::vector<std::string> normalize_answer(const std::string& s) {
    std::string cleaned;
    cleaned.reserve(s.size());
    for (unsigned char c : s) {
        if (std::ispunct(c)) continue; // punctuation is deleted, not blanked
        cleaned.push_back(static_cast<char>(std::tolower(c)));
    }
    std::vector<std::string> tokens;
    size_t i = 0;
    while (i < cleaned.size()) {
        while (i < cleaned.size() && std::isspace(static_cast<unsigned char>(cleaned[i]))) ++i;
        size_t start = i;
        while (i < cleaned.size() && !std::isspace(static_cast<unsigned char>(cleaned[i]))) ++i;
        if (i > start) {
            std::string tok = cleaned.substr(start, i - start);
            if (tok != "a" && tok != "an" && tok != "the") tokens.push_back(std::move(tok));
        }
    }
    return tokens;
}

Score f1_score(const std::string& pred, const std::string& gold) {
    auto p = normalize_answer(pred);
    auto g = normalize_answer(gold);
    if (p.empty() && g.empty()) return {1.0, Metric::F1};
    if (p.empty() || g.empty()) return {0.0, Metric::F1};

    std::unordered_map<std::string, int> gold_counts;
    for (const auto& t : g) ++gold_counts[t];
    int overlap = 0;
    for (const auto& t : p) {
        auto it = gold_counts.find(t);
        if (it != gold_counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return {0.0, Metric::F1};
    double precision = static_cast<double>(overlap) / static_cast<double>(p.size());
    double recall = static_cast<double>(overlap) / static_cast<double>(g.size());
    return {2.0 * precision * recall / (precision + recall), Metric::F1};
}

Score exact_match(const std::string& pred, const std::string& gold) {
    return {normalize_answer(pred) == normalize_answer(gold) ? 1.0 : 0.0, Metric::EM};
}

Score evaluate(const std::string& pred, const std::vector<std::string>& golds, Metric metric) {
    if (golds.empty()) throw Error("evaluate: empty gold list");
    Score best{0.0, metric};
    bool first = true;
    for (const auto& gold : golds) {
        Score s = metric == Metric::F1 ? f1_score(pred, gold) : exact_match(pred, gold);
        if (first || s.value > best.value) best = s;
        first = false;
    }
    return best;
}

} // namespace mrag
