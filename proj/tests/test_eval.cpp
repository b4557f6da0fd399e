#include <doctest.h>

#include <map>

#include "mrag/eval.hpp"
#include "mrag/hashing.hpp"

using namespace mrag;

namespace {

// Independent reference used by the property checks: re-implements the
// normalization and multiset overlap from scratch.
std::vector<std::string> ref_normalize(const std::string& s) {
    std::string lowered;
    for (unsigned char c : s) {
        if ((c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
            (c >= '{' && c <= '~'))
            continue;
        lowered.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                                               : static_cast<char>(c));
    }
    std::vector<std::string> tokens;
    std::string tok;
    for (char c : lowered + " ") {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            if (!tok.empty() && tok != "a" && tok != "an" && tok != "the") tokens.push_back(tok);
            tok.clear();
        } else {
            tok.push_back(c);
        }
    }
    return tokens;
}

double ref_f1(const std::string& pred, const std::string& gold) {
    auto p = ref_normalize(pred);
    auto g = ref_normalize(gold);
    if (p.empty() && g.empty()) return 1.0;
    if (p.empty() || g.empty()) return 0.0;
    std::map<std::string, int> counts;
    for (const auto& t : g) counts[t]++;
    int overlap = 0;
    for (const auto& t : p)
        if (counts[t] > 0) {
            counts[t]--;
            overlap++;
        }
    if (overlap == 0) return 0.0;
    double prec = double(overlap) / double(p.size());
    double rec = double(overlap) / double(g.size());
    return 2 * prec * rec / (prec + rec);
}

std::string random_answer(SplitMix64& rng) {
    static const char* words[] = {"the", "a",    "cat",  "dog",  "Blue", "whale(s)",
                                  "New", "York", "1889", "red!", "", "tower,"};
    size_t len = rng.below(5);
    std::string s;
    for (size_t i = 0; i < len; ++i) {
        if (i) s += ' ';
        s += words[rng.below(sizeof(words) / sizeof(words[0]))];
    }
    return s;
}

} // namespace

TEST_CASE("normalize_answer fixed cases") {
    CHECK(normalize_answer("The Eiffel Tower!") == std::vector<std::string>{"eiffel", "tower"});
    CHECK(normalize_answer("").empty());
    CHECK(normalize_answer("A   dog,  the dog.") == std::vector<std::string>{"dog", "dog"});
    CHECK(normalize_answer("An apple") == std::vector<std::string>{"apple"});
    CHECK(normalize_answer("it's fine") == std::vector<std::string>{"its", "fine"});
}

TEST_CASE("f1 fixed cases") {
    CHECK(f1_score("blue whale", "blue whale").value == doctest::Approx(1.0));
    CHECK(f1_score("cat", "dog").value == doctest::Approx(0.0));
    CHECK(f1_score("red brick building", "brick building").value == doctest::Approx(0.8));
    CHECK(f1_score("", "").value == doctest::Approx(1.0));
    CHECK(f1_score("something", "").value == doctest::Approx(0.0));
    CHECK(f1_score("", "something").value == doctest::Approx(0.0));
    // multiset, not set: one "dog" in pred matches only one of two in gold
    CHECK(f1_score("dog", "dog dog").value == doctest::Approx(2.0 * 1.0 * 0.5 / 1.5));
}

TEST_CASE("exact match fixed cases") {
    CHECK(exact_match("The cat", "cat").value == 1.0);
    CHECK(exact_match("cats", "cat").value == 0.0);
    CHECK(exact_match("", "").value == 1.0);
    CHECK(exact_match("a", "the").value == 1.0); // both normalize to nothing
}

TEST_CASE("evaluate takes the max over golds and rejects an empty list") {
    CHECK(evaluate("Paris", {"Paris", "paris france"}, Metric::F1).value == doctest::Approx(1.0));
    CHECK(evaluate("y", {"x"}, Metric::EM).value == 0.0);
    CHECK(evaluate("red brick building", {"brick building", "red house"}, Metric::F1).value ==
          doctest::Approx(0.8));
    CHECK_THROWS_AS(evaluate("x", {}, Metric::F1), Error);
}

TEST_CASE("f1 is symmetric and EM=1 implies F1=1 on random strings") {
    SplitMix64 rng(5150);
    for (int i = 0; i < 300; ++i) {
        std::string a = random_answer(rng);
        std::string b = random_answer(rng);
        CHECK(f1_score(a, b).value == doctest::Approx(f1_score(b, a).value));
        if (exact_match(a, b).value == 1.0) CHECK(f1_score(a, b).value == doctest::Approx(1.0));
        // agreement with the independent reference
        CHECK(f1_score(a, b).value == doctest::Approx(ref_f1(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("evaluate is monotone in the gold list") {
    SplitMix64 rng(616);
    for (int i = 0; i < 100; ++i) {
        std::string pred = random_answer(rng);
        std::vector<std::string> golds = {random_answer(rng)};
        double before = evaluate(pred, golds, Metric::F1).value;
        golds.push_back(random_answer(rng));
        double after = evaluate(pred, golds, Metric::F1).value;
        CHECK(after >= before);
    }
}

TEST_CASE("score bounds hold") {
    SplitMix64 rng(4242);
    for (int i = 0; i < 200; ++i) {
        auto s = f1_score(random_answer(rng), random_answer(rng));
        CHECK(s.value >= 0.0);
        CHECK(s.value <= 1.0);
        auto e = exact_match(random_answer(rng), random_answer(rng));
        CHECK((e.value == 0.0 || e.value == 1.0));
    }
}
