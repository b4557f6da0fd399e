#include <doctest.h>

#include <cmath>

#include "mrag/flat_index.hpp"
#include "mrag/hashing.hpp"

using namespace mrag;

namespace {

// Hand-written reference, kept separate from the library implementation.
struct RefMetrics {
    double mrr = 0, recall = 0, map = 0, ndcg = 0;
};

RefMetrics reference_metrics(const RunFile& runs, const QrelFile& qrels, int k) {
    RefMetrics ref;
    size_t n = 0;
    for (const auto& [query, ranked] : runs) {
        const auto& rel = qrels.at(query);
        double rr = 0, dcg = 0, ap = 0;
        int hits = 0;
        for (int i = 0; i < k && i < static_cast<int>(ranked.size()); ++i) {
            if (rel.count(ranked[static_cast<size_t>(i)]) == 0) continue;
            ++hits;
            if (rr == 0) rr = 1.0 / (i + 1);
            ap += static_cast<double>(hits) / (i + 1);
            dcg += 1.0 / std::log2(i + 2.0);
        }
        double idcg = 0;
        int ideal = std::min<int>(k, static_cast<int>(rel.size()));
        for (int i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(i + 2.0);
        ref.mrr += rr;
        ref.recall += static_cast<double>(hits) / static_cast<double>(rel.size());
        ref.map += ap / ideal;
        ref.ndcg += dcg / idcg;
        ++n;
    }
    ref.mrr /= n;
    ref.recall /= n;
    ref.map /= n;
    ref.ndcg /= n;
    return ref;
}

} // namespace

TEST_CASE("single-query fixed values") {
    SUBCASE("gold at rank 1") {
        RunFile runs{{"q", {"g", "x", "y"}}};
        QrelFile qrels{{"q", {"g"}}};
        auto m = retrieval_metrics(runs, qrels, 5);
        CHECK(m.mrr == doctest::Approx(1.0));
        CHECK(m.recall == doctest::Approx(1.0));
        CHECK(m.map == doctest::Approx(1.0));
        CHECK(m.ndcg == doctest::Approx(1.0));
    }
    SUBCASE("gold at rank 3 gives MRR 1/3") {
        RunFile runs{{"q", {"x", "y", "g", "z"}}};
        QrelFile qrels{{"q", {"g"}}};
        auto m = retrieval_metrics(runs, qrels, 5);
        CHECK(m.mrr == doctest::Approx(1.0 / 3.0));
    }
    SUBCASE("gold at rank 2 gives NDCG 0.6309") {
        RunFile runs{{"q", {"x", "g", "y"}}};
        QrelFile qrels{{"q", {"g"}}};
        auto m = retrieval_metrics(runs, qrels, 5);
        CHECK(std::abs(m.ndcg - 0.6309) <= 1e-4);
    }
    SUBCASE("two golds, one found in top-3") {
        RunFile runs{{"q", {"a", "x", "b"}}};
        QrelFile qrels{{"q", {"a", "b", "c"}}};
        auto m = retrieval_metrics(runs, qrels, 3);
        CHECK(m.recall == doctest::Approx(2.0 / 3.0));
        // AP@3 = (1/1 + 2/3) / min(3, 3)
        CHECK(m.map == doctest::Approx((1.0 + 2.0 / 3.0) / 3.0));
    }
}

TEST_CASE("beyond-k hits do not count") {
    RunFile runs{{"q", {"x", "y", "g"}}};
    QrelFile qrels{{"q", {"g"}}};
    auto m = retrieval_metrics(runs, qrels, 2);
    CHECK(m.mrr == doctest::Approx(0.0));
    CHECK(m.recall == doctest::Approx(0.0));
}

TEST_CASE("error paths") {
    QrelFile qrels{{"q", {"g"}}};
    CHECK_THROWS_WITH_AS(retrieval_metrics({{"q", {"a", "a"}}}, qrels, 5),
                         doctest::Contains("duplicate id"), Error);
    CHECK_THROWS_WITH_AS(retrieval_metrics({{"other", {"a"}}}, qrels, 5),
                         doctest::Contains("no qrels"), Error);
    CHECK_THROWS_AS(retrieval_metrics({{"q", {"a"}}}, {{"q", {}}}, 5), Error);
    CHECK_THROWS_AS(retrieval_metrics({}, qrels, 5), Error);
    CHECK_THROWS_AS(retrieval_metrics({{"q", {"a"}}}, qrels, 0), Error);
}

TEST_CASE("random runs agree with the hand-written reference") {
    SplitMix64 rng(777);
    for (int trial = 0; trial < 20; ++trial) {
        RunFile runs;
        QrelFile qrels;
        size_t queries = 1 + rng.below(6);
        for (size_t q = 0; q < queries; ++q) {
            std::string query = "q" + std::to_string(trial) + "_" + std::to_string(q);
            std::vector<std::string> pool;
            for (int d = 0; d < 12; ++d) pool.push_back("d" + std::to_string(d));
            rng.shuffle(pool);
            size_t run_len = 1 + rng.below(10);
            runs[query] = {pool.begin(), pool.begin() + static_cast<long>(run_len)};
            std::set<std::string> rel;
            size_t rel_count = 1 + rng.below(4);
            while (rel.size() < rel_count) rel.insert("d" + std::to_string(rng.below(12)));
            qrels[query] = rel;
        }
        int k = 1 + static_cast<int>(rng.below(8));
        auto got = retrieval_metrics(runs, qrels, k);
        auto want = reference_metrics(runs, qrels, k);
        CHECK(std::abs(got.mrr - want.mrr) <= 1e-12);
        CHECK(std::abs(got.recall - want.recall) <= 1e-12);
        CHECK(std::abs(got.map - want.map) <= 1e-12);
        CHECK(std::abs(got.ndcg - want.ndcg) <= 1e-12);
    }
}
