#include <doctest.h>

#include <map>
#include <set>

#include "fixture_util.hpp"
#include "mrag/curation.hpp"
#include "mrag/jsonl.hpp"

using namespace mrag;

namespace {

StrategyScores scores_of(double na, double vis, double text) {
    StrategyScores s;
    s.s_na = na;
    s.s_vis = vis;
    s.s_text = text;
    return s;
}

} // namespace

TEST_CASE("self_assess separates the three strategy outcomes on the mock world") {
    auto world = fixtures::make_mock_world(1, 1, 1);
    auto deps = world.deps();

    SUBCASE("parametric pair scores (1, 0, 0)") {
        auto s = self_assess(world.qaset[0], deps);
        CHECK(s.s_na == 1.0);
        CHECK(s.s_vis == 0.0);
        CHECK(s.s_text == 0.0);
        CHECK(s.r_na == world.qaset[0].golds[0]);
        CHECK(s.r_vis == "unknown");
    }
    SUBCASE("visual-gold pair scores (0, 1, 0)") {
        auto s = self_assess(world.qaset[1], deps);
        CHECK(s.s_na == 0.0);
        CHECK(s.s_vis == 1.0);
        CHECK(s.s_text == 0.0);
    }
    SUBCASE("textual-gold pair scores (0, 0, 1)") {
        auto s = self_assess(world.qaset[2], deps);
        CHECK(s.s_na == 0.0);
        CHECK(s.s_vis == 0.0);
        CHECK(s.s_text == 1.0);
    }
    SUBCASE("strategy fan-out does not change the outcome") {
        auto serial = self_assess(world.qaset[1], world.deps(1));
        auto parallel = self_assess(world.qaset[1], world.deps(4));
        CHECK(serial.s_na == parallel.s_na);
        CHECK(serial.s_vis == parallel.s_vis);
        CHECK(serial.s_text == parallel.s_text);
        CHECK(serial.r_vis == parallel.r_vis);
    }
}

TEST_CASE("a gold document reachable from every strategy scores (1, 1, 1)") {
    // hand-built world where the same document id exists in both KBs and the
    // pair is also parametric-answerable
    EmbedderConfig embedder;
    embedder.dim = 256;
    embedder.seed = 7;
    GeneratorConfig generator;
    generator.mock_seed = 1;

    std::string core = "the shared fact about the amber lighthouse";
    KnowledgeBase visual_kb(Modality::Visual, "v");
    visual_kb.add({"shared", Modality::Visual, core, "img/s.jpg", std::nullopt});
    KnowledgeBase textual_kb(Modality::Textual, "t");
    textual_kb.add({"shared", Modality::Textual, core, std::nullopt, std::nullopt});
    auto visual_index = build_index(visual_kb, embedder);
    auto textual_index = build_index(textual_kb, embedder);

    QAPair qa;
    qa.id = "p";
    qa.question = core + " PARAMETRIC GOLD[shared]=amber light";
    qa.golds = {"amber light"};
    qa.parametric = true;

    SelfAssessDeps deps;
    deps.visual = {&visual_kb, &visual_index};
    deps.textual = {&textual_kb, &textual_index};
    deps.embedder = embedder;
    deps.generator = generator;
    deps.dataset_style = DatasetStyle::ShortAnswer;
    deps.metric = Metric::EM;

    auto s = self_assess(qa, deps);
    CHECK(s.s_na == 1.0);
    CHECK(s.s_vis == 1.0);
    CHECK(s.s_text == 1.0);
}

TEST_CASE("label_windsock takes the argmax with the configured tie order") {
    CHECK(label_windsock(scores_of(0.9, 0.2, 0.3)) == "NA");
    CHECK(label_windsock(scores_of(0.2, 0.8, 0.3)) == "Visual");
    CHECK(label_windsock(scores_of(0.1, 0.2, 0.9)) == "Textual");
    CHECK(label_windsock(scores_of(0.5, 0.5, 0.2)) == "NA");  // default prefers NA on ties
    CHECK(label_windsock(scores_of(0.2, 0.5, 0.5)) == "Visual");
    std::vector<Decision> textual_first = {"Textual", "Visual", "NA"};
    CHECK(label_windsock(scores_of(0.5, 0.5, 0.5), textual_first) == "Textual");
}

TEST_CASE("select_challenging_modality follows the retrieval scores only") {
    SplitMix64 rng(10);
    SUBCASE("strict argmin") {
        auto [m, tie] = select_challenging_modality(scores_of(0.0, 0.3, 0.7), rng);
        CHECK(m == Modality::Visual);
        CHECK_FALSE(tie);
        auto [m2, tie2] = select_challenging_modality(scores_of(0.0, 0.9, 0.1), rng);
        CHECK(m2 == Modality::Textual);
        CHECK_FALSE(tie2);
    }
    SUBCASE("s_na never matters") {
        SplitMix64 r(3);
        for (int i = 0; i < 500; ++i) {
            double vis = r.uniform();
            double text = r.uniform();
            SplitMix64 rng_a(i);
            SplitMix64 rng_b(i);
            auto a = select_challenging_modality(scores_of(r.uniform(), vis, text), rng_a);
            auto b = select_challenging_modality(scores_of(r.uniform(), vis, text), rng_b);
            CHECK(a.first == b.first);
            CHECK(a.second == b.second);
        }
    }
    SUBCASE("ties are seeded coin flips, marked tie_broken") {
        int visual = 0;
        for (uint64_t seed = 0; seed < 1000; ++seed) {
            SplitMix64 tie_rng(seed);
            auto [m, tie] = select_challenging_modality(scores_of(0.2, 0.5, 0.5), tie_rng);
            CHECK(tie);
            if (m == Modality::Visual) ++visual;
        }
        CHECK(visual >= 450);
        CHECK(visual <= 550);
        // deterministic per seed
        SplitMix64 a(42), b(42);
        CHECK(select_challenging_modality(scores_of(0, 0.5, 0.5), a) ==
              select_challenging_modality(scores_of(0, 0.5, 0.5), b));
    }
    SUBCASE("easy strategy flips the argmin") {
        auto [m, tie] = select_challenging_modality(scores_of(0, 0.3, 0.7), rng,
                                                    SelectionStrategy::Easy);
        CHECK(m == Modality::Textual);
        CHECK_FALSE(tie);
    }
    SUBCASE("random strategy is a seeded coin flip without tie marking") {
        SplitMix64 r1(5);
        auto [m, tie] = select_challenging_modality(scores_of(0, 0.3, 0.7), r1,
                                                    SelectionStrategy::Random);
        CHECK_FALSE(tie);
    }
}

TEST_CASE("build_windsock_dataset labels the mock fixture exactly") {
    auto world = fixtures::make_mock_world(3, 3, 3);
    auto result = build_windsock_dataset(world.qaset, world.deps());
    REQUIRE(result.examples.size() == 9);
    CHECK(result.skips.empty());
    for (size_t i = 0; i < result.examples.size(); ++i) {
        CHECK(result.examples[i].label == world.expected_labels[i]);
        CHECK(result.examples[i].question == world.qaset[i].question);
    }
    // ledger consistency: recomputing the argmax reproduces every label
    for (const auto& row : result.ledger) CHECK(label_windsock(row.scores) == row.label);
}

TEST_CASE("build_windsock_dataset skips failing pairs without dropping them") {
    auto world = fixtures::make_mock_world(1, 1, 1);
    auto qaset = world.qaset;
    QAPair broken;
    broken.id = "broken";
    broken.question = ""; // invalid: triggers a per-pair failure
    broken.golds = {"x"};
    qaset.insert(qaset.begin() + 1, broken);

    auto result = build_windsock_dataset(qaset, world.deps());
    CHECK(result.examples.size() == 3);
    REQUIRE(result.skips.size() == 1);
    CHECK(result.skips[0].id == "broken");
    CHECK(result.examples.size() + result.skips.size() == qaset.size());

    auto empty = build_windsock_dataset({}, world.deps());
    CHECK(empty.examples.empty());
    CHECK(empty.ledger.empty());
}

TEST_CASE("parallel and serial windsock builds are identical") {
    auto world = fixtures::make_mock_world(4, 4, 4);
    auto serial = build_windsock_dataset(world.qaset, world.deps(1));
    auto parallel = build_windsock_dataset(world.qaset, world.deps(8));
    REQUIRE(serial.examples.size() == parallel.examples.size());
    for (size_t i = 0; i < serial.examples.size(); ++i) {
        CHECK(serial.examples[i].question == parallel.examples[i].question);
        CHECK(serial.examples[i].label == parallel.examples[i].label);
    }
}

TEST_CASE("build_dance_dataset picks the struggling modality's documents") {
    auto world = fixtures::make_mock_world(0, 2, 2);
    auto result = build_dance_dataset(world.qaset, world.deps());
    REQUIRE(result.examples.size() == 4);
    CHECK(result.skips.empty());

    // visual-gold pairs score (0,1,0): textual retrieval struggles -> Textual
    for (int i = 0; i < 2; ++i) {
        CHECK(result.examples[static_cast<size_t>(i)].modality == Modality::Textual);
        CHECK_FALSE(result.examples[static_cast<size_t>(i)].tie_broken);
        for (const auto& doc : result.examples[static_cast<size_t>(i)].docs)
            CHECK(doc.modality == Modality::Textual);
    }
    for (int i = 2; i < 4; ++i)
        CHECK(result.examples[static_cast<size_t>(i)].modality == Modality::Visual);

    // k=3 -> every example carries min(3, |KB|) documents
    for (const auto& ex : result.examples) CHECK(ex.docs.size() == 3);
    // first gold is the answer
    CHECK(result.examples[0].answer == world.qaset[0].golds[0]);
}

TEST_CASE("dance ties are recorded and seed-dependent") {
    auto world = fixtures::make_mock_world(2, 0, 0); // parametric pairs tie at (0, 0)
    auto deps = world.deps();
    auto result = build_dance_dataset(world.qaset, deps);
    REQUIRE(result.examples.size() == 2);
    for (const auto& ex : result.examples) CHECK(ex.tie_broken);

    // same seed -> identical choices, regardless of parallelism
    auto again = build_dance_dataset(world.qaset, world.deps(8));
    for (size_t i = 0; i < result.examples.size(); ++i)
        CHECK(result.examples[i].modality == again.examples[i].modality);

    // across many seeds both modalities appear
    std::set<Modality> seen;
    for (uint64_t s = 0; s < 32; ++s) {
        auto d = deps;
        d.seed = s;
        auto r = build_dance_dataset(world.qaset, d);
        seen.insert(r.examples[0].modality);
    }
    CHECK(seen.size() == 2);
}

TEST_CASE("build_noise_set pads gold documents to exactly five") {
    KnowledgeBase kb(Modality::Textual, "noise_kb");
    for (int i = 0; i < 12; ++i)
        kb.add({"d" + std::to_string(i), Modality::Textual, "chunk " + std::to_string(i),
                std::nullopt, std::nullopt});

    auto pair_with_golds = [](const std::string& id, std::vector<std::string> golds) {
        QAPair qa;
        qa.id = id;
        qa.question = "q " + id;
        qa.golds = {"answer"};
        GoldDocIds ids;
        ids.textual = std::move(golds);
        qa.gold_doc_ids = ids;
        return qa;
    };

    SUBCASE("1 gold gets 4 fillers, 2 golds get 3") {
        auto records = build_noise_set(
            {pair_with_golds("one", {"d1"}), pair_with_golds("two", {"d2", "d3"})}, kb, 9);
        REQUIRE(records.size() == 2);
        for (const auto& record : records) {
            CHECK(record.docs.size() == 5);
            std::set<std::string> ids;
            for (const auto& doc : record.docs) ids.insert(doc.id);
            CHECK(ids.size() == 5); // no duplicates
            for (const auto& gold : record.gold_doc_ids) CHECK(ids.count(gold) == 1);
        }
        CHECK(records[0].gold_doc_ids.size() == 1);
        CHECK(records[1].gold_doc_ids.size() == 2);
        // fillers are disjoint from golds by construction; recheck anyway
        for (const auto& record : records) {
            std::set<std::string> golds(record.gold_doc_ids.begin(), record.gold_doc_ids.end());
            size_t fillers = 0;
            for (const auto& doc : record.docs)
                if (!golds.count(doc.id)) ++fillers;
            CHECK(fillers == 5 - golds.size());
        }
    }
    SUBCASE("0 or 3 golds are errors") {
        CHECK_THROWS_AS(build_noise_set({pair_with_golds("zero", {})}, kb, 9), Error);
        CHECK_THROWS_AS(build_noise_set({pair_with_golds("three", {"d1", "d2", "d3"})}, kb, 9),
                        Error);
    }
    SUBCASE("gold id missing from the kb is an error") {
        CHECK_THROWS_AS(build_noise_set({pair_with_golds("ghost", {"nope"})}, kb, 9), Error);
    }
    SUBCASE("a kb smaller than five documents cannot supply fillers") {
        KnowledgeBase tiny(Modality::Textual, "tiny");
        for (int i = 0; i < 4; ++i)
            tiny.add({"t" + std::to_string(i), Modality::Textual, "x", std::nullopt, std::nullopt});
        CHECK_THROWS_AS(build_noise_set({pair_with_golds("p", {"t0"})}, tiny, 9), Error);
    }
    SUBCASE("same seed reproduces the same records") {
        auto a = build_noise_set({pair_with_golds("one", {"d1"})}, kb, 33);
        auto b = build_noise_set({pair_with_golds("one", {"d1"})}, kb, 33);
        REQUIRE(a[0].docs.size() == b[0].docs.size());
        for (size_t i = 0; i < a[0].docs.size(); ++i) CHECK(a[0].docs[i].id == b[0].docs[i].id);
        auto c = build_noise_set({pair_with_golds("one", {"d1"})}, kb, 34);
        bool same = true;
        for (size_t i = 0; i < a[0].docs.size(); ++i) same = same && a[0].docs[i].id == c[0].docs[i].id;
        CHECK_FALSE(same);
    }
}

TEST_CASE("qa pair files round-trip and validate") {
    fixtures::TempDir tmp("curation");
    fixtures::write_file(
        tmp.path("qa.jsonl"),
        R"({"id":"q1","question":"what is it","golds":["a b"],"parametric":true})"
        "\n"
        R"({"id":"q2","question":"another","image_path":"i.jpg","golds":["x"],"gold_doc_ids":{"textual":["d1"]}})"
        "\n");
    auto pairs = load_qa_pairs(tmp.path("qa.jsonl"));
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].parametric == true);
    CHECK_FALSE(pairs[0].image_path);
    CHECK(pairs[1].image_path == "i.jpg");
    REQUIRE(pairs[1].gold_doc_ids);
    CHECK(pairs[1].gold_doc_ids->textual == std::vector<std::string>{"d1"});

    fixtures::write_file(tmp.path("bad.jsonl"), R"({"id":"q1","question":"","golds":["a"]})" "\n");
    CHECK_THROWS_WITH_AS(load_qa_pairs(tmp.path("bad.jsonl")), doctest::Contains(":1:"), Error);

    fixtures::write_file(tmp.path("nogold.jsonl"), R"({"id":"q1","question":"q","golds":[]})" "\n");
    CHECK_THROWS_AS(load_qa_pairs(tmp.path("nogold.jsonl")), Error);
}

TEST_CASE("curation output files are written in order") {
    fixtures::TempDir tmp("curation");
    auto world = fixtures::make_mock_world(1, 1, 1);
    auto result = build_windsock_dataset(world.qaset, world.deps());
    write_windsock_dataset(result.examples, tmp.path("w.jsonl"));
    auto reloaded = load_windsock_dataset(tmp.path("w.jsonl"));
    REQUIRE(reloaded.size() == result.examples.size());
    for (size_t i = 0; i < reloaded.size(); ++i) {
        CHECK(reloaded[i].question == result.examples[i].question);
        CHECK(reloaded[i].label == result.examples[i].label);
    }

    write_ledger(result, tmp.path("ledger.jsonl"));
    size_t rows = 0;
    for_each_jsonl(tmp.path("ledger.jsonl"), [&](size_t, const json& rec) {
        ++rows;
        CHECK(rec.contains("scores"));
        CHECK(rec.contains("responses"));
    });
    CHECK(rows == 3);

    auto dance = build_dance_dataset(world.qaset, world.deps());
    write_dance_dataset(dance, tmp.path("d.jsonl"));
    rows = 0;
    for_each_jsonl(tmp.path("d.jsonl"), [&](size_t, const json& rec) {
        ++rows;
        CHECK(rec.at("docs").size() == 3);
        CHECK(rec.contains("tie_broken"));
    });
    CHECK(rows == 3);
}
