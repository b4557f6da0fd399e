#include "mrag/curation.hpp"

#include <algorithm>
#include <future>

#include "mrag/jsonl.hpp"
#include "mrag/parallel.hpp"

namespace mrag {

namespace {

void validate_pair(const QAPair& qa) {
    if (qa.id.empty()) throw Error("qa pair has empty id");
    if (qa.question.empty()) throw Error("qa pair \"" + qa.id + "\" has empty question");
    if (qa.golds.empty()) throw Error("qa pair \"" + qa.id + "\" has no gold answers");
    for (const auto& gold : qa.golds)
        if (gold.empty()) throw Error("qa pair \"" + qa.id + "\" has an empty gold answer");
}

std::vector<std::string> query_images(const QAPair& qa) {
    if (qa.image_path && !qa.image_path->empty()) return {*qa.image_path};
    return {};
}

struct StrategyOutcome {
    std::string response;
    double score = 0.0;
};

StrategyOutcome run_retrieval_strategy(const QAPair& qa, const SelfAssessDeps& deps,
                                       const IndexedKb& source) {
    EmbeddingVector q = embed_input(deps.embedder, qa.question, qa.image_path);
    auto hits = search(*source.index, q, deps.k);
    auto docs = materialize(source, hits);
    std::string prompt = render_prompt(qa.question, docs, {deps.dataset_style, true});
    auto result = generate(deps.generator, prompt, query_images(qa));
    return {result.text, evaluate(result.text, qa.golds, deps.metric).value};
}

StrategyOutcome run_direct_strategy(const QAPair& qa, const SelfAssessDeps& deps) {
    std::string prompt = render_prompt(qa.question, std::nullopt, {deps.dataset_style, false});
    auto result = generate(deps.generator, prompt, query_images(qa));
    return {result.text, evaluate(result.text, qa.golds, deps.metric).value};
}

} // namespace

StrategyScores self_assess(const QAPair& qa, const SelfAssessDeps& deps) {
    validate_pair(qa);
    if (!deps.visual.kb || !deps.visual.index || !deps.textual.kb || !deps.textual.index)
        throw Error("self_assess: both indexed knowledge bases are required");
    if (deps.k < 1) throw Error("self_assess: k must be >= 1");

    auto guarded = [&](const char* strategy, auto&& fn) {
        return [&, strategy, fn = std::forward<decltype(fn)>(fn)]() -> StrategyOutcome {
            try {
                return fn();
            } catch (const std::exception& e) {
                throw Error("pair \"" + qa.id + "\", strategy " + strategy + ": " + e.what());
            }
        };
    };
    auto na_task = guarded("NA", [&] { return run_direct_strategy(qa, deps); });
    auto vis_task = guarded("Visual", [&] { return run_retrieval_strategy(qa, deps, deps.visual); });
    auto text_task =
        guarded("Textual", [&] { return run_retrieval_strategy(qa, deps, deps.textual); });

    StrategyOutcome na, vis, text;
    if (deps.parallelism > 1) {
        auto vis_future = std::async(std::launch::async, vis_task);
        auto text_future = std::async(std::launch::async, text_task);
        na = na_task();
        vis = vis_future.get();
        text = text_future.get();
    } else {
        na = na_task();
        vis = vis_task();
        text = text_task();
    }

    StrategyScores scores;
    scores.s_na = na.score;
    scores.s_vis = vis.score;
    scores.s_text = text.score;
    scores.r_na = na.response;
    scores.r_vis = vis.response;
    scores.r_text = text.response;
    return scores;
}

Decision label_windsock(const StrategyScores& scores, const std::vector<Decision>& tie_order) {
    auto score_of = [&](const Decision& label) {
        if (label == "NA") return scores.s_na;
        if (label == "Visual") return scores.s_vis;
        if (label == "Textual") return scores.s_text;
        throw Error("label_windsock: tie order contains unknown label \"" + label + "\"");
    };
    if (tie_order.size() < 3) throw Error("label_windsock: tie order must cover all three labels");
    Decision best = tie_order[0];
    double best_score = score_of(best);
    for (size_t i = 1; i < tie_order.size(); ++i) {
        double s = score_of(tie_order[i]);
        if (s > best_score) { // strict: earlier tie_order entries win ties
            best = tie_order[i];
            best_score = s;
        }
    }
    return best;
}

std::pair<Modality, bool> select_challenging_modality(const StrategyScores& scores,
                                                      SplitMix64& rng,
                                                      SelectionStrategy strategy) {
    bool tie = scores.s_vis == scores.s_text;
    if (tie || strategy == SelectionStrategy::Random) {
        Modality pick = rng.below(2) == 0 ? Modality::Visual : Modality::Textual;
        return {pick, tie};
    }
    bool visual_lower = scores.s_vis < scores.s_text;
    switch (strategy) {
        case SelectionStrategy::Challenging:
            return {visual_lower ? Modality::Visual : Modality::Textual, false};
        case SelectionStrategy::Easy:
            return {visual_lower ? Modality::Textual : Modality::Visual, false};
        default:
            return {Modality::Visual, false}; // unreachable
    }
}

WindsockBuildResult build_windsock_dataset(const std::vector<QAPair>& qaset,
                                           const SelfAssessDeps& deps,
                                           const std::vector<Decision>& tie_order) {
    struct Slot {
        bool ok = false;
        LedgerRow row;
        std::string error;
    };
    std::vector<Slot> slots(qaset.size());
    parallel_for(qaset.size(), deps.parallelism, [&](size_t i) {
        try {
            StrategyScores scores = self_assess(qaset[i], deps);
            slots[i].row = {qaset[i].id, qaset[i].question, scores,
                            label_windsock(scores, tie_order)};
            slots[i].ok = true;
        } catch (const std::exception& e) {
            slots[i].error = e.what();
        }
    });

    WindsockBuildResult result;
    for (size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].ok) {
            result.examples.push_back({slots[i].row.question, slots[i].row.label});
            result.ledger.push_back(std::move(slots[i].row));
        } else {
            result.skips.push_back({qaset[i].id, slots[i].error});
        }
    }
    return result;
}

DanceBuildResult build_dance_dataset(const std::vector<QAPair>& qaset, const SelfAssessDeps& deps,
                                     SelectionStrategy strategy) {
    struct Slot {
        bool ok = false;
        DanceExample example;
        std::string error;
    };
    std::vector<Slot> slots(qaset.size());
    parallel_for(qaset.size(), deps.parallelism, [&](size_t i) {
        const QAPair& qa = qaset[i];
        try {
            StrategyScores scores = self_assess(qa, deps);
            SplitMix64 rng(deps.seed ^ stable_hash(qa.id));
            auto [modality, tie_broken] = select_challenging_modality(scores, rng, strategy);
            const IndexedKb& source =
                modality == Modality::Visual ? deps.visual : deps.textual;
            EmbeddingVector q = embed_input(deps.embedder, qa.question, qa.image_path);
            auto docs = materialize(source, search(*source.index, q, deps.k));
            slots[i].example = {qa.question, qa.image_path, modality, std::move(docs),
                                qa.golds.front(), tie_broken};
            slots[i].ok = true;
        } catch (const std::exception& e) {
            slots[i].error = e.what();
        }
    });

    DanceBuildResult result;
    for (size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].ok)
            result.examples.push_back(std::move(slots[i].example));
        else
            result.skips.push_back({qaset[i].id, slots[i].error});
    }
    return result;
}

std::vector<NoiseRecord> build_noise_set(const std::vector<QAPair>& qaset,
                                         const KnowledgeBase& kb, uint64_t seed) {
    constexpr size_t kDocsPerQuery = 5;
    std::vector<NoiseRecord> records;
    records.reserve(qaset.size());
    for (const QAPair& qa : qaset) {
        validate_pair(qa);
        if (!qa.gold_doc_ids)
            throw Error("noise set: pair \"" + qa.id + "\" has no gold_doc_ids");
        const auto& golds = kb.modality() == Modality::Visual ? qa.gold_doc_ids->visual
                                                              : qa.gold_doc_ids->textual;
        if (golds.empty() || golds.size() > 2)
            throw Error("noise set: pair \"" + qa.id + "\" must have 1 or 2 gold documents, has " +
                        std::to_string(golds.size()));
        if (kb.size() < kDocsPerQuery)
            throw Error("noise set: knowledge base \"" + kb.name() + "\" has only " +
                        std::to_string(kb.size()) + " documents, need at least 5");

        NoiseRecord record;
        record.question_id = qa.id;
        record.gold_doc_ids = golds;
        std::vector<std::string> picked;
        for (const auto& id : golds) {
            const Document* doc = kb.find(id);
            if (!doc)
                throw Error("noise set: gold document \"" + id + "\" for pair \"" + qa.id +
                            "\" is not in knowledge base \"" + kb.name() + "\"");
            record.docs.push_back(*doc);
            picked.push_back(id);
        }

        SplitMix64 rng(seed ^ stable_hash(qa.id));
        while (record.docs.size() < kDocsPerQuery) {
            const Document& candidate =
                kb.documents()[static_cast<size_t>(rng.below(kb.size()))];
            if (std::find(picked.begin(), picked.end(), candidate.id) != picked.end()) continue;
            record.docs.push_back(candidate);
            picked.push_back(candidate.id);
        }
        rng.shuffle(record.docs);
        records.push_back(std::move(record));
    }
    return records;
}

namespace {

json document_to_json(const Document& doc) {
    json rec;
    rec["id"] = doc.id;
    rec["modality"] = to_string(doc.modality);
    rec["text"] = doc.text;
    if (doc.image_path) rec["image_path"] = *doc.image_path;
    if (doc.source) rec["source"] = *doc.source;
    return rec;
}

} // namespace

std::vector<QAPair> load_qa_pairs(const std::string& path) {
    std::vector<QAPair> pairs;
    for_each_jsonl(path, [&](size_t line_no, const json& rec) {
        std::string ctx = path + ":" + std::to_string(line_no);
        QAPair qa;
        try {
            qa.id = rec.at("id").get<std::string>();
            qa.question = rec.at("question").get<std::string>();
            if (rec.contains("image_path") && !rec["image_path"].is_null())
                qa.image_path = rec["image_path"].get<std::string>();
            qa.golds = rec.at("golds").get<std::vector<std::string>>();
            if (rec.contains("gold_doc_ids") && !rec["gold_doc_ids"].is_null()) {
                GoldDocIds ids;
                const auto& g = rec["gold_doc_ids"];
                if (g.contains("visual")) ids.visual = g["visual"].get<std::vector<std::string>>();
                if (g.contains("textual")) ids.textual = g["textual"].get<std::vector<std::string>>();
                qa.gold_doc_ids = std::move(ids);
            }
            if (rec.contains("parametric") && !rec["parametric"].is_null())
                qa.parametric = rec["parametric"].get<bool>();
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            throw Error(ctx + ": malformed qa record: " + e.what());
        }
        try {
            validate_pair(qa);
        } catch (const Error& e) {
            throw Error(ctx + ": " + e.what());
        }
        pairs.push_back(std::move(qa));
    });
    return pairs;
}

void write_windsock_dataset(const std::vector<WindsockExample>& examples,
                            const std::string& path) {
    JsonlWriter out(path);
    for (const auto& ex : examples) {
        json rec;
        rec["question"] = ex.question;
        rec["label"] = ex.label;
        out.write(rec);
    }
}

std::vector<WindsockExample> load_windsock_dataset(const std::string& path) {
    std::vector<WindsockExample> examples;
    for_each_jsonl(path, [&](size_t line_no, const json& rec) {
        std::string ctx = path + ":" + std::to_string(line_no);
        try {
            examples.push_back(
                {rec.at("question").get<std::string>(), rec.at("label").get<std::string>()});
        } catch (const std::exception& e) {
            throw Error(ctx + ": malformed training record: " + e.what());
        }
        if (examples.back().question.empty()) throw Error(ctx + ": empty question");
    });
    return examples;
}

void write_ledger(const WindsockBuildResult& result, const std::string& path) {
    JsonlWriter out(path);
    for (const auto& row : result.ledger) {
        json rec;
        rec["id"] = row.id;
        rec["question"] = row.question;
        rec["label"] = row.label;
        rec["scores"] = {{"na", row.scores.s_na},
                         {"visual", row.scores.s_vis},
                         {"textual", row.scores.s_text}};
        rec["responses"] = {{"na", row.scores.r_na},
                            {"visual", row.scores.r_vis},
                            {"textual", row.scores.r_text}};
        out.write(rec);
    }
    for (const auto& skip : result.skips) {
        json rec;
        rec["id"] = skip.id;
        rec["error"] = skip.reason;
        out.write(rec);
    }
}

void write_dance_dataset(const DanceBuildResult& result, const std::string& path) {
    JsonlWriter out(path);
    for (const auto& ex : result.examples) {
        json rec;
        rec["question"] = ex.question;
        if (ex.image_path) rec["image_path"] = *ex.image_path;
        rec["modality"] = to_string(ex.modality);
        rec["docs"] = json::array();
        for (const auto& doc : ex.docs) rec["docs"].push_back(document_to_json(doc));
        rec["answer"] = ex.answer;
        rec["tie_broken"] = ex.tie_broken;
        out.write(rec);
    }
    for (const auto& skip : result.skips) {
        json rec;
        rec["id"] = skip.id;
        rec["error"] = skip.reason;
        out.write(rec);
    }
}

void write_noise_set(const std::vector<NoiseRecord>& records, const std::string& path) {
    JsonlWriter out(path);
    for (const auto& record : records) {
        json rec;
        rec["id"] = record.question_id;
        rec["docs"] = json::array();
        for (const auto& doc : record.docs) rec["docs"].push_back(document_to_json(doc));
        rec["gold_doc_ids"] = record.gold_doc_ids;
        out.write(rec);
    }
}

} // namespace mrag
