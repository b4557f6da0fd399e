#include "mrag/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "mrag/jsonl.hpp"
#include "mrag/parallel.hpp"

namespace mrag {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(Clock::now() -
                                                                                 start)
        .count();
}

} // namespace

void PipelineConfig::validate() const {
    if (!router && !override_decision)
        throw Error("pipeline: either a router model or an override decision is required");
    if (override_decision &&
        std::find(label_set.begin(), label_set.end(), *override_decision) == label_set.end())
        throw Error("pipeline: override decision \"" + *override_decision +
                    "\" is not in the label set");
    embedder.validate();
    generator.validate();
    if (k < 1) throw Error("pipeline: k must be >= 1");
    auto check_index = [&](const IndexedKb& source, const char* name) {
        if (!source.kb || !source.index)
            throw Error(std::string("pipeline: missing ") + name + " knowledge base or index");
        if (source.index->embedder_fingerprint() != embedder.fingerprint())
            throw Error(std::string("pipeline: ") + name + " index was built with embedder \"" +
                        source.index->embedder_fingerprint() + "\" but the configured embedder is \"" +
                        embedder.fingerprint() + "\"");
    };
    check_index(visual, "visual");
    check_index(textual, "textual");
}

PipelineTrace answer(const PipelineConfig& cfg, const Query& query) {
    if (query.text.empty()) throw Error("pipeline: empty query text");
    auto total_start = Clock::now();

    PipelineTrace trace;
    trace.query_id = query.id;

    if (cfg.override_decision) {
        trace.decision = *cfg.override_decision;
        trace.decision_source = "override";
    } else {
        auto route_start = Clock::now();
        try {
            trace.decision = route(*cfg.router, query.text).decision;
        } catch (const std::exception& e) {
            throw Error("stage route: " + std::string(e.what()));
        }
        trace.timings.route_ms = ms_since(route_start);
        trace.decision_source = "router";
    }

    std::vector<Document> context;
    auto retrieve_from = [&](const IndexedKb& source, const EmbeddingVector& q) {
        auto retrieve_start = Clock::now();
        auto hits = search(*source.index, q, cfg.k);
        trace.timings.retrieve_ms += ms_since(retrieve_start);
        ++trace.retrieval_calls;
        auto docs = materialize(source, hits);
        context.insert(context.end(), docs.begin(), docs.end());
        trace.retrieved.insert(trace.retrieved.end(), hits.begin(), hits.end());
    };

    if (trace.decision != "NA") {
        EmbeddingVector q;
        auto embed_start = Clock::now();
        try {
            q = embed_input(cfg.embedder, query.text, query.image_path);
        } catch (const std::exception& e) {
            throw Error("stage embed: " + std::string(e.what()));
        }
        trace.timings.embed_ms = ms_since(embed_start);

        try {
            if (trace.decision == "Visual") {
                retrieve_from(cfg.visual, q);
            } else if (trace.decision == "Textual") {
                retrieve_from(cfg.textual, q);
            } else if (trace.decision == "Hybrid") {
                retrieve_from(cfg.visual, q); // visual first, then textual
                retrieve_from(cfg.textual, q);
            } else {
                throw Error("no retrieval route for decision \"" + trace.decision + "\"");
            }
        } catch (const Error& e) {
            throw Error("stage retrieve: " + std::string(e.what()));
        }
        // ranks restart per index in a hybrid trace; re-rank the merged list
        for (size_t i = 0; i < trace.retrieved.size(); ++i)
            trace.retrieved[i].rank = static_cast<int>(i) + 1;
    }

    auto generate_start = Clock::now();
    try {
        std::string prompt =
            trace.decision == "NA"
                ? render_prompt(query.text, std::nullopt, {cfg.dataset_style, false})
                : render_prompt(query.text, context, {cfg.dataset_style, true});
        std::vector<std::string> images;
        if (query.image_path && !query.image_path->empty()) images.push_back(*query.image_path);
        trace.response = generate(cfg.generator, prompt, images).text;
    } catch (const std::exception& e) {
        throw Error("stage generate: " + std::string(e.what()));
    }
    trace.timings.generate_ms = ms_since(generate_start);
    trace.timings.total_ms = ms_since(total_start);
    return trace;
}

PipelineReport evaluate_pipeline(const PipelineConfig& cfg, const std::vector<QAPair>& qaset) {
    cfg.validate();
    if (qaset.empty()) throw Error("evaluate_pipeline: empty query set");

    struct Slot {
        bool ok = false;
        PipelineTrace trace;
        double score = 0.0;
        std::string error;
    };
    std::vector<Slot> slots(qaset.size());
    parallel_for(qaset.size(), cfg.parallelism, [&](size_t i) {
        const QAPair& qa = qaset[i];
        try {
            slots[i].trace = answer(cfg, {qa.id, qa.question, qa.image_path});
            slots[i].score = evaluate(slots[i].trace.response, qa.golds, cfg.metric).value;
            slots[i].ok = true;
        } catch (const std::exception& e) {
            slots[i].error = e.what();
        }
    });

    PipelineReport report;
    report.metric = cfg.metric;
    StageTimings sum;
    for (size_t i = 0; i < slots.size(); ++i) {
        if (!slots[i].ok) {
            report.skips.push_back({qaset[i].id, slots[i].error});
            continue;
        }
        const PipelineTrace& trace = slots[i].trace;
        auto& stats = report.per_decision[trace.decision];
        ++stats.count;
        stats.metric_mean += slots[i].score;
        stats.mean_timings.route_ms += trace.timings.route_ms;
        stats.mean_timings.embed_ms += trace.timings.embed_ms;
        stats.mean_timings.retrieve_ms += trace.timings.retrieve_ms;
        stats.mean_timings.generate_ms += trace.timings.generate_ms;
        stats.mean_timings.total_ms += trace.timings.total_ms;

        report.overall_metric += slots[i].score;
        sum.route_ms += trace.timings.route_ms;
        sum.embed_ms += trace.timings.embed_ms;
        sum.retrieve_ms += trace.timings.retrieve_ms;
        sum.generate_ms += trace.timings.generate_ms;
        sum.total_ms += trace.timings.total_ms;
        report.total_retrieval_calls += static_cast<size_t>(trace.retrieval_calls);
        ++report.answered;
        report.traces.push_back(std::move(slots[i].trace));
    }
    if (report.answered == 0) throw Error("evaluate_pipeline: every query failed");

    auto n = static_cast<double>(report.answered);
    report.overall_metric /= n;
    report.mean_timings = {sum.route_ms / n, sum.embed_ms / n, sum.retrieve_ms / n,
                           sum.generate_ms / n, sum.total_ms / n};
    for (auto& [decision, stats] : report.per_decision) {
        auto c = static_cast<double>(stats.count);
        stats.ratio = c / n;
        stats.metric_mean /= c;
        stats.mean_timings = {stats.mean_timings.route_ms / c, stats.mean_timings.embed_ms / c,
                              stats.mean_timings.retrieve_ms / c,
                              stats.mean_timings.generate_ms / c,
                              stats.mean_timings.total_ms / c};
    }
    return report;
}

std::vector<std::pair<std::string, PipelineReport>> compare_strategies(
    const PipelineConfig& cfg, const std::vector<QAPair>& qaset) {
    if (!cfg.router) throw Error("compare_strategies: a router model is required");
    std::vector<std::pair<std::string, PipelineReport>> rows;
    for (const Decision& label : cfg.label_set) {
        PipelineConfig fixed = cfg;
        fixed.override_decision = label;
        rows.emplace_back(label, evaluate_pipeline(fixed, qaset));
    }
    PipelineConfig routed = cfg;
    routed.override_decision.reset();
    rows.emplace_back("router", evaluate_pipeline(routed, qaset));
    return rows;
}

namespace {

json timings_to_json(const StageTimings& t) {
    return {{"route_ms", t.route_ms},
            {"embed_ms", t.embed_ms},
            {"retrieve_ms", t.retrieve_ms},
            {"generate_ms", t.generate_ms},
            {"retrieval_ms", t.embed_ms + t.retrieve_ms}, // embed+search combined view
            {"total_ms", t.total_ms}};
}

} // namespace

std::string report_to_json(const PipelineReport& report) {
    json doc;
    doc["metric"] = to_string(report.metric);
    doc["overall"] = report.overall_metric;
    doc["answered"] = report.answered;
    doc["total_retrieval_calls"] = report.total_retrieval_calls;
    doc["decisions"] = json::object();
    for (const auto& [decision, stats] : report.per_decision) {
        doc["decisions"][decision] = {{"count", stats.count},
                                      {"ratio", stats.ratio},
                                      {"metric_mean", stats.metric_mean},
                                      {"mean_timings", timings_to_json(stats.mean_timings)}};
    }
    doc["mean_timings"] = timings_to_json(report.mean_timings);
    doc["skips"] = json::array();
    for (const auto& skip : report.skips)
        doc["skips"].push_back({{"id", skip.id}, {"reason", skip.reason}});
    return doc.dump(2);
}

std::string report_table(const std::vector<std::pair<std::string, PipelineReport>>& rows) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-10s %8s %10s %10s %10s %10s %10s %10s\n", "strategy",
                  "n", "metric", "route_ms", "embed_ms", "search_ms", "gen_ms", "total_ms");
    out << line;
    for (const auto& [name, report] : rows) {
        std::snprintf(line, sizeof(line), "%-10s %8zu %10.4f %10.3f %10.3f %10.3f %10.3f %10.3f\n",
                      name.c_str(), report.answered, report.overall_metric,
                      report.mean_timings.route_ms, report.mean_timings.embed_ms,
                      report.mean_timings.retrieve_ms, report.mean_timings.generate_ms,
                      report.mean_timings.total_ms);
        out << line;
    }
    return out.str();
}

std::string trace_to_json(const PipelineTrace& trace) {
    json doc;
    doc["query_id"] = trace.query_id;
    doc["decision"] = trace.decision;
    doc["decision_source"] = trace.decision_source;
    doc["retrieved"] = json::array();
    for (const auto& hit : trace.retrieved)
        doc["retrieved"].push_back({{"id", hit.id}, {"score", hit.score}, {"rank", hit.rank}});
    doc["response"] = trace.response;
    doc["timings"] = timings_to_json(trace.timings);
    doc["retrieval_calls"] = trace.retrieval_calls;
    return doc.dump();
}

} // namespace mrag
