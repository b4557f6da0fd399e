#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mrag/curation.hpp"
#include "mrag/router.hpp"

namespace mrag {

struct Query {
    std::string id;
    std::string text;
    std::optional<std::string> image_path;
};

struct PipelineConfig {
    const RouterModel* router = nullptr;        // used unless override_decision is set
    std::optional<Decision> override_decision;  // fixed-strategy mode
    IndexedKb visual;
    IndexedKb textual;
    EmbedderConfig embedder;
    GeneratorConfig generator;
    DatasetStyle dataset_style = DatasetStyle::SentenceAnswer;
    int k = 3;
    Metric metric = Metric::F1;
    std::vector<Decision> label_set = kDefaultLabelSet; // enabled strategies
    int parallelism = 1;

    // Checks that a decision source exists and that each index was built in
    // the configured embedder's vector space (fingerprint match).
    void validate() const;
};

struct StageTimings {
    double route_ms = 0.0;
    double embed_ms = 0.0;
    double retrieve_ms = 0.0;
    double generate_ms = 0.0;
    double total_ms = 0.0;
};

struct PipelineTrace {
    std::string query_id;
    Decision decision;
    std::string decision_source; // "router" or "override"
    std::vector<ScoredDoc> retrieved;
    std::string response;
    StageTimings timings;
    int retrieval_calls = 0; // number of index searches (0 for NA, 2 for Hybrid)
};

// One end-to-end pass: decide, optionally embed + retrieve, generate. The
// query is embedded only after a retrieval decision, never for NA.
PipelineTrace answer(const PipelineConfig& cfg, const Query& query);

struct StrategyStats {
    size_t count = 0;
    double ratio = 0.0;
    double metric_mean = 0.0;
    StageTimings mean_timings;
};

struct PipelineReport {
    Metric metric = Metric::F1;
    double overall_metric = 0.0;
    std::map<Decision, StrategyStats> per_decision;
    StageTimings mean_timings;
    size_t total_retrieval_calls = 0;
    size_t answered = 0;
    std::vector<SkipRecord> skips;
    std::vector<PipelineTrace> traces; // input order, answered queries only
};

// Answers every pair, scores responses against the golds, and aggregates
// decision ratios, per-decision quality and mean stage latencies.
PipelineReport evaluate_pipeline(const PipelineConfig& cfg, const std::vector<QAPair>& qaset);

// Runs evaluate_pipeline once per enabled fixed strategy plus once with the
// router; rows come back in label-set order with "router" last.
std::vector<std::pair<std::string, PipelineReport>> compare_strategies(
    const PipelineConfig& cfg, const std::vector<QAPair>& qaset);

// Report serialization for the CLI: a structured JSON document and a
// human-readable table.
std::string report_to_json(const PipelineReport& report);
std::string report_table(const std::vector<std::pair<std::string, PipelineReport>>& rows);
std::string trace_to_json(const PipelineTrace& trace);

} // namespace mrag
