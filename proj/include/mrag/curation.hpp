#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mrag/embedding.hpp"
#include "mrag/eval.hpp"
#include "mrag/flat_index.hpp"
#include "mrag/generation.hpp"
#include "mrag/hashing.hpp"
#include "mrag/router.hpp"

namespace mrag {

struct GoldDocIds {
    std::vector<std::string> visual;
    std::vector<std::string> textual;
};

struct QAPair {
    std::string id;
    std::string question;
    std::optional<std::string> image_path;
    std::vector<std::string> golds; // non-empty answer alternatives
    std::optional<GoldDocIds> gold_doc_ids;
    std::optional<bool> parametric; // mock fixture flag
};

// Quality of the three candidate strategies for one pair: answer directly,
// answer with visual retrievals, answer with textual retrievals.
struct StrategyScores {
    double s_na = 0.0;
    double s_vis = 0.0;
    double s_text = 0.0;
    std::string r_na;
    std::string r_vis;
    std::string r_text;
};

struct DanceExample {
    std::string question;
    std::optional<std::string> image_path;
    Modality modality; // the challenging modality
    std::vector<Document> docs;
    std::string answer;
    bool tie_broken = false;
};

struct NoiseRecord {
    std::string question_id;
    std::vector<Document> docs; // exactly 5: gold docs + fillers, shuffled
    std::vector<std::string> gold_doc_ids;
};

struct SelfAssessDeps {
    IndexedKb visual;
    IndexedKb textual;
    EmbedderConfig embedder;
    GeneratorConfig generator;
    DatasetStyle dataset_style = DatasetStyle::SentenceAnswer;
    int k = 3;
    Metric metric = Metric::F1;
    int parallelism = 1; // pair- and strategy-level fan-out cap
    uint64_t seed = 0;   // per-pair rng seed = seed ^ stable_hash(pair id)
};

// Generates a response under each strategy, scores each against the golds
// with the configured metric, and records all three responses. Strategy
// generations run concurrently when deps.parallelism > 1; results merge by
// strategy name so concurrency never changes the output.
StrategyScores self_assess(const QAPair& qa, const SelfAssessDeps& deps);

// argmax over (s_na, s_vis, s_text); exact ties go to the earliest label in
// tie_order (default prefers skipping retrieval, the cheapest action).
Decision label_windsock(const StrategyScores& scores,
                        const std::vector<Decision>& tie_order = kDefaultLabelSet);

enum class SelectionStrategy {
    Challenging, // argmin over (s_vis, s_text)
    Easy,        // argmax variant
    Random       // coin flip
};

// Picks the tuning modality from the retrieval scores only (s_na is never
// consulted). Exact ties are broken uniformly by rng with tie_broken=true.
std::pair<Modality, bool> select_challenging_modality(
    const StrategyScores& scores, SplitMix64& rng,
    SelectionStrategy strategy = SelectionStrategy::Challenging);

struct LedgerRow {
    std::string id;
    std::string question;
    StrategyScores scores;
    Decision label;
};

struct SkipRecord {
    std::string id;
    std::string reason;
};

struct WindsockBuildResult {
    std::vector<WindsockExample> examples;
    std::vector<LedgerRow> ledger;
    std::vector<SkipRecord> skips;
};

// Maps self_assess + label_windsock over the set. Failed pairs become skip
// records; |examples| + |skips| = |qaset| always.
WindsockBuildResult build_windsock_dataset(const std::vector<QAPair>& qaset,
                                           const SelfAssessDeps& deps,
                                           const std::vector<Decision>& tie_order = kDefaultLabelSet);

struct DanceBuildResult {
    std::vector<DanceExample> examples;
    std::vector<SkipRecord> skips;
};

// Per pair: self-assess, pick the challenging modality, retrieve its top-k
// and emit (question, retrieved docs, first gold answer).
DanceBuildResult build_dance_dataset(const std::vector<QAPair>& qaset, const SelfAssessDeps& deps,
                                     SelectionStrategy strategy = SelectionStrategy::Challenging);

// Pads each pair's gold documents (the ids listed for kb's modality; 1 or 2
// of them) with uniformly sampled non-gold documents to exactly 5, then
// shuffles. Sampling and shuffling use a per-pair rng derived from seed.
std::vector<NoiseRecord> build_noise_set(const std::vector<QAPair>& qaset, const KnowledgeBase& kb,
                                         uint64_t seed);

// Line-delimited file formats (see README for field lists).
std::vector<QAPair> load_qa_pairs(const std::string& path);
void write_windsock_dataset(const std::vector<WindsockExample>& examples, const std::string& path);
std::vector<WindsockExample> load_windsock_dataset(const std::string& path);
void write_ledger(const WindsockBuildResult& result, const std::string& path);
void write_dance_dataset(const DanceBuildResult& result, const std::string& path);
void write_noise_set(const std::vector<NoiseRecord>& records, const std::string& path);

} // namespace mrag
