#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mrag/embedding.hpp"
#include "mrag/kb.hpp"

namespace mrag {

struct ScoredDoc {
    std::string id;
    float score = 0.0f; // cosine similarity in [-1, 1]
    int rank = 0;       // 1-based
};

// Exhaustive-scan index over unit rows. No approximation: search is a dense
// matrix-vector product followed by an exact top-k selection, so results can
// be checked against an independent brute-force oracle.
class FlatIndex {
public:
    using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    FlatIndex(int dim, std::vector<std::string> ids, Matrix vectors, std::string kb_name,
              Modality modality, std::string embedder_fingerprint);

    int dim() const { return dim_; }
    Eigen::Index size() const { return vectors_.rows(); }
    const std::vector<std::string>& ids() const { return ids_; }
    const Matrix& vectors() const { return vectors_; }
    const std::string& kb_name() const { return kb_name_; }
    Modality modality() const { return modality_; }
    const std::string& embedder_fingerprint() const { return embedder_fingerprint_; }

private:
    int dim_;
    std::vector<std::string> ids_;
    Matrix vectors_; // one unit row per document, knowledge-base order
    std::string kb_name_;
    Modality modality_;
    std::string embedder_fingerprint_;
};

// Embeds every document and stacks the unit vectors in knowledge-base order.
// Deterministic for the hash backend; aborts naming the offending document
// on embedding failure.
FlatIndex build_index(const KnowledgeBase& kb, const EmbedderConfig& embedder);

// Exact top-k by descending cosine; ties broken by ascending insertion order.
// Returns min(k, |index|) results with consecutive 1-based ranks.
std::vector<ScoredDoc> search(const FlatIndex& index, const EmbeddingVector& query, int k);

// Binary file layout: magic + version, a JSON manifest, the raw row-major
// little-endian float32 block, then the id table.
void save_index(const FlatIndex& index, const std::string& path);
FlatIndex load_index(const std::string& path);

// A knowledge base with its index; the unit other modules retrieve from.
struct IndexedKb {
    const KnowledgeBase* kb = nullptr;
    const FlatIndex* index = nullptr;
};

// Looks up the documents behind search hits. Throws if an id is missing
// from the knowledge base (index/KB mismatch).
std::vector<Document> materialize(const IndexedKb& source, const std::vector<ScoredDoc>& hits);

struct IrMetrics {
    double mrr = 0.0;
    double recall = 0.0;
    double map = 0.0;
    double ndcg = 0.0;
    int k = 0;
    size_t num_queries = 0;
};

using RunFile = std::map<std::string, std::vector<std::string>>; // query -> ranked ids
using QrelFile = std::map<std::string, std::set<std::string>>;  // query -> relevant ids

// Macro-averaged MRR@k / Recall@k / mAP@k / NDCG@k with binary relevance.
// NDCG gain is 1/log2(rank+1), normalized by the ideal DCG; AP@k normalizes
// by min(|relevant|, k). Every run query must have a non-empty qrel set.
IrMetrics retrieval_metrics(const RunFile& runs, const QrelFile& qrels, int k);

} // namespace mrag
