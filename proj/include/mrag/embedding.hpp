#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mrag/error.hpp"
#include "mrag/kb.hpp"

namespace mrag {

using EmbeddingVector = Eigen::VectorXf;

enum class EmbedderBackend { Hash, Remote };

// The hash backend is a deterministic offline stand-in: it feature-hashes
// character 3-grams into dim buckets with a seeded sign hash and normalizes.
// The remote backend posts batches to an embedding service and trusts its
// advertised dimension.
struct EmbedderConfig {
    EmbedderBackend backend = EmbedderBackend::Hash;
    int dim = 256;
    std::optional<std::string> endpoint;    // remote only
    std::optional<std::string> model_name;  // remote only
    std::optional<uint64_t> seed;           // hash only
    int timeout_ms = 30000;
    int max_batch = 64;
    int max_in_flight = 4;
    int retries = 2;
    int backoff_ms = 100;

    void validate() const;

    // Identifies the vector space an index was built in; stored in index
    // manifests and checked against the query-side config at load time.
    std::string fingerprint() const;
};

// Direction-preserving normalization to unit length. Works on any Eigen
// dense expression; throws on the zero vector.
template <typename Derived>
auto l2_normalize(const Eigen::MatrixBase<Derived>& v) {
    using Scalar = typename Derived::Scalar;
    using Plain = typename Derived::PlainObject;
    Scalar n = v.norm();
    if (!(n > Scalar(0))) throw Error("l2_normalize: zero vector");
    Plain out = v / n;
    return out;
}

// Cosine similarity of two unit vectors (= dot product), clamped to [-1, 1]
// against rounding. Symmetric by construction.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_sim(const Eigen::MatrixBase<DerivedA>& a,
                                     const Eigen::MatrixBase<DerivedB>& b) {
    if (a.size() != b.size())
        throw Error("cosine_sim: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
    using Scalar = typename DerivedA::Scalar;
    Scalar d = a.dot(b);
    return std::clamp(d, Scalar(-1), Scalar(1));
}

// Embeds free text. Hash backend is deterministic in (seed, text).
EmbeddingVector embed_text(const EmbedderConfig& cfg, const std::string& text);

// Embeds text with an optional image reference. The hash backend embeds the
// text alone; the remote backend forwards the image path to the service.
EmbeddingVector embed_input(const EmbedderConfig& cfg, const std::string& text,
                            const std::optional<std::string>& image_path);

// Embeds doc.text; visual documents additionally pass their image_path to a
// remote backend.
EmbeddingVector embed_document(const EmbedderConfig& cfg, const Document& doc);

// Batch form used by index building. Remote batches are capped at
// cfg.max_batch per request; output order matches input order.
std::vector<EmbeddingVector> embed_documents(const EmbedderConfig& cfg,
                                             const std::vector<Document>& docs);

} // namespace mrag
