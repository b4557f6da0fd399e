#include "mrag/flat_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace mrag {

FlatIndex::FlatIndex(int dim, std::vector<std::string> ids, Matrix vectors, std::string kb_name,
                     Modality modality, std::string embedder_fingerprint)
    : dim_(dim),
      ids_(std::move(ids)),
      vectors_(std::move(vectors)),
      kb_name_(std::move(kb_name)),
      modality_(modality),
      embedder_fingerprint_(std::move(embedder_fingerprint)) {
    if (vectors_.cols() != dim_) throw Error("flat index: vector block width does not match dim");
    if (static_cast<size_t>(vectors_.rows()) != ids_.size())
        throw Error("flat index: id count does not match row count");
    for (Eigen::Index r = 0; r < vectors_.rows(); ++r) {
        float n = vectors_.row(r).norm();
        if (std::abs(n - 1.0f) > 1e-6f)
            throw Error("flat index: row for \"" + ids_[static_cast<size_t>(r)] +
                        "\" is not unit-norm");
    }
}

FlatIndex build_index(const KnowledgeBase& kb, const EmbedderConfig& embedder) {
    if (kb.empty()) throw Error("build_index: knowledge base \"" + kb.name() + "\" is empty");
    embedder.validate();

    FlatIndex::Matrix vectors(static_cast<Eigen::Index>(kb.size()), embedder.dim);
    std::vector<std::string> ids;
    ids.reserve(kb.size());

    // Batch through the embedder so remote backends get max_batch-sized posts.
    std::vector<EmbeddingVector> embedded;
    try {
        embedded = embed_documents(embedder, kb.documents());
    } catch (const Error&) {
        // retry one-by-one to name the offending document
        for (const Document& doc : kb.documents()) {
            try {
                embed_document(embedder, doc);
            } catch (const Error& e) {
                throw Error("build_index: embedding failed for document \"" + doc.id +
                            "\": " + e.what());
            }
        }
        throw;
    }
    for (size_t i = 0; i < kb.size(); ++i) {
        vectors.row(static_cast<Eigen::Index>(i)) = embedded[i].transpose();
        ids.push_back(kb.documents()[i].id);
    }
    return FlatIndex(embedder.dim, std::move(ids), std::move(vectors), kb.name(), kb.modality(),
                     embedder.fingerprint());
}

std::vector<ScoredDoc> search(const FlatIndex& index, const EmbeddingVector& query, int k) {
    if (k < 1) throw Error("search: k must be >= 1");
    if (query.size() != index.dim())
        throw Error("search: query dim " + std::to_string(query.size()) +
                    " does not match index dim " + std::to_string(index.dim()));

    // double accumulation keeps near-tie ordering independent of SIMD
    // summation order, so results are reproducible and oracle-checkable
    Eigen::VectorXd qd = query.cast<double>();
    Eigen::VectorXd scores(index.size());
    for (Eigen::Index r = 0; r < index.size(); ++r)
        scores[r] = index.vectors().row(r).cast<double>().dot(qd);
    const auto n = index.size();
    auto take = static_cast<Eigen::Index>(std::min<int64_t>(k, n));

    std::vector<Eigen::Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::partial_sort(order.begin(), order.begin() + take, order.end(),
                      [&](Eigen::Index a, Eigen::Index b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return a < b; // equal scores: earliest insertion wins
                      });

    std::vector<ScoredDoc> out;
    out.reserve(static_cast<size_t>(take));
    for (Eigen::Index i = 0; i < take; ++i) {
        Eigen::Index row = order[static_cast<size_t>(i)];
        out.push_back({index.ids()[static_cast<size_t>(row)],
                       static_cast<float>(std::clamp(scores[row], -1.0, 1.0)),
                       static_cast<int>(i) + 1});
    }
    return out;
}

namespace {

constexpr char kMagic[8] = {'M', 'R', 'A', 'G', 'F', 'L', 'A', 'T'};
constexpr uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "index files are little-endian; big-endian hosts are unsupported");

void write_u32(std::ostream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

} // namespace

void save_index(const FlatIndex& index, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open index file for writing: " + path);

    nlohmann::ordered_json manifest;
    manifest["kb_name"] = index.kb_name();
    manifest["modality"] = to_string(index.modality());
    manifest["dim"] = index.dim();
    manifest["count"] = index.size();
    manifest["embedder_fingerprint"] = index.embedder_fingerprint();
    std::string manifest_str = manifest.dump();

    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kVersion);
    write_u32(out, static_cast<uint32_t>(manifest_str.size()));
    out.write(manifest_str.data(), static_cast<std::streamsize>(manifest_str.size()));
    out.write(reinterpret_cast<const char*>(index.vectors().data()),
              static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(index.size()) *
                                           static_cast<size_t>(index.dim())));
    for (const std::string& id : index.ids()) {
        write_u32(out, static_cast<uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
    }
    if (!out) throw Error("write failed: " + path);
}

FlatIndex load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open index file: " + path);

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw Error("not an index file (bad magic): " + path);
    uint32_t version = read_u32(in);
    if (version != kVersion)
        throw Error("unsupported index version " + std::to_string(version) + " in " + path);

    uint32_t manifest_len = read_u32(in);
    std::string manifest_str(manifest_len, '\0');
    in.read(manifest_str.data(), manifest_len);
    if (!in) throw Error("truncated index manifest: " + path);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(manifest_str);
    } catch (const std::exception& e) {
        throw Error("corrupt index manifest in " + path + ": " + e.what());
    }

    int dim = manifest.at("dim").get<int>();
    auto count = manifest.at("count").get<Eigen::Index>();
    FlatIndex::Matrix vectors(count, dim);
    in.read(reinterpret_cast<char*>(vectors.data()),
            static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(count) *
                                         static_cast<size_t>(dim)));
    if (!in) throw Error("truncated vector block: " + path);

    std::vector<std::string> ids;
    ids.reserve(static_cast<size_t>(count));
    for (Eigen::Index i = 0; i < count; ++i) {
        uint32_t len = read_u32(in);
        std::string id(len, '\0');
        in.read(id.data(), len);
        if (!in) throw Error("truncated id table: " + path);
        ids.push_back(std::move(id));
    }
    return FlatIndex(dim, std::move(ids), std::move(vectors),
                     manifest.at("kb_name").get<std::string>(),
                     parse_modality(manifest.at("modality").get<std::string>()),
                     manifest.at("embedder_fingerprint").get<std::string>());
}

std::vector<Document> materialize(const IndexedKb& source, const std::vector<ScoredDoc>& hits) {
    std::vector<Document> docs;
    docs.reserve(hits.size());
    for (const ScoredDoc& hit : hits) {
        const Document* doc = source.kb->find(hit.id);
        if (!doc)
            throw Error("document \"" + hit.id + "\" is in the index but not in knowledge base \"" +
                        source.kb->name() + "\"");
        docs.push_back(*doc);
    }
    return docs;
}

IrMetrics retrieval_metrics(const RunFile& runs, const QrelFile& qrels, int k) {
    if (k < 1) throw Error("retrieval_metrics: k must be >= 1");
    IrMetrics m;
    m.k = k;
    for (const auto& [query, ranked] : runs) {
        {
            std::set<std::string> seen;
            for (const auto& id : ranked)
                if (!seen.insert(id).second)
                    throw Error("retrieval_metrics: duplicate id \"" + id + "\" in run for query \"" +
                                query + "\"");
        }
        auto it = qrels.find(query);
        if (it == qrels.end())
            throw Error("retrieval_metrics: query \"" + query + "\" has no qrels");
        const auto& relevant = it->second;
        if (relevant.empty())
            throw Error("retrieval_metrics: query \"" + query + "\" has an empty relevant set");

        size_t depth = std::min<size_t>(static_cast<size_t>(k), ranked.size());
        double rr = 0.0;
        size_t hits = 0;
        double ap_sum = 0.0;
        double dcg = 0.0;
        for (size_t i = 0; i < depth; ++i) {
            if (!relevant.count(ranked[i])) continue;
            ++hits;
            size_t rank = i + 1;
            if (rr == 0.0) rr = 1.0 / static_cast<double>(rank);
            ap_sum += static_cast<double>(hits) / static_cast<double>(rank);
            dcg += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
        }
        size_t ideal = std::min<size_t>(relevant.size(), static_cast<size_t>(k));
        double idcg = 0.0;
        for (size_t i = 1; i <= ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 1.0);

        m.mrr += rr;
        m.recall += static_cast<double>(hits) / static_cast<double>(relevant.size());
        m.map += ap_sum / static_cast<double>(ideal);
        m.ndcg += dcg / idcg;
        ++m.num_queries;
    }
    if (m.num_queries == 0) throw Error("retrieval_metrics: no queries in run file");
    m.mrr /= static_cast<double>(m.num_queries);
    m.recall /= static_cast<double>(m.num_queries);
    m.map /= static_cast<double>(m.num_queries);
    m.ndcg /= static_cast<double>(m.num_queries);
    return m;
}

} // namespace mrag
