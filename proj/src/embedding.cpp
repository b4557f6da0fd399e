#include "mrag/embedding.hpp"

#include <cmath>
#include <string_view>

#include <httplib.h>
#include <json.hpp>

#include "mrag/hashing.hpp"
#include "http_util.hpp"

namespace mrag {

void EmbedderConfig::validate() const {
    if (dim <= 0) throw Error("embedder: dim must be positive");
    if (backend == EmbedderBackend::Remote) {
        if (!endpoint || endpoint->empty()) throw Error("embedder: remote backend requires an endpoint");
    } else {
        if (!seed) throw Error("embedder: hash backend requires a seed");
    }
}

std::string EmbedderConfig::fingerprint() const {
    if (backend == EmbedderBackend::Hash)
        return "hash/dim=" + std::to_string(dim) + "/seed=" + std::to_string(*seed);
    return "remote/dim=" + std::to_string(dim) + "/model=" + model_name.value_or("default");
}

namespace {

// Character 3-grams, signed feature hashing, L2 normalization. Texts shorter
// than 3 bytes contribute themselves as a single gram so every non-empty
// text maps to a nonzero vector.
EmbeddingVector hash_embed(const std::string& text, int dim, uint64_t seed) {
    EmbeddingVector v = EmbeddingVector::Zero(dim);
    auto add_gram = [&](std::string_view gram) {
        uint64_t h = stable_hash(gram, seed);
        auto bucket = static_cast<Eigen::Index>(h % static_cast<uint64_t>(dim));
        v[bucket] += (h >> 63) ? 1.0f : -1.0f;
    };
    if (text.size() < 3) {
        add_gram(text);
    } else {
        for (size_t i = 0; i + 3 <= text.size(); ++i)
            add_gram(std::string_view(text).substr(i, 3));
    }
    if (v.norm() == 0.0f) {
        // all grams cancelled in their buckets; fall back to a whole-text bucket
        v[static_cast<Eigen::Index>(stable_hash(text, mix64(seed)) % static_cast<uint64_t>(dim))] = 1.0f;
    }
    return l2_normalize(v);
}

struct RemoteInput {
    std::string text;
    std::optional<std::string> image_path;
};

std::vector<EmbeddingVector> remote_embed(const EmbedderConfig& cfg,
                                          const std::vector<RemoteInput>& inputs) {
    auto url = detail::split_url(*cfg.endpoint);
    nlohmann::json req;
    req["model"] = cfg.model_name.value_or("default");
    req["inputs"] = nlohmann::json::array();
    for (const auto& in : inputs) {
        nlohmann::json item;
        item["text"] = in.text;
        item["image_path"] = in.image_path ? nlohmann::json(*in.image_path) : nlohmann::json(nullptr);
        req["inputs"].push_back(std::move(item));
    }
    std::string body = req.dump();

    detail::InFlightGate::Guard guard(detail::InFlightGate::for_endpoint(*cfg.endpoint),
                                      cfg.max_in_flight);
    auto result = detail::with_retries(cfg.retries, cfg.backoff_ms, [&] {
        httplib::Client client(url.base);
        client.set_connection_timeout(0, cfg.timeout_ms * 1000LL);
        client.set_read_timeout(0, cfg.timeout_ms * 1000LL);
        client.set_write_timeout(0, cfg.timeout_ms * 1000LL);
        auto res = client.Post(url.path, body, "application/json");
        detail::HttpAttempt attempt;
        if (!res) {
            attempt.transport_error = httplib::to_string(res.error());
            return attempt;
        }
        attempt.transport_ok = true;
        attempt.status = res->status;
        attempt.body = res->body;
        return attempt;
    });

    if (!result.transport_ok)
        throw Error("embedding request failed: " + result.transport_error);
    if (result.status != 200)
        throw Error("embedding request failed: HTTP " + std::to_string(result.status) + ": " +
                    detail::body_excerpt(result.body));

    nlohmann::json resp;
    try {
        resp = nlohmann::json::parse(result.body);
    } catch (const std::exception& e) {
        throw Error(std::string("embedding response is not valid JSON: ") + e.what());
    }
    if (!resp.contains("vectors") || !resp["vectors"].is_array())
        throw Error("embedding response missing \"vectors\" array");
    const auto& vectors = resp["vectors"];
    if (vectors.size() != inputs.size())
        throw Error("embedding response has " + std::to_string(vectors.size()) +
                    " vectors for " + std::to_string(inputs.size()) + " inputs");

    std::vector<EmbeddingVector> out;
    out.reserve(inputs.size());
    for (const auto& vec : vectors) {
        if (!vec.is_array() || static_cast<int>(vec.size()) != cfg.dim)
            throw Error("embedding dimension mismatch: expected " + std::to_string(cfg.dim) +
                        ", got " + std::to_string(vec.size()));
        EmbeddingVector v(cfg.dim);
        for (int i = 0; i < cfg.dim; ++i) {
            float x = vec[i].get<float>();
            if (!std::isfinite(x)) throw Error("embedding response contains a non-finite value");
            v[i] = x;
        }
        out.push_back(l2_normalize(v));
    }
    return out;
}

} // namespace

EmbeddingVector embed_input(const EmbedderConfig& cfg, const std::string& text,
                            const std::optional<std::string>& image_path) {
    cfg.validate();
    if (text.empty()) throw Error("embed: empty text");
    if (cfg.backend == EmbedderBackend::Hash) return hash_embed(text, cfg.dim, *cfg.seed);
    return remote_embed(cfg, {{text, image_path}}).front();
}

EmbeddingVector embed_text(const EmbedderConfig& cfg, const std::string& text) {
    return embed_input(cfg, text, std::nullopt);
}

EmbeddingVector embed_document(const EmbedderConfig& cfg, const Document& doc) {
    return embed_input(cfg, doc.text,
                       doc.modality == Modality::Visual ? doc.image_path : std::nullopt);
}

std::vector<EmbeddingVector> embed_documents(const EmbedderConfig& cfg,
                                             const std::vector<Document>& docs) {
    cfg.validate();
    std::vector<EmbeddingVector> out;
    out.reserve(docs.size());
    if (cfg.backend == EmbedderBackend::Hash) {
        for (const Document& doc : docs) out.push_back(embed_document(cfg, doc));
        return out;
    }
    size_t batch = std::max(1, cfg.max_batch);
    for (size_t start = 0; start < docs.size(); start += batch) {
        size_t end = std::min(docs.size(), start + batch);
        std::vector<RemoteInput> inputs;
        inputs.reserve(end - start);
        for (size_t i = start; i < end; ++i) {
            if (docs[i].text.empty()) throw Error("embed: empty text in document \"" + docs[i].id + "\"");
            inputs.push_back({docs[i].text, docs[i].modality == Modality::Visual
                                                ? docs[i].image_path
                                                : std::nullopt});
        }
        auto vectors = remote_embed(cfg, inputs);
        for (auto& v : vectors) out.push_back(std::move(v));
    }
    return out;
}

} // namespace mrag
