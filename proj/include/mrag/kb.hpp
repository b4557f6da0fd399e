#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mrag/error.hpp"

namespace mrag {

enum class Modality { Visual, Textual };

std::string to_string(Modality m);
Modality parse_modality(const std::string& s);

// One knowledge-base entry: a caption + image path for visual documents,
// a text chunk for textual ones. The text field is the embeddable surface
// and must be non-empty for both modalities.
struct Document {
    std::string id;
    Modality modality = Modality::Textual;
    std::string text;
    std::optional<std::string> image_path;
    std::optional<std::string> source;
};

// Modality-homogeneous, immutable after load. Duplicate ids are rejected at
// ingest; lookup by id is O(1).
class KnowledgeBase {
public:
    KnowledgeBase(Modality modality, std::string name)
        : modality_(modality), name_(std::move(name)) {}

    Modality modality() const { return modality_; }
    const std::string& name() const { return name_; }
    const std::vector<Document>& documents() const { return docs_; }
    size_t size() const { return docs_.size(); }
    bool empty() const { return docs_.empty(); }

    // Throws on duplicate id or modality mismatch. context is prepended to
    // error messages (e.g. "file.jsonl:12").
    void add(Document doc, const std::string& context = "");

    const Document* find(const std::string& id) const {
        auto it = by_id_.find(id);
        return it == by_id_.end() ? nullptr : &docs_[it->second];
    }

private:
    Modality modality_;
    std::string name_;
    std::vector<Document> docs_;
    std::unordered_map<std::string, size_t> by_id_;
};

struct KbStats {
    size_t count = 0;
    Modality modality = Modality::Textual;
    size_t total_text_bytes = 0;
};

// Validates a single document against the modality/image_path coupling rules.
// Throws Error with a message prefixed by context on any violation.
void validate_document(const Document& doc, const std::string& context = "");

// Loads a line-delimited record file (one JSON object per line). Document
// order is file order. Unknown fields are ignored; if warnings is non-null a
// note per unknown field is appended there, otherwise they go to stderr.
KnowledgeBase load_kb(const std::string& path, Modality modality,
                      std::vector<std::string>* warnings = nullptr);

void save_kb(const KnowledgeBase& kb, const std::string& path);

KbStats kb_stats(const KnowledgeBase& kb);

} // namespace mrag
