#include "mrag/kb.hpp"

#include <filesystem>
#include <iostream>

#include "mrag/jsonl.hpp"

namespace mrag {

std::string to_string(Modality m) {
    return m == Modality::Visual ? "visual" : "textual";
}

Modality parse_modality(const std::string& s) {
    if (s == "visual") return Modality::Visual;
    if (s == "textual") return Modality::Textual;
    throw Error("unknown modality \"" + s + "\" (expected \"visual\" or \"textual\")");
}

void validate_document(const Document& doc, const std::string& context) {
    auto fail = [&](const std::string& msg) {
        throw Error(context.empty() ? msg : context + ": " + msg);
    };
    if (doc.id.empty()) fail("document id must be non-empty");
    if (doc.text.empty()) fail("document \"" + doc.id + "\" has empty text");
    if (doc.modality == Modality::Visual) {
        if (!doc.image_path || doc.image_path->empty())
            fail("visual document \"" + doc.id + "\" requires a non-empty image_path");
    } else {
        if (doc.image_path)
            fail("textual document \"" + doc.id + "\" must not carry an image_path");
    }
}

void KnowledgeBase::add(Document doc, const std::string& context) {
    validate_document(doc, context);
    if (doc.modality != modality_) {
        std::string msg = "document \"" + doc.id + "\" is " + mrag::to_string(doc.modality) +
                          " but knowledge base \"" + name_ + "\" is " + mrag::to_string(modality_);
        throw Error(context.empty() ? msg : context + ": " + msg);
    }
    auto [it, inserted] = by_id_.emplace(doc.id, docs_.size());
    if (!inserted) {
        std::string msg = "duplicate document id \"" + doc.id + "\"";
        throw Error(context.empty() ? msg : context + ": " + msg);
    }
    docs_.push_back(std::move(doc));
}

namespace {

const char* kKnownFields[] = {"id", "modality", "text", "image_path", "source"};

bool is_known_field(const std::string& key) {
    for (const char* f : kKnownFields)
        if (key == f) return true;
    return false;
}

std::string require_string(const json& rec, const char* field, const std::string& ctx) {
    auto it = rec.find(field);
    if (it == rec.end())
        throw Error(ctx + ": missing required field \"" + std::string(field) + "\"");
    if (!it->is_string())
        throw Error(ctx + ": field \"" + std::string(field) + "\" must be a string");
    return it->get<std::string>();
}

} // namespace

KnowledgeBase load_kb(const std::string& path, Modality modality,
                      std::vector<std::string>* warnings) {
    if (!std::filesystem::exists(path)) throw Error("knowledge base file not found: " + path);
    KnowledgeBase kb(modality, std::filesystem::path(path).stem().string());
    for_each_jsonl(path, [&](size_t line_no, const json& rec) {
        std::string ctx = path + ":" + std::to_string(line_no);
        Document doc;
        doc.id = require_string(rec, "id", ctx);
        doc.modality = parse_modality(require_string(rec, "modality", ctx));
        doc.text = require_string(rec, "text", ctx);
        if (rec.contains("image_path")) {
            if (!rec["image_path"].is_string())
                throw Error(ctx + ": field \"image_path\" must be a string");
            doc.image_path = rec["image_path"].get<std::string>();
        }
        if (rec.contains("source")) {
            if (!rec["source"].is_string())
                throw Error(ctx + ": field \"source\" must be a string");
            doc.source = rec["source"].get<std::string>();
        }
        for (auto it = rec.begin(); it != rec.end(); ++it) {
            if (!is_known_field(it.key())) {
                std::string w = ctx + ": ignoring unknown field \"" + it.key() + "\"";
                if (warnings)
                    warnings->push_back(w);
                else
                    std::cerr << "warning: " << w << "\n";
            }
        }
        kb.add(std::move(doc), ctx);
    });
    return kb;
}

void save_kb(const KnowledgeBase& kb, const std::string& path) {
    JsonlWriter out(path);
    for (const Document& doc : kb.documents()) {
        json rec;
        rec["id"] = doc.id;
        rec["modality"] = to_string(doc.modality);
        rec["text"] = doc.text;
        if (doc.image_path) rec["image_path"] = *doc.image_path;
        if (doc.source) rec["source"] = *doc.source;
        out.write(rec);
    }
}

KbStats kb_stats(const KnowledgeBase& kb) {
    KbStats stats;
    stats.count = kb.size();
    stats.modality = kb.modality();
    for (const Document& doc : kb.documents()) stats.total_text_bytes += doc.text.size();
    return stats;
}

} // namespace mrag
