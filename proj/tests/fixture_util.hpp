#pragma once

// Shared fixtures for the unit and acceptance suites: a fully offline mock
// world (hash embedder + mock generator + tiny knowledge bases) engineered
// so every pair's optimal strategy is known by construction.

#include <optional>
#include <string>
#include <vector>

#include "mrag/curation.hpp"
#include "mrag/flat_index.hpp"
#include "mrag/pipeline.hpp"
#include "mrag/router.hpp"

namespace fixtures {

std::string fixture_path(const std::string& name);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    std::string path(const std::string& name) const { return dir_ + "/" + name; }
    const std::string& dir() const { return dir_; }

private:
    std::string dir_;
};

// Deterministic pronounceable pseudo-word, distinct across keys.
std::string pseudo_word(uint64_t key);

struct MockWorld {
    mrag::EmbedderConfig embedder;   // hash, dim 256, seed 7
    mrag::GeneratorConfig generator; // mock
    mrag::KnowledgeBase visual_kb{mrag::Modality::Visual, "visual_fixture"};
    mrag::KnowledgeBase textual_kb{mrag::Modality::Textual, "textual_fixture"};
    std::optional<mrag::FlatIndex> visual_index;
    std::optional<mrag::FlatIndex> textual_index;

    // In order: the parametric pairs, then visual-gold, then textual-gold.
    // Expected windsock labels are NA / Visual / Textual respectively.
    std::vector<mrag::QAPair> qaset;
    std::vector<mrag::Decision> expected_labels;

    mrag::IndexedKb visual() const { return {&visual_kb, &*visual_index}; }
    mrag::IndexedKb textual() const { return {&textual_kb, &*textual_index}; }
    mrag::SelfAssessDeps deps(int parallelism = 1) const;
    mrag::PipelineConfig pipeline(const mrag::RouterModel* router = nullptr,
                                  int parallelism = 1) const;
};

// Builds KBs, indexes and QA pairs. Question cores embed the routing
// keywords ("picture" for visual pairs, "article" for textual) so a
// keyword-trained router reproduces the expected labels.
MockWorld make_mock_world(size_t num_parametric, size_t num_visual, size_t num_textual);

// Synthetic 3-class routing set: filler words plus one planted keyword
// ("picture" -> Visual, "article" -> Textual, none -> NA), n/3 per class.
// Filler usage is exactly class-balanced so the keyword is the only
// systematic signal.
std::vector<mrag::WindsockExample> planted_keyword_set(size_t n, uint64_t seed);

// Routing set shaped like the mock world's question cores ("what does the
// <slot> of ... say about ..."), so a router trained on it routes MockWorld
// queries. The slot holds the planted keyword, or a unique pseudo-word for
// NA examples.
std::vector<mrag::WindsockExample> scaffold_keyword_set(size_t n, uint64_t seed);

} // namespace fixtures
