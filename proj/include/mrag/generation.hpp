#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mrag/error.hpp"
#include "mrag/kb.hpp"

namespace mrag {

// sentence-answer asks for a full sentence, short-answer for a word or
// phrase; combined with with_context this selects one of four fixed
// templates.
enum class DatasetStyle { SentenceAnswer, ShortAnswer };

std::string to_string(DatasetStyle s);
DatasetStyle parse_dataset_style(const std::string& s);

struct PromptStyle {
    DatasetStyle dataset_style = DatasetStyle::SentenceAnswer;
    bool with_context = false;
};

enum class GeneratorBackend { Remote, Mock };

struct GeneratorConfig {
    GeneratorBackend backend = GeneratorBackend::Mock;
    std::optional<std::string> endpoint;   // remote only
    std::optional<std::string> model_name; // remote only
    double temperature = 0.0;              // greedy by default, for reproducible scoring
    int max_tokens = 256;
    int timeout_ms = 60000;
    std::optional<uint64_t> mock_seed; // mock only
    int max_in_flight = 4;
    int retries = 2;
    int backoff_ms = 100;
    std::string auth_env = "MRAG_GENERATOR_TOKEN"; // bearer token read from this env var

    void validate() const;
};

struct GenerationResult {
    std::string text;
    double latency_ms = 0.0;
    std::optional<int> token_count;
    std::string backend;
};

// Instantiates the template selected by style: the question is spliced in
// verbatim and, for with_context styles, the documents' texts are joined by
// blank lines, each block prefixed "Doc i (id): ". Visual documents
// contribute "Image: <image_path>" followed by their caption. docs must be
// present and non-empty iff style.with_context.
std::string render_prompt(const std::string& question,
                          const std::optional<std::vector<Document>>& docs, PromptStyle style);

// Obtains a completion for the prompt. The remote backend performs one
// chat-completion round trip and returns the first candidate's text
// verbatim. The mock backend is the offline test oracle; its contract:
//
//   - A fixture question embeds `GOLD[<doc_id>]=<answer>` as the last
//     element of its line, and the token `PARAMETRIC` when the pair is
//     answerable without retrieval.
//   - With a context block: the mock answers <answer> iff <doc_id> is among
//     the context's document ids, else "unknown".
//   - Without a context block: <answer> iff PARAMETRIC is present, else
//     "unknown".
GenerationResult generate(const GeneratorConfig& cfg, const std::string& prompt,
                          const std::vector<std::string>& image_paths = {});

} // namespace mrag
