#include "mrag/generation.hpp"

#include <chrono>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "http_util.hpp"

namespace mrag {

std::string to_string(DatasetStyle s) {
    return s == DatasetStyle::SentenceAnswer ? "sentence-answer" : "short-answer";
}

DatasetStyle parse_dataset_style(const std::string& s) {
    if (s == "sentence-answer") return DatasetStyle::SentenceAnswer;
    if (s == "short-answer") return DatasetStyle::ShortAnswer;
    throw Error("unknown dataset style \"" + s +
                "\" (expected \"sentence-answer\" or \"short-answer\")");
}

void GeneratorConfig::validate() const {
    if (backend == GeneratorBackend::Remote) {
        if (!endpoint || endpoint->empty()) throw Error("generator: remote backend requires an endpoint");
        if (!model_name || model_name->empty())
            throw Error("generator: remote backend requires a model_name");
    } else {
        if (!mock_seed) throw Error("generator: mock backend requires a mock_seed");
    }
}

namespace {

constexpr char kSentenceWithContext[] =
    "You are a helpful question answerer who can provide an answer given a question and relevant "
    "context.\n"
    "\n"
    "Question: {question}\n"
    "Context: {context}\n"
    "Provide a single sentence that answers the question based on the given context.\n"
    "\n"
    "Answer: ";

constexpr char kSentenceNoContext[] =
    "You are a helpful question answerer who can provide an answer given a question.\n"
    "\n"
    "Question: {question}\n"
    "Provide a single sentence that answers the question.\n"
    "\n"
    "Answer: ";

constexpr char kShortWithContext[] =
    "You are a helpful question answerer who can provide an answer given a question and relevant "
    "context.\n"
    "\n"
    "Question: {question}\n"
    "Context: {context}\n"
    "Provide a single word or phrase that answers the question based on the given context.\n"
    "\n"
    "Answer: ";

constexpr char kShortNoContext[] =
    "You are a helpful question answerer who can provide an answer given a question.\n"
    "\n"
    "Question: {question}\n"
    "Provide a single word or phrase that answers the question.\n"
    "\n"
    "Answer: ";

std::string substitute(std::string tpl, const std::string& slot, const std::string& value) {
    auto pos = tpl.find(slot);
    tpl.replace(pos, slot.size(), value);
    return tpl;
}

std::string context_block(const std::vector<Document>& docs) {
    std::string out;
    for (size_t i = 0; i < docs.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += "Doc " + std::to_string(i + 1) + " (" + docs[i].id + "): ";
        if (docs[i].modality == Modality::Visual) {
            out += "Image: " + docs[i].image_path.value_or("") + "\n" + docs[i].text;
        } else {
            out += docs[i].text;
        }
    }
    return out;
}

} // namespace

std::string render_prompt(const std::string& question,
                          const std::optional<std::vector<Document>>& docs, PromptStyle style) {
    if (question.empty()) throw Error("render_prompt: empty question");
    if (style.with_context) {
        if (!docs || docs->empty()) throw Error("render_prompt: with_context requires documents");
    } else if (docs && !docs->empty()) {
        throw Error("render_prompt: documents supplied for a no-context style");
    }

    const char* tpl;
    if (style.dataset_style == DatasetStyle::SentenceAnswer)
        tpl = style.with_context ? kSentenceWithContext : kSentenceNoContext;
    else
        tpl = style.with_context ? kShortWithContext : kShortNoContext;

    std::string prompt = substitute(tpl, "{question}", question);
    if (style.with_context) prompt = substitute(std::move(prompt), "{context}", context_block(*docs));
    return prompt;
}

namespace {

// Parses the fixture marker out of a rendered prompt. Returns false if no
// marker is present (the mock then answers "unknown").
bool parse_marker(const std::string& prompt, std::string& doc_id, std::string& answer) {
    auto start = prompt.find("GOLD[");
    if (start == std::string::npos) return false;
    auto id_end = prompt.find(']', start + 5);
    if (id_end == std::string::npos || id_end + 1 >= prompt.size() || prompt[id_end + 1] != '=')
        return false;
    doc_id = prompt.substr(start + 5, id_end - (start + 5));
    auto value_start = id_end + 2;
    auto value_end = prompt.find('\n', value_start);
    if (value_end == std::string::npos) value_end = prompt.size();
    answer = prompt.substr(value_start, value_end - value_start);
    while (!answer.empty() && (answer.back() == ' ' || answer.back() == '\r')) answer.pop_back();
    return true;
}

// The context block spans from "Context: " to the "\nProvide a " line.
bool context_doc_ids(const std::string& prompt, std::vector<std::string>& ids) {
    auto start = prompt.find("\nContext: ");
    if (start == std::string::npos) return false;
    start += std::string("\nContext: ").size();
    auto end = prompt.find("\nProvide a ", start);
    if (end == std::string::npos) end = prompt.size();
    std::string block = prompt.substr(start, end - start);

    size_t pos = 0;
    while ((pos = block.find("Doc ", pos)) != std::string::npos) {
        // only block starts and post-blank-line positions begin a doc entry
        if (pos != 0 && !(pos >= 2 && block[pos - 1] == '\n' && block[pos - 2] == '\n')) {
            pos += 4;
            continue;
        }
        auto open = block.find('(', pos);
        auto close = block.find("): ", pos);
        if (open == std::string::npos || close == std::string::npos || close < open) break;
        ids.push_back(block.substr(open + 1, close - open - 1));
        pos = close + 3;
    }
    return true;
}

GenerationResult mock_generate(const std::string& prompt) {
    GenerationResult result;
    result.backend = "mock";
    std::string doc_id, answer;
    bool has_marker = parse_marker(prompt, doc_id, answer);

    std::vector<std::string> ids;
    bool has_context = context_doc_ids(prompt, ids);

    if (!has_marker) {
        result.text = "unknown";
        return result;
    }
    if (has_context) {
        bool found = false;
        for (const auto& id : ids) found = found || id == doc_id;
        result.text = found ? answer : "unknown";
    } else {
        result.text = prompt.find("PARAMETRIC") != std::string::npos ? answer : "unknown";
    }
    return result;
}

GenerationResult remote_generate(const GeneratorConfig& cfg, const std::string& prompt,
                                 const std::vector<std::string>& image_paths) {
    auto url = detail::split_url(*cfg.endpoint);
    nlohmann::json message;
    message["role"] = "user";
    message["content"] = prompt;
    if (!image_paths.empty()) message["images"] = image_paths;
    nlohmann::json req;
    req["model"] = *cfg.model_name;
    req["messages"] = nlohmann::json::array({message});
    req["temperature"] = cfg.temperature;
    req["max_tokens"] = cfg.max_tokens;
    std::string body = req.dump();

    const char* token = std::getenv(cfg.auth_env.c_str());

    detail::InFlightGate::Guard guard(detail::InFlightGate::for_endpoint(*cfg.endpoint),
                                      cfg.max_in_flight);
    auto result = detail::with_retries(cfg.retries, cfg.backoff_ms, [&] {
        httplib::Client client(url.base);
        client.set_connection_timeout(0, cfg.timeout_ms * 1000LL);
        client.set_read_timeout(0, cfg.timeout_ms * 1000LL);
        client.set_write_timeout(0, cfg.timeout_ms * 1000LL);
        httplib::Headers headers;
        if (token && *token) headers.emplace("Authorization", std::string("Bearer ") + token);
        auto res = client.Post(url.path, headers, body, "application/json");
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
        throw Error("generation request failed: " + result.transport_error);
    if (result.status != 200)
        throw Error("generation request failed: HTTP " + std::to_string(result.status) + ": " +
                    detail::body_excerpt(result.body));

    nlohmann::json resp;
    try {
        resp = nlohmann::json::parse(result.body);
    } catch (const std::exception& e) {
        throw Error(std::string("generation response is not valid JSON: ") + e.what());
    }
    GenerationResult out;
    out.backend = "remote";
    try {
        out.text = resp.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception&) {
        throw Error("generation response missing choices[0].message.content: " +
                    detail::body_excerpt(result.body));
    }
    if (resp.contains("usage") && resp["usage"].contains("completion_tokens"))
        out.token_count = resp["usage"]["completion_tokens"].get<int>();
    return out;
}

} // namespace

GenerationResult generate(const GeneratorConfig& cfg, const std::string& prompt,
                          const std::vector<std::string>& image_paths) {
    cfg.validate();
    if (prompt.empty()) throw Error("generate: empty prompt");

    auto start = std::chrono::steady_clock::now();
    GenerationResult result = cfg.backend == GeneratorBackend::Mock
                                  ? mock_generate(prompt)
                                  : remote_generate(cfg, prompt, image_paths);
    auto elapsed = std::chrono::steady_clock::now() - start;
    result.latency_ms =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(elapsed).count();
    return result;
}

} // namespace mrag
