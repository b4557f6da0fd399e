// mrag: command-line front end for the adaptive retrieval pipeline.
// Every run is a pure function of (config file, input files, flags); all
// randomness flows from explicit seeds in the config or flags.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mrag/curation.hpp"
#include "mrag/eval.hpp"
#include "mrag/flat_index.hpp"
#include "mrag/jsonl.hpp"
#include "mrag/kb.hpp"
#include "mrag/pipeline.hpp"
#include "mrag/router.hpp"

namespace {

using mrag::Error;
using json = nlohmann::json;

struct RunConfig {
    std::optional<uint64_t> seed; // global seed for curation rngs
    int k = 3;
    mrag::Metric metric = mrag::Metric::F1;
    int parallelism = 1;
    mrag::DatasetStyle dataset_style = mrag::DatasetStyle::SentenceAnswer;
    std::vector<std::string> label_set = mrag::kDefaultLabelSet;
    std::vector<std::string> tie_order = mrag::kDefaultLabelSet;
    mrag::EmbedderConfig embedder;
    mrag::GeneratorConfig generator;
    mrag::TrainConfig train;
    bool train_seed_set = false;

    std::string visual_kb, textual_kb;
    std::string visual_index, textual_index;
    std::string router_model;
};

template <typename T>
void read_into(const json& obj, const char* key, T& out) {
    if (obj.contains(key) && !obj[key].is_null()) out = obj[key].get<T>();
}

RunConfig load_config(const std::string& path) {
    RunConfig cfg;
    cfg.generator.mock_seed = 0; // mock backend default; overridden by config
    if (path.empty()) return cfg;

    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const std::exception& e) {
        throw Error("config file " + path + " is not valid JSON: " + e.what());
    }

    if (doc.contains("seed") && !doc["seed"].is_null()) cfg.seed = doc["seed"].get<uint64_t>();
    read_into(doc, "k", cfg.k);
    if (doc.contains("metric")) cfg.metric = mrag::parse_metric(doc["metric"].get<std::string>());
    read_into(doc, "parallelism", cfg.parallelism);
    if (doc.contains("dataset_style"))
        cfg.dataset_style = mrag::parse_dataset_style(doc["dataset_style"].get<std::string>());
    read_into(doc, "label_set", cfg.label_set);
    read_into(doc, "tie_order", cfg.tie_order);

    if (doc.contains("embedder")) {
        const auto& e = doc["embedder"];
        if (e.contains("backend"))
            cfg.embedder.backend = e["backend"].get<std::string>() == "remote"
                                       ? mrag::EmbedderBackend::Remote
                                       : mrag::EmbedderBackend::Hash;
        read_into(e, "dim", cfg.embedder.dim);
        if (e.contains("endpoint") && !e["endpoint"].is_null())
            cfg.embedder.endpoint = e["endpoint"].get<std::string>();
        if (e.contains("model_name") && !e["model_name"].is_null())
            cfg.embedder.model_name = e["model_name"].get<std::string>();
        if (e.contains("seed") && !e["seed"].is_null())
            cfg.embedder.seed = e["seed"].get<uint64_t>();
        read_into(e, "timeout_ms", cfg.embedder.timeout_ms);
        read_into(e, "max_batch", cfg.embedder.max_batch);
        read_into(e, "max_in_flight", cfg.embedder.max_in_flight);
        read_into(e, "retries", cfg.embedder.retries);
        read_into(e, "backoff_ms", cfg.embedder.backoff_ms);
    }
    if (doc.contains("generator")) {
        const auto& g = doc["generator"];
        if (g.contains("backend"))
            cfg.generator.backend = g["backend"].get<std::string>() == "remote"
                                        ? mrag::GeneratorBackend::Remote
                                        : mrag::GeneratorBackend::Mock;
        if (g.contains("endpoint") && !g["endpoint"].is_null())
            cfg.generator.endpoint = g["endpoint"].get<std::string>();
        if (g.contains("model_name") && !g["model_name"].is_null())
            cfg.generator.model_name = g["model_name"].get<std::string>();
        read_into(g, "temperature", cfg.generator.temperature);
        read_into(g, "max_tokens", cfg.generator.max_tokens);
        read_into(g, "timeout_ms", cfg.generator.timeout_ms);
        if (g.contains("mock_seed") && !g["mock_seed"].is_null())
            cfg.generator.mock_seed = g["mock_seed"].get<uint64_t>();
        read_into(g, "max_in_flight", cfg.generator.max_in_flight);
        read_into(g, "retries", cfg.generator.retries);
        read_into(g, "backoff_ms", cfg.generator.backoff_ms);
        if (g.contains("auth_env")) cfg.generator.auth_env = g["auth_env"].get<std::string>();
    }
    if (doc.contains("router")) {
        const auto& r = doc["router"];
        read_into(r, "feature_dim", cfg.train.feature_dim);
        if (r.contains("featurizer_seed"))
            cfg.train.featurizer_seed = r["featurizer_seed"].get<uint64_t>();
        if (r.contains("train")) {
            const auto& t = r["train"];
            read_into(t, "learning_rate", cfg.train.learning_rate);
            read_into(t, "batch_size", cfg.train.batch_size);
            read_into(t, "epochs", cfg.train.epochs);
            read_into(t, "weight_decay", cfg.train.weight_decay);
            read_into(t, "adam_beta1", cfg.train.adam_beta1);
            read_into(t, "adam_beta2", cfg.train.adam_beta2);
            read_into(t, "adam_eps", cfg.train.adam_eps);
            read_into(t, "class_weighting", cfg.train.class_weighting);
            if (t.contains("seed") && !t["seed"].is_null()) {
                cfg.train.seed = t["seed"].get<uint64_t>();
                cfg.train_seed_set = true;
            }
        }
    }
    if (doc.contains("paths")) {
        const auto& p = doc["paths"];
        read_into(p, "visual_kb", cfg.visual_kb);
        read_into(p, "textual_kb", cfg.textual_kb);
        read_into(p, "visual_index", cfg.visual_index);
        read_into(p, "textual_index", cfg.textual_index);
        read_into(p, "router_model", cfg.router_model);
    }
    cfg.train.label_set = cfg.label_set;
    return cfg;
}

std::string require_path(const std::string& flag_value, const std::string& config_value,
                         const char* what) {
    if (!flag_value.empty()) return flag_value;
    if (!config_value.empty()) return config_value;
    throw Error(std::string("no path configured for ") + what);
}

// Bundles everything a pipeline run needs and keeps the loaded objects alive.
struct LoadedPipeline {
    mrag::KnowledgeBase visual_kb;
    mrag::KnowledgeBase textual_kb;
    mrag::FlatIndex visual_index;
    mrag::FlatIndex textual_index;
    std::optional<mrag::RouterModel> router;
    mrag::PipelineConfig pipeline;

    LoadedPipeline(const RunConfig& cfg, bool need_router)
        : visual_kb(mrag::load_kb(require_path("", cfg.visual_kb, "visual_kb"),
                                  mrag::Modality::Visual)),
          textual_kb(mrag::load_kb(require_path("", cfg.textual_kb, "textual_kb"),
                                   mrag::Modality::Textual)),
          visual_index(mrag::load_index(require_path("", cfg.visual_index, "visual_index"))),
          textual_index(mrag::load_index(require_path("", cfg.textual_index, "textual_index"))) {
        if (need_router) {
            router = mrag::load_router(require_path("", cfg.router_model, "router_model"));
            pipeline.router = &*router;
        }
        pipeline.visual = {&visual_kb, &visual_index};
        pipeline.textual = {&textual_kb, &textual_index};
        pipeline.embedder = cfg.embedder;
        pipeline.generator = cfg.generator;
        pipeline.dataset_style = cfg.dataset_style;
        pipeline.k = cfg.k;
        pipeline.metric = cfg.metric;
        pipeline.label_set = cfg.label_set;
        pipeline.parallelism = cfg.parallelism;
    }

    mrag::SelfAssessDeps deps(const RunConfig& cfg) const {
        mrag::SelfAssessDeps d;
        d.visual = {&visual_kb, &visual_index};
        d.textual = {&textual_kb, &textual_index};
        d.embedder = cfg.embedder;
        d.generator = cfg.generator;
        d.dataset_style = cfg.dataset_style;
        d.k = cfg.k;
        d.metric = cfg.metric;
        d.parallelism = cfg.parallelism;
        if (cfg.seed) d.seed = *cfg.seed;
        return d;
    }
};

uint64_t require_seed(const RunConfig& cfg, const char* command) {
    if (!cfg.seed) throw Error(std::string(command) + " requires a seed (config key \"seed\" or --seed)");
    return *cfg.seed;
}

void print_scored_docs(const std::vector<mrag::ScoredDoc>& hits) {
    std::printf("%-6s %-24s %s\n", "rank", "id", "score");
    for (const auto& hit : hits) std::printf("%-6d %-24s %.6f\n", hit.rank, hit.id.c_str(), hit.score);
}

mrag::RunFile load_run_file(const std::string& path) {
    mrag::RunFile runs;
    mrag::for_each_jsonl(path, [&](size_t line_no, const mrag::json& rec) {
        try {
            runs[rec.at("query_id").get<std::string>()] =
                rec.at("doc_ids").get<std::vector<std::string>>();
        } catch (const std::exception& e) {
            throw Error(path + ":" + std::to_string(line_no) + ": malformed run record: " + e.what());
        }
    });
    return runs;
}

mrag::QrelFile load_qrel_file(const std::string& path) {
    mrag::QrelFile qrels;
    mrag::for_each_jsonl(path, [&](size_t line_no, const mrag::json& rec) {
        try {
            auto ids = rec.at("relevant_ids").get<std::vector<std::string>>();
            qrels[rec.at("query_id").get<std::string>()] = {ids.begin(), ids.end()};
        } catch (const std::exception& e) {
            throw Error(path + ":" + std::to_string(line_no) + ": malformed qrel record: " + e.what());
        }
    });
    return qrels;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive multimodal retrieval-augmented generation pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON run configuration");
    std::optional<uint64_t> seed_flag;
    app.add_option("--seed", seed_flag, "override the config seed");
    std::optional<int> k_flag;
    app.add_option("--k", k_flag, "override top-k");
    std::optional<std::string> metric_flag;
    app.add_option("--metric", metric_flag, "override metric (f1|em)");
    std::optional<int> parallelism_flag;
    app.add_option("--parallelism", parallelism_flag, "override fan-out cap");

    // kb
    auto* kb_cmd = app.add_subcommand("kb", "knowledge-base operations");
    auto* kb_ingest = kb_cmd->add_subcommand("ingest", "validate records and persist a clean copy");
    auto* kb_stats_cmd = kb_cmd->add_subcommand("stats", "print document count and sizes");
    std::string kb_input, kb_output, kb_modality = "textual";
    for (auto* cmd : {kb_ingest, kb_stats_cmd}) {
        cmd->add_option("--input", kb_input, "record file (one JSON object per line)")->required();
        cmd->add_option("--modality", kb_modality, "visual|textual")->required();
    }
    kb_ingest->add_option("--output", kb_output, "where to write the validated copy");

    // index
    auto* index_cmd = app.add_subcommand("index", "flat index operations");
    auto* index_build = index_cmd->add_subcommand("build", "embed a knowledge base into an index");
    auto* index_info = index_cmd->add_subcommand("info", "print an index manifest");
    std::string index_kb, index_out, index_modality = "textual", index_path;
    index_build->add_option("--kb", index_kb, "knowledge base file (defaults from config paths)");
    index_build->add_option("--modality", index_modality, "visual|textual")->required();
    index_build->add_option("--output", index_out, "index file (defaults from config paths)");
    index_info->add_option("--index", index_path, "index file")->required();

    // search
    auto* search_cmd = app.add_subcommand("search", "top-k retrieval for a query");
    std::string search_query, search_modality = "textual", search_image, search_index_path;
    search_cmd->add_option("--query", search_query, "query text")->required();
    search_cmd->add_option("--modality", search_modality, "visual|textual");
    search_cmd->add_option("--image", search_image, "optional query image path");
    search_cmd->add_option("--index", search_index_path, "index file (defaults from config paths)");

    // router
    auto* router_cmd = app.add_subcommand("router", "routing classifier operations");
    auto* router_train = router_cmd->add_subcommand("train", "train on a labeled question file");
    auto* router_route = router_cmd->add_subcommand("route", "classify one question");
    auto* router_inspect = router_cmd->add_subcommand("inspect", "print model metadata");
    std::string train_dataset, train_output, route_question, model_path;
    router_train->add_option("--dataset", train_dataset, "question/label records")->required();
    router_train->add_option("--output", train_output, "model file (defaults from config paths)");
    router_route->add_option("--question", route_question, "question text")->required();
    router_route->add_option("--model", model_path, "model file (defaults from config paths)");
    router_inspect->add_option("--model", model_path, "model file (defaults from config paths)");

    // curate
    auto* curate_cmd = app.add_subcommand("curate", "training-data construction");
    auto* curate_assess = curate_cmd->add_subcommand("assess", "self-assessment scores per pair");
    auto* curate_windsock = curate_cmd->add_subcommand("windsock", "routing labels from self-assessment");
    auto* curate_dance = curate_cmd->add_subcommand("dance", "noise-resistance tuning records");
    auto* curate_noise = curate_cmd->add_subcommand("noise", "gold + filler document sets");
    std::string qa_path, curate_output, curate_ledger, dance_strategy = "challenging";
    std::string noise_kb_path, noise_modality = "textual";
    for (auto* cmd : {curate_assess, curate_windsock, curate_dance, curate_noise})
        cmd->add_option("--qa", qa_path, "question-answer pairs")->required();
    curate_assess->add_option("--output", curate_output, "ledger file")->required();
    curate_windsock->add_option("--output", curate_output, "dataset file")->required();
    curate_windsock->add_option("--ledger", curate_ledger, "also write the scores ledger here");
    curate_dance->add_option("--output", curate_output, "dataset file")->required();
    curate_dance->add_option("--strategy", dance_strategy, "challenging|easy|random");
    curate_noise->add_option("--output", curate_output, "noise-set file")->required();
    curate_noise->add_option("--kb", noise_kb_path, "knowledge base to draw fillers from");
    curate_noise->add_option("--modality", noise_modality, "visual|textual");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "answer scoring");
    auto* eval_score = eval_cmd->add_subcommand("score", "score a predictions file");
    std::string predictions_path;
    bool per_item = false;
    eval_score->add_option("--predictions", predictions_path, "records with prediction + golds")
        ->required();
    eval_score->add_flag("--per-item", per_item, "print one score per record");

    // pipeline
    auto* pipeline_cmd = app.add_subcommand("pipeline", "end-to-end runs");
    auto* pipe_answer = pipeline_cmd->add_subcommand("answer", "answer a single query");
    auto* pipe_eval = pipeline_cmd->add_subcommand("eval", "answer and score a qa file");
    auto* pipe_compare = pipeline_cmd->add_subcommand("compare", "fixed strategies vs router");
    auto* pipe_bench = pipeline_cmd->add_subcommand("bench", "decision ratios and stage breakdown");
    std::string pipe_query, pipe_image, pipe_id = "q", pipe_override, report_path, traces_path;
    pipe_answer->add_option("--query", pipe_query, "query text")->required();
    pipe_answer->add_option("--image", pipe_image, "optional query image path");
    pipe_answer->add_option("--id", pipe_id, "query id for the trace");
    for (auto* cmd : {pipe_answer, pipe_eval})
        cmd->add_option("--override", pipe_override, "fixed decision instead of the router");
    for (auto* cmd : {pipe_eval, pipe_compare, pipe_bench})
        cmd->add_option("--qa", qa_path, "question-answer pairs")->required();
    for (auto* cmd : {pipe_eval, pipe_compare})
        cmd->add_option("--report", report_path, "write the JSON report here");
    pipe_eval->add_option("--traces", traces_path, "dump one trace per line here");

    // ir-metrics
    auto* ir_cmd = app.add_subcommand("ir-metrics", "offline retrieval metrics");
    std::string run_path, qrel_path;
    ir_cmd->add_option("--run", run_path, "ranked ids per query")->required();
    ir_cmd->add_option("--qrels", qrel_path, "relevant ids per query")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = load_config(config_path);
        if (seed_flag) cfg.seed = *seed_flag;
        if (k_flag) cfg.k = *k_flag;
        if (metric_flag) cfg.metric = mrag::parse_metric(*metric_flag);
        if (parallelism_flag) cfg.parallelism = *parallelism_flag;
        if (seed_flag) {
            cfg.train.seed = *seed_flag;
            cfg.train_seed_set = true;
        }

        if (*kb_ingest || *kb_stats_cmd) {
            auto modality = mrag::parse_modality(kb_modality);
            std::vector<std::string> warnings;
            auto kb = mrag::load_kb(kb_input, modality, &warnings);
            for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
            auto stats = mrag::kb_stats(kb);
            std::printf("name=%s modality=%s count=%zu total_text_bytes=%zu\n",
                        kb.name().c_str(), mrag::to_string(stats.modality).c_str(), stats.count,
                        stats.total_text_bytes);
            if (*kb_ingest && !kb_output.empty()) {
                mrag::save_kb(kb, kb_output);
                std::printf("wrote %s\n", kb_output.c_str());
            }
        } else if (*index_build) {
            auto modality = mrag::parse_modality(index_modality);
            bool visual = modality == mrag::Modality::Visual;
            std::string kb_path = require_path(index_kb, visual ? cfg.visual_kb : cfg.textual_kb,
                                               "knowledge base");
            std::string out_path = require_path(
                index_out, visual ? cfg.visual_index : cfg.textual_index, "index output");
            auto kb = mrag::load_kb(kb_path, modality);
            auto index = mrag::build_index(kb, cfg.embedder);
            mrag::save_index(index, out_path);
            std::printf("indexed %lld documents (dim=%d) -> %s\n",
                        static_cast<long long>(index.size()), index.dim(), out_path.c_str());
        } else if (*index_info) {
            auto index = mrag::load_index(index_path);
            json manifest = {{"kb_name", index.kb_name()},
                             {"modality", mrag::to_string(index.modality())},
                             {"dim", index.dim()},
                             {"count", index.size()},
                             {"embedder_fingerprint", index.embedder_fingerprint()}};
            std::printf("%s\n", manifest.dump(2).c_str());
        } else if (*search_cmd) {
            auto modality = mrag::parse_modality(search_modality);
            bool visual = modality == mrag::Modality::Visual;
            std::string path = require_path(search_index_path,
                                            visual ? cfg.visual_index : cfg.textual_index, "index");
            auto index = mrag::load_index(path);
            if (index.embedder_fingerprint() != cfg.embedder.fingerprint())
                throw Error("index " + path + " was built with embedder \"" +
                            index.embedder_fingerprint() + "\" but the configured embedder is \"" +
                            cfg.embedder.fingerprint() + "\"");
            std::optional<std::string> image;
            if (!search_image.empty()) image = search_image;
            auto q = mrag::embed_input(cfg.embedder, search_query, image);
            print_scored_docs(mrag::search(index, q, cfg.k));
        } else if (*router_train) {
            if (!cfg.train_seed_set) throw Error("router train requires a seed (config router.train.seed or --seed)");
            auto dataset = mrag::load_windsock_dataset(train_dataset);
            std::string out_path = require_path(train_output, cfg.router_model, "router model output");
            mrag::TrainTrace trace;
            auto model = mrag::train_router(dataset, cfg.train, &trace);
            for (size_t e = 0; e < trace.epoch_loss.size(); ++e)
                std::printf("epoch %zu loss %.6f\n", e + 1, trace.epoch_loss[e]);
            for (size_t c = 0; c < model.label_set.size(); ++c)
                std::printf("class_weight %s %.6f\n", model.label_set[c].c_str(),
                            trace.class_weight[static_cast<Eigen::Index>(c)]);
            mrag::save_router(model, out_path);
            std::printf("wrote %s\n", out_path.c_str());
        } else if (*router_route) {
            auto model = mrag::load_router(require_path(model_path, cfg.router_model, "router model"));
            auto result = mrag::route(model, route_question);
            std::printf("decision=%s\n", result.decision.c_str());
            for (size_t c = 0; c < model.label_set.size(); ++c)
                std::printf("p(%s)=%.6f\n", model.label_set[c].c_str(),
                            result.probabilities[static_cast<Eigen::Index>(c)]);
        } else if (*router_inspect) {
            auto model = mrag::load_router(require_path(model_path, cfg.router_model, "router model"));
            json info = {{"version", model.version},
                         {"feature_dim", model.feature_dim},
                         {"featurizer_seed", model.featurizer_seed},
                         {"label_set", model.label_set},
                         {"weight_norm", model.weights.norm()},
                         {"bias", std::vector<double>(model.bias.data(),
                                                      model.bias.data() + model.bias.size())}};
            std::printf("%s\n", info.dump(2).c_str());
        } else if (*curate_assess || *curate_windsock) {
            LoadedPipeline loaded(cfg, false);
            auto qaset = mrag::load_qa_pairs(qa_path);
            auto result = mrag::build_windsock_dataset(qaset, loaded.deps(cfg), cfg.tie_order);
            if (*curate_assess) {
                mrag::write_ledger(result, curate_output);
            } else {
                mrag::write_windsock_dataset(result.examples, curate_output);
                if (!curate_ledger.empty()) mrag::write_ledger(result, curate_ledger);
            }
            std::printf("pairs=%zu labeled=%zu skipped=%zu\n", qaset.size(),
                        result.examples.size(), result.skips.size());
        } else if (*curate_dance) {
            require_seed(cfg, "curate dance");
            LoadedPipeline loaded(cfg, false);
            auto qaset = mrag::load_qa_pairs(qa_path);
            mrag::SelectionStrategy strategy;
            if (dance_strategy == "challenging") strategy = mrag::SelectionStrategy::Challenging;
            else if (dance_strategy == "easy") strategy = mrag::SelectionStrategy::Easy;
            else if (dance_strategy == "random") strategy = mrag::SelectionStrategy::Random;
            else throw Error("unknown selection strategy \"" + dance_strategy + "\"");
            auto result = mrag::build_dance_dataset(qaset, loaded.deps(cfg), strategy);
            mrag::write_dance_dataset(result, curate_output);
            std::printf("pairs=%zu examples=%zu skipped=%zu\n", qaset.size(),
                        result.examples.size(), result.skips.size());
        } else if (*curate_noise) {
            uint64_t seed = require_seed(cfg, "curate noise");
            auto modality = mrag::parse_modality(noise_modality);
            bool visual = modality == mrag::Modality::Visual;
            std::string kb_path =
                require_path(noise_kb_path, visual ? cfg.visual_kb : cfg.textual_kb, "knowledge base");
            auto kb = mrag::load_kb(kb_path, modality);
            auto qaset = mrag::load_qa_pairs(qa_path);
            auto records = mrag::build_noise_set(qaset, kb, seed);
            mrag::write_noise_set(records, curate_output);
            std::printf("records=%zu\n", records.size());
        } else if (*eval_score) {
            double sum = 0.0;
            size_t n = 0;
            mrag::for_each_jsonl(predictions_path, [&](size_t line_no, const mrag::json& rec) {
                std::string pred;
                std::vector<std::string> golds;
                try {
                    pred = rec.at("prediction").get<std::string>();
                    golds = rec.at("golds").get<std::vector<std::string>>();
                } catch (const std::exception& e) {
                    throw Error(predictions_path + ":" + std::to_string(line_no) +
                                ": malformed prediction record: " + e.what());
                }
                double value = mrag::evaluate(pred, golds, cfg.metric).value;
                if (per_item) {
                    std::string id = rec.contains("id") ? rec["id"].get<std::string>()
                                                        : std::to_string(line_no);
                    std::printf("%s %.6f\n", id.c_str(), value);
                }
                sum += value;
                ++n;
            });
            if (n == 0) throw Error("predictions file is empty: " + predictions_path);
            std::printf("metric=%s mean=%.6f n=%zu\n", mrag::to_string(cfg.metric).c_str(),
                        sum / static_cast<double>(n), n);
        } else if (*pipe_answer) {
            LoadedPipeline loaded(cfg, pipe_override.empty());
            if (!pipe_override.empty()) loaded.pipeline.override_decision = pipe_override;
            loaded.pipeline.validate();
            mrag::Query query{pipe_id, pipe_query,
                              pipe_image.empty() ? std::nullopt
                                                 : std::optional<std::string>(pipe_image)};
            auto trace = mrag::answer(loaded.pipeline, query);
            std::printf("%s\n", mrag::trace_to_json(trace).c_str());
        } else if (*pipe_eval) {
            LoadedPipeline loaded(cfg, pipe_override.empty());
            if (!pipe_override.empty()) loaded.pipeline.override_decision = pipe_override;
            auto qaset = mrag::load_qa_pairs(qa_path);
            auto report = mrag::evaluate_pipeline(loaded.pipeline, qaset);
            if (!traces_path.empty()) {
                std::ofstream out(traces_path, std::ios::binary);
                if (!out) throw Error("cannot open trace file for writing: " + traces_path);
                for (const auto& trace : report.traces) out << mrag::trace_to_json(trace) << "\n";
            }
            if (!report_path.empty()) {
                std::ofstream out(report_path, std::ios::binary);
                if (!out) throw Error("cannot open report file for writing: " + report_path);
                out << mrag::report_to_json(report) << "\n";
            }
            std::printf("%s", mrag::report_table({{pipe_override.empty() ? "router" : pipe_override,
                                                   report}})
                                  .c_str());
        } else if (*pipe_compare) {
            LoadedPipeline loaded(cfg, true);
            auto qaset = mrag::load_qa_pairs(qa_path);
            auto rows = mrag::compare_strategies(loaded.pipeline, qaset);
            if (!report_path.empty()) {
                std::ofstream out(report_path, std::ios::binary);
                if (!out) throw Error("cannot open report file for writing: " + report_path);
                json doc = json::object();
                for (const auto& [name, report] : rows)
                    doc[name] = json::parse(mrag::report_to_json(report));
                out << doc.dump(2) << "\n";
            }
            std::printf("%s", mrag::report_table(rows).c_str());
        } else if (*pipe_bench) {
            LoadedPipeline loaded(cfg, true);
            auto qaset = mrag::load_qa_pairs(qa_path);
            auto report = mrag::evaluate_pipeline(loaded.pipeline, qaset);
            std::printf("decision ratios (n=%zu):\n", report.answered);
            for (const auto& [decision, stats] : report.per_decision)
                std::printf("  %-8s %6.2f%%  (%zu queries, %s=%.4f)\n", decision.c_str(),
                            100.0 * stats.ratio, stats.count, mrag::to_string(report.metric).c_str(),
                            stats.metric_mean);
            const auto& t = report.mean_timings;
            double total = t.total_ms > 0 ? t.total_ms : 1.0;
            std::printf("mean stage latency per query:\n");
            std::printf("  route    %9.3f ms (%5.2f%%)\n", t.route_ms, 100.0 * t.route_ms / total);
            std::printf("  embed    %9.3f ms (%5.2f%%)\n", t.embed_ms, 100.0 * t.embed_ms / total);
            std::printf("  search   %9.3f ms (%5.2f%%)\n", t.retrieve_ms,
                        100.0 * t.retrieve_ms / total);
            std::printf("  retrieval(embed+search) %9.3f ms (%5.2f%%)\n",
                        t.embed_ms + t.retrieve_ms, 100.0 * (t.embed_ms + t.retrieve_ms) / total);
            std::printf("  generate %9.3f ms (%5.2f%%)\n", t.generate_ms,
                        100.0 * t.generate_ms / total);
            std::printf("  total    %9.3f ms\n", t.total_ms);
            std::printf("total retrieval calls: %zu\n", report.total_retrieval_calls);
        } else if (*ir_cmd) {
            auto metrics = mrag::retrieval_metrics(load_run_file(run_path),
                                                   load_qrel_file(qrel_path), cfg.k);
            std::printf("k=%d queries=%zu MRR=%.6f Recall=%.6f mAP=%.6f NDCG=%.6f\n", metrics.k,
                        metrics.num_queries, metrics.mrr, metrics.recall, metrics.map, metrics.ndcg);
        }
        return 0;
    } catch (const std::exception& e) {
        std::string msg = e.what();
        for (auto& c : msg)
            if (c == '\n') c = ' ';
        std::fprintf(stderr, "error: %s\n", msg.c_str());
        return 1;
    }
}
