#include "mrag/router.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "mrag/hashing.hpp"

namespace mrag {

namespace {

bool is_power_of_two(int x) { return x > 0 && (x & (x - 1)) == 0; }

std::vector<std::string> tokenize(const std::string& question) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : question) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

} // namespace

SparseFeatures featurize(const std::string& question, int feature_dim, uint64_t seed) {
    if (question.empty()) throw Error("featurize: empty question");
    if (!is_power_of_two(feature_dim)) throw Error("featurize: feature_dim must be a power of two");

    auto tokens = tokenize(question);
    const auto mask = static_cast<uint64_t>(feature_dim - 1);
    std::map<Eigen::Index, double> buckets;
    auto add = [&](const std::string& key) {
        uint64_t h = stable_hash(key, seed);
        buckets[static_cast<Eigen::Index>(h & mask)] += (h >> 63) ? 1.0 : -1.0;
    };
    for (const auto& tok : tokens) add("u\x1f" + tok);
    for (size_t i = 0; i + 1 < tokens.size(); ++i)
        add("b\x1f" + tokens[i] + "\x1f" + tokens[i + 1]);

    SparseFeatures v(feature_dim);
    v.reserve(static_cast<Eigen::Index>(buckets.size()));
    double norm_sq = 0.0;
    for (const auto& [idx, val] : buckets) {
        if (val == 0.0) continue; // signed counts cancelled in this bucket
        v.insertBack(idx) = val;
        norm_sq += val * val;
    }
    if (norm_sq == 0.0) {
        // no tokens (or total cancellation): fall back to a whole-string bucket
        v.setZero();
        v.insertBack(static_cast<Eigen::Index>(stable_hash(question, mix64(seed)) & mask)) = 1.0;
        return v;
    }
    v /= std::sqrt(norm_sq);
    return v;
}

void TrainConfig::validate() const {
    if (learning_rate <= 0) throw Error("train config: learning_rate must be > 0");
    if (epochs < 1) throw Error("train config: epochs must be >= 1");
    if (batch_size < 1) throw Error("train config: batch_size must be >= 1");
    if (!is_power_of_two(feature_dim)) throw Error("train config: feature_dim must be a power of two");
    if (label_set.size() < 2) throw Error("train config: label set needs at least 2 labels");
}

int RouterModel::label_index(const std::string& label) const {
    for (size_t i = 0; i < label_set.size(); ++i)
        if (label_set[i] == label) return static_cast<int>(i);
    return -1;
}

Eigen::VectorXd class_weights(const std::vector<Decision>& labels,
                              const std::vector<std::string>& label_set) {
    const auto C = static_cast<Eigen::Index>(label_set.size());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(C);
    for (const auto& label : labels) {
        auto it = std::find(label_set.begin(), label_set.end(), label);
        if (it == label_set.end()) throw Error("class_weights: unregistered label \"" + label + "\"");
        counts[it - label_set.begin()] += 1.0;
    }
    for (Eigen::Index c = 0; c < C; ++c)
        if (counts[c] == 0.0)
            throw Error("class_weights: class \"" + label_set[static_cast<size_t>(c)] +
                        "\" has zero examples");
    double n = static_cast<double>(labels.size());
    return (n / (static_cast<double>(C) * counts.array())).matrix();
}

namespace {

Eigen::VectorXd logits_for(const RouterModel& model, const SparseFeatures& x) {
    Eigen::VectorXd z = model.bias;
    for (SparseFeatures::InnerIterator it(x); it; ++it)
        z += model.weights.col(it.index()) * it.value();
    return z;
}

// log-softmax with max subtraction; returns (log_probs, probs)
void stable_softmax(const Eigen::VectorXd& z, Eigen::VectorXd& log_probs, Eigen::VectorXd& probs) {
    double zmax = z.maxCoeff();
    Eigen::ArrayXd shifted = z.array() - zmax;
    double log_sum = std::log(shifted.exp().sum());
    log_probs = (shifted - log_sum).matrix();
    probs = log_probs.array().exp().matrix();
}

} // namespace

double loss_and_grad(const RouterModel& model,
                     const std::vector<std::pair<SparseFeatures, int>>& batch,
                     const Eigen::VectorXd& class_weight, double weight_decay, Gradients& grads) {
    const Eigen::Index C = model.weights.rows();
    grads.weights.resize(model.weights.rows(), model.weights.cols());
    grads.weights.setZero();
    grads.bias = Eigen::VectorXd::Zero(C);

    double loss = 0.0;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    Eigen::VectorXd log_probs, probs;
    for (const auto& [x, label] : batch) {
        if (label < 0 || label >= C) throw Error("loss_and_grad: label index out of range");
        Eigen::VectorXd z = logits_for(model, x);
        if (!z.allFinite()) throw Error("loss_and_grad: non-finite logits");
        stable_softmax(z, log_probs, probs);
        double w = class_weight[label];
        loss += -w * log_probs[label] * inv_batch;

        Eigen::VectorXd dz = probs * (w * inv_batch);
        dz[label] -= w * inv_batch;
        grads.bias += dz;
        for (SparseFeatures::InnerIterator it(x); it; ++it)
            grads.weights.col(it.index()) += dz * it.value();
    }
    if (weight_decay != 0.0) {
        loss += 0.5 * weight_decay * model.weights.squaredNorm();
        grads.weights += weight_decay * model.weights;
    }
    return loss;
}

RouterModel train_router(const std::vector<WindsockExample>& dataset, const TrainConfig& cfg,
                         TrainTrace* trace) {
    cfg.validate();
    if (dataset.empty()) throw Error("train_router: empty dataset");

    RouterModel model;
    model.feature_dim = cfg.feature_dim;
    model.label_set = cfg.label_set;
    model.featurizer_seed = cfg.featurizer_seed;
    const auto C = static_cast<Eigen::Index>(cfg.label_set.size());

    std::vector<std::pair<SparseFeatures, int>> examples;
    examples.reserve(dataset.size());
    std::vector<Decision> labels;
    labels.reserve(dataset.size());
    for (const auto& ex : dataset) {
        int idx = -1;
        for (size_t i = 0; i < cfg.label_set.size(); ++i)
            if (cfg.label_set[i] == ex.label) idx = static_cast<int>(i);
        if (idx < 0) throw Error("train_router: unregistered label \"" + ex.label + "\"");
        examples.emplace_back(featurize(ex.question, cfg.feature_dim, cfg.featurizer_seed), idx);
        labels.push_back(ex.label);
    }

    Eigen::VectorXd weight = cfg.class_weighting ? class_weights(labels, cfg.label_set)
                                                 : Eigen::VectorXd::Ones(C);

    // zero init: the loss is convex, and unseen feature buckets then score
    // exactly zero at inference
    SplitMix64 rng(cfg.seed);
    model.weights = Eigen::MatrixXd::Zero(C, cfg.feature_dim);
    model.bias = Eigen::VectorXd::Zero(C);

    const size_t n = examples.size();
    const auto batch_size = static_cast<size_t>(cfg.batch_size);
    const size_t batches_per_epoch = (n + batch_size - 1) / batch_size;
    const size_t total_steps = batches_per_epoch * static_cast<size_t>(cfg.epochs);

    Eigen::MatrixXd m_w = Eigen::MatrixXd::Zero(C, cfg.feature_dim);
    Eigen::MatrixXd v_w = Eigen::MatrixXd::Zero(C, cfg.feature_dim);
    Eigen::VectorXd m_b = Eigen::VectorXd::Zero(C);
    Eigen::VectorXd v_b = Eigen::VectorXd::Zero(C);

    if (trace) {
        trace->step_lr.clear();
        trace->step_lr.reserve(total_steps);
        trace->epoch_loss.clear();
        trace->class_weight = weight;
    }

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    Gradients grads;
    std::vector<std::pair<SparseFeatures, int>> batch;
    size_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (size_t start = 0; start < n; start += batch_size) {
            size_t end = std::min(n, start + batch_size);
            batch.clear();
            for (size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);

            double lr_t = cfg.learning_rate *
                          (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
            if (trace) trace->step_lr.push_back(lr_t);

            double loss = loss_and_grad(model, batch, weight, cfg.weight_decay, grads);
            epoch_loss += loss;

            ++step;
            double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
            double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
            m_w = cfg.adam_beta1 * m_w + (1.0 - cfg.adam_beta1) * grads.weights;
            v_w = (cfg.adam_beta2 * v_w.array() +
                   (1.0 - cfg.adam_beta2) * grads.weights.array().square())
                      .matrix();
            model.weights.array() -=
                lr_t * (m_w.array() / bc1) / ((v_w.array() / bc2).sqrt() + cfg.adam_eps);
            m_b = cfg.adam_beta1 * m_b + (1.0 - cfg.adam_beta1) * grads.bias;
            v_b = (cfg.adam_beta2 * v_b.array() +
                   (1.0 - cfg.adam_beta2) * grads.bias.array().square())
                      .matrix();
            model.bias.array() -=
                lr_t * (m_b.array() / bc1) / ((v_b.array() / bc2).sqrt() + cfg.adam_eps);
        }
        if (trace) trace->epoch_loss.push_back(epoch_loss / static_cast<double>(batches_per_epoch));
    }
    if (trace)
        trace->final_lr = cfg.learning_rate *
                          (1.0 - static_cast<double>(total_steps) / static_cast<double>(total_steps));
    return model;
}

RouteResult route(const RouterModel& model, const std::string& question) {
    if (question.empty()) throw Error("route: empty question");
    SparseFeatures x = featurize(question, model.feature_dim, model.featurizer_seed);
    Eigen::VectorXd z = logits_for(model, x);
    Eigen::VectorXd log_probs, probs;
    stable_softmax(z, log_probs, probs);
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < probs.size(); ++c)
        if (probs[c] > probs[best]) best = c; // ties keep the earlier label
    return {model.label_set[static_cast<size_t>(best)], probs};
}

namespace {
constexpr char kRouterMagic[8] = {'M', 'R', 'A', 'G', 'R', 'T', 'R', 'M'};
constexpr uint32_t kRouterVersion = 1;
} // namespace

void save_router(const RouterModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open router model file for writing: " + path);
    nlohmann::ordered_json header;
    header["version"] = model.version;
    header["feature_dim"] = model.feature_dim;
    header["featurizer_seed"] = model.featurizer_seed;
    header["label_set"] = model.label_set;
    std::string header_str = header.dump();

    out.write(kRouterMagic, sizeof(kRouterMagic));
    uint32_t version = kRouterVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    auto len = static_cast<uint32_t>(header_str.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    out.write(reinterpret_cast<const char*>(model.weights.data()),
              static_cast<std::streamsize>(sizeof(double) *
                                           static_cast<size_t>(model.weights.size())));
    out.write(reinterpret_cast<const char*>(model.bias.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(model.bias.size())));
    if (!out) throw Error("write failed: " + path);
}

RouterModel load_router(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open router model file: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kRouterMagic, sizeof(kRouterMagic)) != 0)
        throw Error("not a router model file (bad magic): " + path);
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kRouterVersion)
        throw Error("unsupported router model version " + std::to_string(version) + " in " + path);
    uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string header_str(len, '\0');
    in.read(header_str.data(), len);
    if (!in) throw Error("truncated router model header: " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const std::exception& e) {
        throw Error("corrupt router model header in " + path + ": " + e.what());
    }
    RouterModel model;
    model.version = header.at("version").get<std::string>();
    model.feature_dim = header.at("feature_dim").get<int>();
    model.featurizer_seed = header.at("featurizer_seed").get<uint64_t>();
    model.label_set = header.at("label_set").get<std::vector<std::string>>();
    const auto C = static_cast<Eigen::Index>(model.label_set.size());
    model.weights.resize(C, model.feature_dim);
    in.read(reinterpret_cast<char*>(model.weights.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(model.weights.size())));
    model.bias.resize(C);
    in.read(reinterpret_cast<char*>(model.bias.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(model.bias.size())));
    if (!in) throw Error("truncated router model parameters: " + path);
    if (!model.weights.allFinite() || !model.bias.allFinite())
        throw Error("router model contains non-finite parameters: " + path);
    return model;
}

} // namespace mrag
