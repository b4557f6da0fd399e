#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mrag/error.hpp"

namespace mrag {

// A routing decision is a label from the model's ordered label set. The
// default set covers skip / visual retrieval / textual retrieval; additional
// retrieval types (e.g. "Hybrid") are supported by registering more labels.
using Decision = std::string;

inline const std::vector<std::string> kDefaultLabelSet = {"NA", "Visual", "Textual"};

using SparseFeatures = Eigen::SparseVector<double>;

// Hashed, signed word-unigram + word-bigram counts over lowercase tokens,
// L2-normalized. feature_dim must be a power of two. Deterministic in
// (question, seed, feature_dim).
SparseFeatures featurize(const std::string& question, int feature_dim, uint64_t seed);

struct WindsockExample {
    std::string question;
    Decision label;
};

struct TrainConfig {
    double learning_rate = 5e-4;
    int batch_size = 16;
    int epochs = 5;
    double weight_decay = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    uint64_t seed = 0;
    bool class_weighting = true; // balanced class weights in the loss
    int feature_dim = 1 << 18;
    uint64_t featurizer_seed = 0;
    std::vector<std::string> label_set = kDefaultLabelSet;

    void validate() const;
};

// Multinomial softmax regression over hashed n-gram features.
struct RouterModel {
    int feature_dim = 0;
    std::vector<std::string> label_set;
    Eigen::MatrixXd weights; // C x feature_dim
    Eigen::VectorXd bias;    // C
    uint64_t featurizer_seed = 0;
    std::string version = "router-v1";

    int num_labels() const { return static_cast<int>(label_set.size()); }
    int label_index(const std::string& label) const;
};

// Balanced weights w_c = n / (C * n_c) over the configured label set.
// Throws if a registered class has zero examples or a label is unregistered.
Eigen::VectorXd class_weights(const std::vector<Decision>& labels,
                              const std::vector<std::string>& label_set);

struct Gradients {
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias;
};

// Class-weighted softmax cross-entropy averaged over the batch, plus an L2
// penalty (weight_decay / 2) * ||W||^2 on the weights (bias excluded).
// Labels are indices into the model's label set. Gradients match the
// returned loss analytically.
double loss_and_grad(const RouterModel& model,
                     const std::vector<std::pair<SparseFeatures, int>>& batch,
                     const Eigen::VectorXd& class_weight, double weight_decay, Gradients& grads);

struct TrainTrace {
    std::vector<double> step_lr;    // learning rate used at each optimizer step
    double final_lr = 0.0;          // scheduled value after the last step
    std::vector<double> epoch_loss; // mean batch loss per epoch
    Eigen::VectorXd class_weight;
};

// Adam on the regularized loss with a linear learning-rate schedule: step t
// of T total steps runs at lr * (1 - t/T), reaching 0 after the last step.
// Fully deterministic for a fixed cfg.seed (init and shuffling).
RouterModel train_router(const std::vector<WindsockExample>& dataset, const TrainConfig& cfg,
                         TrainTrace* trace = nullptr);

struct RouteResult {
    Decision decision;
    Eigen::VectorXd probabilities; // label-set order, sums to 1
};

// Softmax over the logits; argmax with ties broken toward the earliest label
// in label-set order (NA first in the default set, the cheapest action).
RouteResult route(const RouterModel& model, const std::string& question);

void save_router(const RouterModel& model, const std::string& path);
RouterModel load_router(const std::string& path);

} // namespace mrag
