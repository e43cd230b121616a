#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fewshot/dataset.hpp"
#include "fewshot/losses.hpp"
#include "fewshot/matrix.hpp"
#include "fewshot/rng.hpp"
#include "fewshot/sampler.hpp"

namespace fewshot {

/// Fully-connected network parameters: rectifier on hidden layers, identity
/// output. Also reused as the gradient/moment container (same shapes).
struct MlpParams {
    std::vector<Matrix> weights;              // layer l: in_l x out_l
    std::vector<std::vector<double>> biases;  // layer l: out_l

    static MlpParams he_init(const std::vector<std::size_t>& layer_dims, RngStream& rng);
    static MlpParams zeros_like(const MlpParams& other);

    std::size_t num_layers() const { return weights.size(); }
    std::size_t input_dim() const { return weights.front().rows; }
    std::size_t output_dim() const { return weights.back().cols; }
    std::vector<std::size_t> layer_dims() const;
    void check_chain() const;
};

struct ForwardCache {
    std::vector<Matrix> inputs;   // inputs[l]: what layer l consumed; inputs[0] = X
    std::vector<Matrix> preacts;  // preacts[l]: X_l * W_l + b_l before activation
};

/// Embeddings for X (rows = items). Pass a cache to enable backward().
Matrix mlp_forward(const MlpParams& params, const Matrix& x, ForwardCache* cache = nullptr);

/// Chain rule from d(loss)/d(embeddings) back to every weight and bias.
MlpParams mlp_backward(const MlpParams& params, const ForwardCache& cache,
                       const Matrix& grad_embeddings);

/// Training-time linear head; bypassed at evaluation.
struct ProjectionHead {
    Matrix weight;  // M x P
};

struct OptimizerConfig {
    double learning_rate = 0.1;
    double momentum = 0.9;
    bool nesterov = true;
    double weight_decay = 5e-4;
    std::size_t epochs = 1;
    double lr_decay_factor = 0.1;

    /// Decay kicks in once 70% of the epochs are done (integer milestone).
    std::size_t decay_milestone() const { return epochs * 7 / 10; }
    double lr_at(std::size_t epoch) const {
        return epoch >= decay_milestone() ? learning_rate * lr_decay_factor : learning_rate;
    }
    void validate() const;
};

struct SgdState {
    MlpParams velocity;
};

/// Nesterov momentum step with L2 weight decay added to the gradient.
void sgd_step(MlpParams& params, const MlpParams& grads, SgdState& state,
              const OptimizerConfig& cfg, std::size_t epoch);

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 5e-4;
};

struct AdamState {
    MlpParams first_moment;
    MlpParams second_moment;
    std::size_t step = 0;
};

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state,
               const AdamConfig& cfg);

// Flat-array update kernels shared with the projection head.
void sgd_update_array(std::vector<double>& param, const std::vector<double>& grad,
                      std::vector<double>& velocity, double lr, const OptimizerConfig& cfg);
void adam_update_array(std::vector<double>& param, const std::vector<double>& grad,
                       std::vector<double>& m, std::vector<double>& v, std::size_t step,
                       const AdamConfig& cfg);

enum class LossKind {
    Nca,
    Proto,
    MatchingNoProto,
    AllPairsProto,
    AllPairsNoProto,
    SubsampledNca,
    SupContrastive,
};

enum class BatchingKind {
    PlainEpochs,       // shuffled pass, every index exactly once
    IidBatches,        // fresh uniform batch each step (with replacement across batches)
    FixedComposition,  // fixed classes x images per class, no roles
    Episodic,          // support/query episodes from a BatchShapeConfig
};

bool loss_needs_episodes(LossKind kind);

struct BatchingConfig {
    BatchingKind kind = BatchingKind::PlainEpochs;
    std::size_t batch_size = 128;         // PlainEpochs / IidBatches
    std::size_t classes_per_batch = 16;   // FixedComposition
    std::size_t images_per_class = 8;     // FixedComposition
    BatchShapeConfig episode_shape;       // Episodic
};

struct ModelConfig {
    std::vector<std::size_t> hidden = {64, 64};
    std::size_t embed_dim = 16;
    std::size_t projection_dim = 0;  // 0 = no projection head
};

struct TrainConfig {
    ModelConfig model;
    OptimizerConfig opt;
    LossKind loss = LossKind::Nca;
    BatchingConfig batching;
    double keep_fraction = 1.0;  // SubsampledNca
    double temperature = 1.0;    // SupContrastive
};

struct TrainLog {
    struct EpochEntry {
        double mean_loss = 0.0;
        double lr = 0.0;
        double wall_seconds = 0.0;
    };
    std::vector<EpochEntry> epochs;
    std::uint64_t seed = 0;
};

std::pair<MlpParams, TrainLog> train(const LabeledDataset& ds, const TrainConfig& cfg,
                                     std::uint64_t seed);

struct Checkpoint {
    MlpParams params;
    std::uint64_t seed = 0;
    std::string config_text;
};

/// Versioned binary dump; round-trips parameters bit-exactly.
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fewshot
