#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fewshot/adapt.hpp"
#include "fewshot/dataset.hpp"
#include "fewshot/matrix.hpp"
#include "fewshot/mlp.hpp"
#include "fewshot/rng.hpp"
#include "fewshot/sampler.hpp"

namespace fewshot {

struct NormalizationStats {
    std::vector<double> train_mean;
};

/// Mean embedding over the rows of the (training-split) embedding matrix.
NormalizationStats stats_from_embeddings(const Matrix& embeddings);

/// Embeds every row of the split and averages.
NormalizationStats compute_train_stats(const MlpParams& params, const LabeledDataset& train);

/// Each row x -> (x - mean) / ||x - mean||; fails on a zero-norm row.
Matrix center_and_normalize(const Matrix& x, const NormalizationStats& stats);

/// Majority label of the k nearest supports; vote ties broken by smallest
/// summed distance among the tied classes, then lowest class id.
std::vector<int> knn_classify(const Matrix& support_emb, const std::vector<int>& support_labels,
                              const Matrix& query_emb, std::size_t k);

/// Label of the closest class centroid; ties go to the lowest class id.
std::vector<int> centroid_classify(const Matrix& support_emb,
                                   const std::vector<int>& support_labels,
                                   const Matrix& query_emb);

struct SoftAssignResult {
    std::vector<int> labels;
    Matrix class_scores;           // queries x classes (ascending class id); rows sum to 1
    std::vector<int> class_order;
};

/// Per-class sums of the softmax over exp(-d^2) to individual supports.
SoftAssignResult soft_assign_classify(const Matrix& support_emb,
                                      const std::vector<int>& support_labels,
                                      const Matrix& query_emb);

enum class ClassifierKind { Knn, Centroid, SoftAssign };

const char* classifier_name(ClassifierKind kind);
ClassifierKind classifier_from_name(const std::string& name);

enum class AdaptMode { None, SupportFinetune, Mahalanobis };

AdaptMode adapt_mode_from_name(const std::string& name);

struct EvalOptions {
    ClassifierKind classifier = ClassifierKind::Centroid;
    std::size_t n_episodes = 10000;
    std::size_t knn_k = 0;  // 0 = use the shots n
    std::size_t workers = 1;
    AdaptMode adapt = AdaptMode::None;
    AdaptConfig adapt_cfg;
    std::size_t mahalanobis_steps = 200;
    double mahalanobis_lr = 0.01;
};

struct EvalReport {
    double mean_accuracy = 0.0;
    double ci95_halfwidth = 0.0;
    std::size_t n_episodes = 0;
    EpisodeConfig episode;
    std::string classifier;
    std::uint64_t seed = 0;
};

/// mean and 1.96 * sample std / sqrt(n) over per-episode accuracies.
std::pair<double, double> mean_and_ci95(const std::vector<double>& values);

/// Samples n_episodes episodes (child rng per episode index), embeds, centers
/// and normalizes with the training stats, classifies, and aggregates. The
/// report is identical for any worker count.
EvalReport evaluate(const MlpParams& params, const LabeledDataset& ds, const EpisodeConfig& cfg,
                    const EvalOptions& opts, std::uint64_t seed, const NormalizationStats& stats,
                    std::vector<double>* per_episode_acc = nullptr);

std::string eval_csv_header();
std::string eval_csv_row(const EvalReport& report);

}  // namespace fewshot
