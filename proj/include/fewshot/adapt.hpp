#pragma once

#include <vector>

#include "fewshot/matrix.hpp"
#include "fewshot/mlp.hpp"
#include "fewshot/rng.hpp"

namespace fewshot {

/// Test-time adaptation settings: a few full-support-batch adaptive-moment
/// steps on the support-set NCA loss.
struct AdaptConfig {
    std::size_t epochs = 5;
    AdamConfig opt;  // lr 1e-4, weight decay 5e-4 defaults

    void validate() const;
};

/// Fine-tunes a copy of the network on the NCA loss over the support set.
/// Requires at least two shots per class; the caller's params are untouched.
MlpParams finetune_on_support(const MlpParams& params, const Matrix& support_features,
                              const std::vector<int>& support_labels, const AdaptConfig& cfg,
                              RngStream& rng);

/// Mahalanobis metric A = L^T L, positive semi-definite by construction.
struct MahalanobisMetric {
    Matrix factor;  // L, d x d

    Matrix metric() const;  // A = L^T L
};

/// Plain gradient descent on the NCA loss of rows transformed by L, starting
/// from the identity. Requires at least two shots per class.
MahalanobisMetric learn_mahalanobis(const Matrix& support_emb,
                                    const std::vector<int>& support_labels, std::size_t steps,
                                    double lr, RngStream& rng);

/// Rows mapped through the metric factor: z -> z L^T.
Matrix apply_metric(const Matrix& emb, const MahalanobisMetric& metric);

}  // namespace fewshot
