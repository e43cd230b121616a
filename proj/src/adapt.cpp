#include "fewshot/adapt.hpp"

#include <map>
#include <stdexcept>

#include "fewshot/losses.hpp"

namespace fewshot {

namespace {

void require_multishot(const std::vector<int>& labels) {
    std::map<int, std::size_t> counts;
    for (int l : labels) ++counts[l];
    for (const auto& [label, c] : counts)
        if (c < 2)
            throw std::runtime_error("insufficient positives for support adaptation (class " +
                                     std::to_string(label) + " has " + std::to_string(c) +
                                     " shot)");
}

}  // namespace

void AdaptConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("adapt: epochs must be >= 1");
}

MlpParams finetune_on_support(const MlpParams& params, const Matrix& support_features,
                              const std::vector<int>& support_labels, const AdaptConfig& cfg,
                              [[maybe_unused]] RngStream& rng) {
    cfg.validate();
    if (support_labels.size() != support_features.rows)
        throw std::invalid_argument("finetune_on_support: label count mismatch");
    require_multishot(support_labels);

    MlpParams adapted = params;  // per-episode copy; caller keeps the original
    AdamState state;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        ForwardCache cache;
        const Matrix z = mlp_forward(adapted, support_features, &cache);
        const LossResult loss = nca_loss(z, support_labels);
        const MlpParams grads = mlp_backward(adapted, cache, loss.grad);
        adam_step(adapted, grads, state, cfg.opt);
    }
    return adapted;
}

Matrix MahalanobisMetric::metric() const { return matmul_at_b(factor, factor); }

MahalanobisMetric learn_mahalanobis(const Matrix& support_emb,
                                    const std::vector<int>& support_labels, std::size_t steps,
                                    double lr, [[maybe_unused]] RngStream& rng) {
    if (support_labels.size() != support_emb.rows)
        throw std::invalid_argument("learn_mahalanobis: label count mismatch");
    require_multishot(support_labels);

    const std::size_t d = support_emb.cols;
    MahalanobisMetric out;
    out.factor = Matrix(d, d);
    for (std::size_t i = 0; i < d; ++i) out.factor.at(i, i) = 1.0;

    for (std::size_t s = 0; s < steps; ++s) {
        const Matrix transformed = apply_metric(support_emb, out);
        const LossResult loss = nca_loss(transformed, support_labels);
        // z' = z L^T  =>  dLoss/dL = (dLoss/dz')^T z
        const Matrix grad_l = matmul_at_b(loss.grad, support_emb);
        for (std::size_t i = 0; i < out.factor.data.size(); ++i)
            out.factor.data[i] -= lr * grad_l.data[i];
    }
    return out;
}

Matrix apply_metric(const Matrix& emb, const MahalanobisMetric& metric) {
    return matmul_a_bt(emb, metric.factor);
}

}  // namespace fewshot
