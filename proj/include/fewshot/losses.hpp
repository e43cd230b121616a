#pragma once

#include <vector>

#include "fewshot/matrix.hpp"
#include "fewshot/rng.hpp"

namespace fewshot {

/// Loss value (nats) plus gradient with respect to the input embeddings.
/// For episode losses the gradient rows are [support rows; query rows].
struct LossResult {
    double value = 0.0;
    Matrix grad;
};

/// Embedded episode: per-class support counts are all equal (the shots n),
/// per-class query counts are all equal (the queries m), same label set on
/// both sides.
struct EpisodeEmbeddings {
    Matrix support_emb;
    std::vector<int> support_labels;
    Matrix query_emb;
    std::vector<int> query_labels;

    void validate() const;
    std::size_t total_rows() const { return support_emb.rows + query_emb.rows; }
};

struct Prototypes {
    Matrix centroids;             // one row per class, ascending class id
    std::vector<int> class_order; // class id of each centroid row
};

/// Per-class mean of the support embeddings.
Prototypes compute_prototypes(const Matrix& support_emb, const std::vector<int>& support_labels);

/// Softmax over negative squared distances from each query to the class
/// prototypes, averaged over queries. Gradients flow through prototypes into
/// the support rows. Optional out-param collects the per-query loss terms.
LossResult proto_loss(const EpisodeEmbeddings& ep, std::vector<double>* per_query_terms = nullptr);

/// Neighbourhood component analysis over one batch: per anchor, the softmax
/// mass of same-class neighbours over all neighbours under exp(-d^2) weights.
/// Anchors with no same-class neighbour are excluded from both the sum and
/// the normalization; fails if no anchor has a positive.
LossResult nca_loss(const Matrix& emb, const std::vector<int>& labels);

/// "No prototypes" ablation; also the Matching Networks training loss with
/// squared Euclidean distance. Per query, softmax mass of same-class supports
/// over all supports, with the literal 1/(|Q|+|S|) normalization.
LossResult proto_no_prototypes_loss(const EpisodeEmbeddings& ep,
                                    std::vector<double>* per_query_terms = nullptr);

/// "No support/query split" ablation with prototypes kept: NCA-style terms
/// over the union of queries and prototypes, 1/(|Q|+|S|) normalization.
LossResult proto_allpairs_loss(const EpisodeEmbeddings& ep);

/// Both ablations: identical to nca_loss on the concatenation [support; query].
LossResult allpairs_no_proto_loss(const EpisodeEmbeddings& ep);

struct PairSubsampleConfig {
    double keep_fraction = 1.0;  // in (0, 1]
};

/// Bernoulli(keep_fraction) keep-mask over unordered pairs of [0, batch_size),
/// stored symmetrically as a batch_size x batch_size byte table.
std::vector<std::uint8_t> draw_pair_mask(std::size_t batch_size, double keep_fraction,
                                         RngStream& rng);

/// NCA restricted to a Bernoulli(keep_fraction) mask over unordered pairs,
/// applied symmetrically to both ordered directions. keep_fraction = 1
/// reproduces nca_loss bit for bit.
LossResult subsampled_nca_loss(const Matrix& emb, const std::vector<int>& labels,
                               const PairSubsampleConfig& cfg, RngStream& rng);

/// Supervised contrastive loss on exp(-d^2 / temperature) weights: positives
/// averaged outside the log, denominator over negative pairs only.
LossResult sup_contrastive_loss(const Matrix& emb, const std::vector<int>& labels,
                                double temperature);

}  // namespace fewshot
