#pragma once

#include <vector>

#include "fewshot/dataset.hpp"
#include "fewshot/rng.hpp"

namespace fewshot {

/// The {w, n, m} triplet: ways, shots per class, queries per class.
struct EpisodeConfig {
    std::size_t ways = 5;
    std::size_t shots = 1;
    std::size_t queries = 15;

    std::size_t episode_size() const { return ways * (shots + queries); }
    void validate() const;
};

/// Episode parameterization by shots n, images per class a, batch size b.
struct BatchShapeConfig {
    std::size_t shots = 0;            // n
    std::size_t images_per_class = 0; // a
    std::size_t batch_size = 0;       // b

    void validate() const;
};

/// (n, a, b) -> (w = b/a, n, m = a - n).
EpisodeConfig shape_to_episode(const BatchShapeConfig& cfg);

/// A concrete support/query index split over a dataset.
struct Episode {
    struct Item {
        std::size_t index;
        int label;
    };
    std::vector<Item> support;
    std::vector<Item> query;

    std::vector<std::size_t> support_indices() const;
    std::vector<std::size_t> query_indices() const;
    std::vector<int> support_labels() const;
    std::vector<int> query_labels() const;
};

/// Draws w classes uniformly without replacement, then n+m distinct examples
/// per class (first n support, last m query). Successive calls are independent.
Episode sample_episode(const LabeledDataset& ds, const EpisodeConfig& cfg, RngStream& rng);

/// One shuffled pass over the dataset, chunked; last batch may be short.
std::vector<std::vector<std::size_t>> epoch_batches(const LabeledDataset& ds,
                                                    std::size_t batch_size, RngStream& rng);

/// A batch with exactly classes_per_batch distinct labels and images_per_class
/// examples of each; no support/query roles.
std::vector<std::size_t> sample_fixed_composition_batch(const LabeledDataset& ds,
                                                        std::size_t classes_per_batch,
                                                        std::size_t images_per_class,
                                                        RngStream& rng);

}  // namespace fewshot
