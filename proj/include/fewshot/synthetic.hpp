#pragma once

#include <cstdint>

#include "fewshot/dataset.hpp"

namespace fewshot {

/// Gaussian-blob dataset: per split, class centers drawn from
/// N(0, center_scale^2 I) and samples from N(center, within_stddev^2 I).
/// Splits draw independent centers, so their class sets are disjoint by
/// construction. Split sizes default to the common 64/16/20 shape.
struct SyntheticSpec {
    std::size_t train_classes = 64;
    std::size_t val_classes = 16;
    std::size_t test_classes = 20;
    std::size_t samples_per_class = 50;
    std::size_t dim = 16;
    // Default scales keep squared distances of order one, where exp(-d^2)
    // weights stay informative for the distance-softmax losses.
    double center_scale = 0.125;
    double within_stddev = 0.125;
    std::uint64_t seed = 7;

    void validate() const;
};

DatasetFile generate_synthetic(const SyntheticSpec& spec);

}  // namespace fewshot
