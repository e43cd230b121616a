#pragma once

#include <string>
#include <vector>

#include "fewshot/matrix.hpp"

namespace fewshot {

/// Features plus dense integer class labels for one named split.
struct LabeledDataset {
    Matrix features;          // N x d
    std::vector<int> labels;  // length N, dense ids in [0, num_classes)
    std::string split_name;   // train | val | test

    std::size_t size() const { return features.rows; }
    std::size_t dim() const { return features.cols; }
    std::size_t num_classes() const;

    /// indices grouped by class id; every class guaranteed non-empty after validate().
    std::vector<std::vector<std::size_t>> indices_by_class() const;

    /// Enforces: labels length matches rows, ids dense in [0, C), every class non-empty.
    void validate() const;
};

/// A dataset file holds one or more named splits with a shared feature dim.
/// Binary layout (little-endian): magic "FSDS", u32 version, u64 dim,
/// u64 split count, then per split: name (u64 len + bytes), u64 N,
/// u64 num_classes, N x i64 labels, N*dim f64 features.
struct DatasetFile {
    std::vector<LabeledDataset> splits;

    std::size_t dim() const { return splits.empty() ? 0 : splits.front().dim(); }
    const LabeledDataset& split(const std::string& name) const;
    bool has_split(const std::string& name) const;
};

void save_dataset(const DatasetFile& ds, const std::string& path);
DatasetFile load_dataset(const std::string& path);

/// Import one split from delimited text, one row per line: label, f1, ..., fd.
/// Separators: commas and/or whitespace.
LabeledDataset import_delimited(const std::string& path, const std::string& split_name);

}  // namespace fewshot
