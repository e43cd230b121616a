#pragma once

#include <span>
#include <vector>

#include "fewshot/matrix.hpp"

namespace fewshot {

/// out[i][j] = ||A_i - B_j||^2. Fails on column mismatch.
Matrix pairwise_sq_dists(const Matrix& a, const Matrix& b);

/// max(v) + log(sum(exp(v - max))). Fails on empty input, never overflows for
/// finite inputs.
double log_sum_exp(std::span<const double> v);

/// Arithmetic mean of the selected rows.
std::vector<double> mean_rows(const Matrix& a, std::span<const std::size_t> row_indices);

}  // namespace fewshot
