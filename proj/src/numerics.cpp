#include "fewshot/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fewshot {

Matrix pairwise_sq_dists(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols)
        throw std::invalid_argument("pairwise_sq_dists: dimension mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
    Matrix out(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ra = a.data.data() + i * a.cols;
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* rb = b.data.data() + j * b.cols;
            double acc = 0.0;
            for (std::size_t c = 0; c < a.cols; ++c) {
                const double d = ra[c] - rb[c];
                acc += d * d;
            }
            out.at(i, j) = acc;
        }
    }
    return out;
}

double log_sum_exp(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("log_sum_exp: empty reduction");
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m)) return m;  // all -inf, or an inf dominates
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - m);
    return m + std::log(acc);
}

std::vector<double> mean_rows(const Matrix& a, std::span<const std::size_t> row_indices) {
    if (row_indices.empty()) throw std::invalid_argument("mean_rows: empty mean");
    std::vector<double> out(a.cols, 0.0);
    for (std::size_t idx : row_indices) {
        if (idx >= a.rows)
            throw std::out_of_range("mean_rows: row " + std::to_string(idx) + " out of " +
                                    std::to_string(a.rows));
        const double* r = a.data.data() + idx * a.cols;
        for (std::size_t c = 0; c < a.cols; ++c) out[c] += r[c];
    }
    const double inv = 1.0 / static_cast<double>(row_indices.size());
    for (double& x : out) x *= inv;
    return out;
}

}  // namespace fewshot
