#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fewshot {

/// Dense row-major matrix of doubles. Rows are items, columns are feature dims.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;

    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    Matrix(std::size_t r, std::size_t c, std::vector<double> values)
        : rows(r), cols(c), data(std::move(values)) {
        if (data.size() != rows * cols)
            throw std::invalid_argument("Matrix: " + std::to_string(rows) + "x" +
                                        std::to_string(cols) + " needs " +
                                        std::to_string(rows * cols) + " values, got " +
                                        std::to_string(data.size()));
        check_finite();
    }

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows_init) {
        Matrix m;
        m.rows = rows_init.size();
        m.cols = m.rows ? rows_init.begin()->size() : 0;
        m.data.reserve(m.rows * m.cols);
        for (const auto& row : rows_init) {
            if (row.size() != m.cols)
                throw std::invalid_argument("Matrix::from_rows: ragged row lengths");
            m.data.insert(m.data.end(), row.begin(), row.end());
        }
        m.check_finite();
        return m;
    }

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    /// Extract the given rows into a new matrix, in the order given.
    Matrix gather_rows(std::span<const std::size_t> indices) const {
        Matrix out(indices.size(), cols);
        for (std::size_t k = 0; k < indices.size(); ++k) {
            if (indices[k] >= rows)
                throw std::out_of_range("gather_rows: index " + std::to_string(indices[k]) +
                                        " out of " + std::to_string(rows));
            auto src = row(indices[k]);
            std::copy(src.begin(), src.end(), out.row(k).begin());
        }
        return out;
    }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void check_finite() const {
        if (!all_finite()) throw std::invalid_argument("Matrix: non-finite entry");
    }

    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }
};

/// Vertical concatenation [top; bottom].
inline Matrix vstack(const Matrix& top, const Matrix& bottom) {
    if (top.rows == 0) return bottom;
    if (bottom.rows == 0) return top;
    if (top.cols != bottom.cols)
        throw std::invalid_argument("vstack: column mismatch " + top.shape_str() + " vs " +
                                    bottom.shape_str());
    Matrix out(top.rows + bottom.rows, top.cols);
    std::copy(top.data.begin(), top.data.end(), out.data.begin());
    std::copy(bottom.data.begin(), bottom.data.end(), out.data.begin() + top.data.size());
    return out;
}

/// out = A * B, naive triple loop.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw std::invalid_argument("matmul: inner dims " + a.shape_str() + " vs " +
                                    b.shape_str());
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.data.data() + k * b.cols;
            double* orow = out.data.data() + i * out.cols;
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

/// out = A^T * B.
inline Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows)
        throw std::invalid_argument("matmul_at_b: row mismatch " + a.shape_str() + " vs " +
                                    b.shape_str());
    Matrix out(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* arow = a.data.data() + k * a.cols;
        const double* brow = b.data.data() + k * b.cols;
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double aik = arow[i];
            if (aik == 0.0) continue;
            double* orow = out.data.data() + i * out.cols;
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

/// out = A * B^T.
inline Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols)
        throw std::invalid_argument("matmul_a_bt: column mismatch " + a.shape_str() + " vs " +
                                    b.shape_str());
    Matrix out(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.data.data() + i * a.cols;
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = b.data.data() + j * b.cols;
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
            out.at(i, j) = acc;
        }
    }
    return out;
}

}  // namespace fewshot
