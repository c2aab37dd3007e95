#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace trer {

// Dense row-major matrix of doubles. Candidates are rows, features are
// columns throughout the toolkit, so "x * W" applies a per-row linear map.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    Mat(std::size_t r, std::size_t c, std::vector<double> values);

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const {
        return {data.data() + r * cols, cols};
    }

    std::size_t size() const { return data.size(); }

    bool same_shape(const Mat& other) const {
        return rows == other.rows && cols == other.cols;
    }

    bool operator==(const Mat& other) const = default;
};

// a (r x n) times b (n x c). Throws ShapeError naming both shapes when the
// inner dimensions differ.
Mat matmul(const Mat& a, const Mat& b);

// a times b^T without materializing the transpose; a (r x n), b (c x n).
Mat matmul_transposed(const Mat& a, const Mat& b);

// a^T times b; a (n x r), b (n x c).
Mat transposed_matmul(const Mat& a, const Mat& b);

Mat transpose(const Mat& m);

// Row-wise softmax with max subtraction. Each output row is nonnegative and
// sums to one.
Mat softmax_rows(const Mat& m);

// Per-row layer normalization over the feature dimension with population
// variance:  out = (x - mean) / sqrt(var + eps) * gain + bias.
Mat layer_norm(const Mat& m, std::span<const double> gain,
               std::span<const double> bias, double eps);

bool all_finite(std::span<const double> values);

} // namespace trer
