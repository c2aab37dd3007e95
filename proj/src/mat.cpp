#include "trer/mat.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trer/errors.hpp"

namespace trer {

namespace {

std::string shape_str(std::size_t r, std::size_t c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

} // namespace

Mat::Mat(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != rows * cols) {
        throw ShapeError("Mat init: " + std::to_string(data.size()) +
                         " values do not fill " + shape_str(rows, cols));
    }
}

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) {
        throw ShapeError("matmul: inner dimensions differ, " +
                         shape_str(a.rows, a.cols) + " * " +
                         shape_str(b.rows, b.cols));
    }
    Mat out(a.rows, b.cols);
    // i-k-j order keeps the b row in cache.
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.data.data() + i * a.cols;
        double* orow = out.data.data() + i * out.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            const double* brow = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

Mat matmul_transposed(const Mat& a, const Mat& b) {
    if (a.cols != b.cols) {
        throw ShapeError("matmul_transposed: feature dimensions differ, " +
                         shape_str(a.rows, a.cols) + " * (" +
                         shape_str(b.rows, b.cols) + ")^T");
    }
    Mat out(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.data.data() + i * a.cols;
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = b.data.data() + j * b.cols;
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) {
                acc += arow[k] * brow[k];
            }
            out.at(i, j) = acc;
        }
    }
    return out;
}

Mat transposed_matmul(const Mat& a, const Mat& b) {
    if (a.rows != b.rows) {
        throw ShapeError("transposed_matmul: row counts differ, (" +
                         shape_str(a.rows, a.cols) + ")^T * " +
                         shape_str(b.rows, b.cols));
    }
    Mat out(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* arow = a.data.data() + k * a.cols;
        const double* brow = b.data.data() + k * b.cols;
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double aki = arow[i];
            double* orow = out.data.data() + i * out.cols;
            for (std::size_t j = 0; j < b.cols; ++j) {
                orow[j] += aki * brow[j];
            }
        }
    }
    return out;
}

Mat transpose(const Mat& m) {
    Mat out(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            out.at(j, i) = m.at(i, j);
        }
    }
    return out;
}

Mat softmax_rows(const Mat& m) {
    Mat out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const auto in = m.row(i);
        auto o = out.row(i);
        double mx = in[0];
        for (double v : in) mx = std::max(mx, v);
        double sum = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (std::size_t j = 0; j < in.size(); ++j) {
            o[j] /= sum;
        }
    }
    return out;
}

Mat layer_norm(const Mat& m, std::span<const double> gain,
               std::span<const double> bias, double eps) {
    if (gain.size() != m.cols || bias.size() != m.cols) {
        throw ShapeError("layer_norm: gain/bias length " +
                         std::to_string(gain.size()) + "/" +
                         std::to_string(bias.size()) + " vs " +
                         std::to_string(m.cols) + " columns");
    }
    Mat out(m.rows, m.cols);
    const double n = static_cast<double>(m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const auto in = m.row(i);
        auto o = out.row(i);
        double mean = 0.0;
        for (double v : in) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : in) {
            const double d = v - mean;
            var += d * d;
        }
        var /= n;
        const double inv_std = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < in.size(); ++j) {
            o[j] = (in[j] - mean) * inv_std * gain[j] + bias[j];
        }
    }
    return out;
}

bool all_finite(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(),
                       [](double v) { return std::isfinite(v); });
}

} // namespace trer
