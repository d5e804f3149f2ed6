#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace repulse {

// Dense row-major matrix of doubles. All numerics in this project are 64-bit.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    bool empty() const { return rows == 0 || cols == 0; }

    bool all_finite() const {
        for (double x : data)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

inline Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows_in) {
    Matrix m(rows_in.size(), rows_in.empty() ? 0 : rows_in[0].size());
    for (std::size_t r = 0; r < rows_in.size(); ++r)
        for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = rows_in[r][c];
    return m;
}

}  // namespace repulse
