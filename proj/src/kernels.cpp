#include "repulse/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace repulse {

Matrix pairwise_distances(const Matrix& vectors, Distance metric) {
    const std::size_t n = vectors.rows;
    const std::size_t m = vectors.cols;
    Matrix d(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* vi = vectors.row(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double* vj = vectors.row(j);
            double acc = 0.0;
            if (metric == Distance::L1) {
                for (std::size_t k = 0; k < m; ++k) acc += std::abs(vi[k] - vj[k]);
            } else {
                for (std::size_t k = 0; k < m; ++k) {
                    const double diff = vi[k] - vj[k];
                    acc += diff * diff;
                }
                if (metric == Distance::L2) acc = std::sqrt(acc);
            }
            d(i, j) = acc;
            d(j, i) = acc;
        }
    }
    return d;
}

double median_bandwidth(const Matrix& sq_distances, std::size_t n) {
    if (n < 2) throw std::invalid_argument("median bandwidth needs at least 2 particles");
    std::vector<double> offdiag;
    offdiag.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) offdiag.push_back(sq_distances(i, j));
    std::sort(offdiag.begin(), offdiag.end());
    const std::size_t c = offdiag.size();
    const double median =
        c % 2 == 1 ? offdiag[c / 2] : 0.5 * (offdiag[c / 2 - 1] + offdiag[c / 2]);
    if (median == 0.0) return 1e-8;
    return median / std::log(static_cast<double>(n));
}

namespace {

double resolve_bandwidth(const Matrix& distances, const KernelConfig& config,
                         const Matrix* sq_distances) {
    if (config.bandwidth.rule == Bandwidth::Rule::Fixed) {
        if (!(config.bandwidth.value > 0.0))
            throw std::invalid_argument("fixed kernel bandwidth must be positive");
        return config.bandwidth.value;
    }
    const Matrix* sq = config.distance == Distance::SqL2 ? &distances : sq_distances;
    if (sq == nullptr)
        throw std::invalid_argument(
            "median bandwidth needs squared-L2 distances for a non-SqL2 kernel");
    return median_bandwidth(*sq, sq->rows);
}

}  // namespace

KernelMatrix kernel_matrix(const Matrix& distances, const KernelConfig& config,
                           const Matrix* sq_distances) {
    const double nu = resolve_bandwidth(distances, config, sq_distances);
    KernelMatrix km;
    km.bandwidth_used = nu;
    km.values = Matrix(distances.rows, distances.cols);
    for (std::size_t k = 0; k < distances.data.size(); ++k)
        km.values.data[k] = std::exp(-distances.data[k] / nu);
    return km;
}

Matrix repulsion_directions(const Matrix& vectors, const KernelConfig& config,
                            double* bandwidth_out) {
    const std::size_t n = vectors.rows;
    const std::size_t m = vectors.cols;
    if (n == 1) {
        // Only the self-term, whose gradient is 0; no bandwidth is involved.
        if (bandwidth_out != nullptr)
            *bandwidth_out =
                config.bandwidth.rule == Bandwidth::Rule::Fixed ? config.bandwidth.value : 0.0;
        return Matrix(1, m, 0.0);
    }
    const Matrix dist = pairwise_distances(vectors, config.distance);
    Matrix sq;
    const Matrix* sq_ptr = nullptr;
    if (config.distance != Distance::SqL2 &&
        config.bandwidth.rule == Bandwidth::Rule::MedianHeuristic) {
        sq = pairwise_distances(vectors, Distance::SqL2);
        sq_ptr = &sq;
    }
    const KernelMatrix km = kernel_matrix(dist, config, sq_ptr);
    if (bandwidth_out != nullptr) *bandwidth_out = km.bandwidth_used;
    const double nu = km.bandwidth_used;

    Matrix dirs(n, m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* vi = vectors.row(i);
        double* ri = dirs.row(i);
        double denom = 0.0;
        for (std::size_t j = 0; j < n; ++j) denom += km.values(i, j);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;  // self-gradient is 0 for every metric
            const double* vj = vectors.row(j);
            const double kij = km.values(i, j);
            if (config.distance == Distance::SqL2) {
                const double scale = -2.0 * kij / nu;
                for (std::size_t k = 0; k < m; ++k) ri[k] += scale * (vi[k] - vj[k]);
            } else if (config.distance == Distance::L2) {
                const double d = dist(i, j);
                if (d == 0.0) continue;  // gradient defined as 0 at distance 0
                const double scale = -kij / (nu * d);
                for (std::size_t k = 0; k < m; ++k) ri[k] += scale * (vi[k] - vj[k]);
            } else {
                const double scale = -kij / nu;
                for (std::size_t k = 0; k < m; ++k) {
                    const double diff = vi[k] - vj[k];
                    if (diff > 0.0)
                        ri[k] += scale;
                    else if (diff < 0.0)
                        ri[k] -= scale;
                }
            }
        }
        for (std::size_t k = 0; k < m; ++k) ri[k] /= denom;
    }
    return dirs;
}

std::vector<double> repulsion_direction(std::size_t i, const Matrix& vectors,
                                        const KernelConfig& config) {
    if (i >= vectors.rows) throw std::invalid_argument("particle index out of range");
    const Matrix dirs = repulsion_directions(vectors, config);
    return std::vector<double>(dirs.row(i), dirs.row(i) + dirs.cols);
}

}  // namespace repulse
