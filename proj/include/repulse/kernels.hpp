#pragma once

#include <cstdint>
#include <vector>

#include "repulse/matrix.hpp"

namespace repulse {

enum class KernelSpace : std::uint8_t { Parameter = 0, Function = 1 };
enum class Distance : std::uint8_t { L1 = 0, L2 = 1, SqL2 = 2 };
enum class FunctionRepr : std::uint8_t { Logits = 0, Probabilities = 1 };

struct Bandwidth {
    enum class Rule : std::uint8_t { Fixed = 0, MedianHeuristic = 1 };
    Rule rule = Rule::MedianHeuristic;
    double value = 1.0;  // Fixed only; must be > 0

    static Bandwidth fixed(double nu) { return {Rule::Fixed, nu}; }
    static Bandwidth median() { return {Rule::MedianHeuristic, 1.0}; }
};

struct KernelConfig {
    KernelSpace space = KernelSpace::Parameter;
    Distance distance = Distance::SqL2;
    Bandwidth bandwidth{};
    FunctionRepr representation = FunctionRepr::Logits;  // Function space only
};

struct KernelMatrix {
    Matrix values;  // n x n, symmetric, unit diagonal, entries in (0, 1]
    double bandwidth_used = 0.0;
};

/// D[i][j] per metric; D[i][i] = 0. vectors is n x m, one row per particle.
Matrix pairwise_distances(const Matrix& vectors, Distance metric);

/// Median of the n(n-1)/2 off-diagonal squared distances divided by log n;
/// 1e-8 when the median is 0 (collapsed particles). Requires n >= 2.
double median_bandwidth(const Matrix& sq_distances, std::size_t n);

/// K[i][j] = exp(-D[i][j] / nu). Under MedianHeuristic the bandwidth is
/// always resolved from squared-L2 distances: pass them via sq_distances
/// when the kernel metric is not SqL2 (for SqL2, distances already are).
KernelMatrix kernel_matrix(const Matrix& distances, const KernelConfig& config,
                           const Matrix* sq_distances = nullptr);

/// r_i = [sum_j grad_{v_i} k(v_i, v_j)] / [sum_j k(v_i, v_j)], the gradient
/// of log sum_j k(v_i, v_j) with the other rows held constant. Self-gradient
/// is 0 (analytically for SqL2, by convention at 0 for L1/L2). Under
/// MedianHeuristic the bandwidth is resolved first and treated as constant.
std::vector<double> repulsion_direction(std::size_t i, const Matrix& vectors,
                                        const KernelConfig& config);

/// All n directions at once (row i = repulsion_direction(i, ...)), sharing
/// one distance/kernel evaluation. bandwidth_out, if non-null, receives the
/// resolved bandwidth.
Matrix repulsion_directions(const Matrix& vectors, const KernelConfig& config,
                            double* bandwidth_out = nullptr);

}  // namespace repulse
