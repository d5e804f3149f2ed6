#pragma once

#include <cstddef>
#include <vector>

#include "repulse/matrix.hpp"

namespace repulse {

struct EvalReport {
    double accuracy = 0.0;
    double nll = 0.0;   // nats per sample
    double ece = 0.0;
    double brier = 0.0;
    std::size_t count = 0;
};

/// -(1/N) sum log probs[i][y_i], probabilities clamped at 1e-12.
double nll(const Matrix& probs, const std::vector<int>& labels);

/// Expected calibration error with M equal-width bins over (0,1]: bin m
/// covers ((m-1)/M, m/M], confidence 0 goes to bin 1. Confidence is the
/// max-class probability; prediction is argmax with lowest index on ties.
double ece(const Matrix& probs, const std::vector<int>& labels, std::size_t bins = 15);

/// (1/N) sum ||p_i - onehot(y_i)||^2, in [0, 2].
double brier(const Matrix& probs, const std::vector<int>& labels);

/// P(s_pos > s_neg) + 0.5 P(s_pos = s_neg) over pairs, via rank sums with
/// average ranks for ties. Positives are the samples expected to score
/// higher.
double auroc(const std::vector<double>& negatives, const std::vector<double>& positives);

/// Fraction with argmax(probs[i]) == labels[i], lowest index on ties.
double accuracy(const Matrix& probs, const std::vector<int>& labels);

EvalReport evaluate(const Matrix& probs, const std::vector<int>& labels);

}  // namespace repulse
