#pragma once

#include <utility>
#include <vector>

#include "repulse/matrix.hpp"
#include "repulse/particles.hpp"

namespace repulse {

/// Per-particle predictions at one query input: n x K class probabilities
/// for classification, or n scalar means for regression.
struct PredictiveSample {
    Matrix probs;
    std::vector<double> means;
};

/// All values in nats. total = aleatoric + epistemic up to float error.
struct UncertaintyTriple {
    double total = 0.0;
    double aleatoric = 0.0;
    double epistemic = 0.0;
};

/// Numerically stable (max-subtracted) softmax.
std::vector<double> softmax(const std::vector<double>& logits);

/// -sum p log p with 0 log 0 := 0; probabilities clamped at 1e-12 inside
/// the log only.
double entropy(const std::vector<double>& probs);

/// total = H(mean of rows); aleatoric = mean row entropy; epistemic = mean
/// KL(row || mean of rows). probs is n x K with probability rows.
UncertaintyTriple decompose(const Matrix& probs);

/// Sample mean and population standard deviation (divide by n) of the
/// particle means.
std::pair<double, double> regression_disagreement(const std::vector<double>& means);

/// predict_all, softmax per particle, decompose per input.
std::vector<UncertaintyTriple> decompose_batch(const ParticleSet& ps, const Matrix& inputs);

}  // namespace repulse
