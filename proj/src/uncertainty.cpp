#include "repulse/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "repulse/util.hpp"

namespace repulse {

namespace {

// p * log(p) with 0 log 0 := 0; the clamp only guards the log argument.
double plogp(double p) { return p > 0.0 ? p * std::log(std::max(p, 1e-12)) : 0.0; }

void softmax_row(const double* logits, std::size_t k, double* out) {
    double mx = logits[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        out[j] = std::exp(logits[j] - mx);
        sum += out[j];
    }
    for (std::size_t j = 0; j < k; ++j) out[j] /= sum;
}

}  // namespace

std::vector<double> softmax(const std::vector<double>& logits) {
    if (logits.empty()) throw std::invalid_argument("softmax of an empty vector");
    std::vector<double> probs(logits.size());
    softmax_row(logits.data(), logits.size(), probs.data());
    return probs;
}

double entropy(const std::vector<double>& probs) {
    double h = 0.0;
    for (double p : probs) h -= plogp(p);
    return h;
}

UncertaintyTriple decompose(const Matrix& probs) {
    const std::size_t n = probs.rows;
    const std::size_t k = probs.cols;
    if (n == 0 || k == 0) throw std::invalid_argument("decompose needs a nonempty sample");

    std::vector<double> mean(k, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) mean[j] += probs(i, j);
    for (double& m : mean) m /= static_cast<double>(n);

    UncertaintyTriple t;
    for (double m : mean) t.total -= plogp(m);

    double aleatoric = 0.0;
    double epistemic = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const double p = probs(i, j);
            if (p > 0.0) {
                const double lp = std::log(std::max(p, 1e-12));
                aleatoric -= p * lp;
                epistemic += p * (lp - std::log(std::max(mean[j], 1e-12)));
            }
        }
    }
    t.aleatoric = aleatoric / static_cast<double>(n);
    t.epistemic = epistemic / static_cast<double>(n);
    return t;
}

std::pair<double, double> regression_disagreement(const std::vector<double>& means) {
    if (means.empty()) throw std::invalid_argument("no particle means");
    const double n = static_cast<double>(means.size());
    double mean = 0.0;
    for (double m : means) mean += m;
    mean /= n;
    double var = 0.0;
    for (double m : means) var += (m - mean) * (m - mean);
    var /= n;
    return {mean, std::sqrt(var)};
}

std::vector<UncertaintyTriple> decompose_batch(const ParticleSet& ps, const Matrix& inputs) {
    const std::vector<Matrix> preds = predict_all(ps, inputs);
    const std::size_t n = ps.n();
    const std::size_t k = ps.output_dim();
    std::vector<UncertaintyTriple> out(inputs.rows);
    parallel_for(inputs.rows, [&](std::size_t b) {
        Matrix sample(n, k);
        for (std::size_t i = 0; i < n; ++i) softmax_row(preds[i].row(b), k, sample.row(i));
        out[b] = decompose(sample);
    });
    return out;
}

}  // namespace repulse
