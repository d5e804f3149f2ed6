#include "repulse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace repulse {

namespace {

void check_labels(const Matrix& probs, const std::vector<int>& labels) {
    if (probs.rows != labels.size())
        throw std::invalid_argument("probability rows and label count differ");
    if (probs.rows == 0) throw std::invalid_argument("no samples");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= probs.cols)
            throw std::out_of_range("label " + std::to_string(y) + " outside [0, " +
                                    std::to_string(probs.cols) + ")");
}

std::size_t argmax_row(const double* p, std::size_t k) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
        if (p[j] > p[best]) best = j;
    return best;
}

}  // namespace

double nll(const Matrix& probs, const std::vector<int>& labels) {
    check_labels(probs, labels);
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.rows; ++i)
        sum -= std::log(std::max(probs(i, static_cast<std::size_t>(labels[i])), 1e-12));
    return sum / static_cast<double>(probs.rows);
}

double ece(const Matrix& probs, const std::vector<int>& labels, std::size_t bins) {
    check_labels(probs, labels);
    if (bins == 0) throw std::invalid_argument("ece needs at least one bin");
    std::vector<double> bin_count(bins, 0.0), bin_correct(bins, 0.0), bin_conf(bins, 0.0);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const std::size_t pred = argmax_row(probs.row(i), probs.cols);
        const double conf = probs(i, pred);
        std::size_t bin = bins - 1;
        for (std::size_t m = 1; m <= bins; ++m) {
            if (conf <= static_cast<double>(m) / static_cast<double>(bins)) {
                bin = m - 1;
                break;
            }
        }
        bin_count[bin] += 1.0;
        bin_conf[bin] += conf;
        if (pred == static_cast<std::size_t>(labels[i])) bin_correct[bin] += 1.0;
    }
    double total = 0.0;
    for (std::size_t m = 0; m < bins; ++m) {
        if (bin_count[m] == 0.0) continue;
        const double acc = bin_correct[m] / bin_count[m];
        const double conf = bin_conf[m] / bin_count[m];
        total += bin_count[m] / static_cast<double>(probs.rows) * std::abs(acc - conf);
    }
    return total;
}

double brier(const Matrix& probs, const std::vector<int>& labels) {
    check_labels(probs, labels);
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const double* p = probs.row(i);
        for (std::size_t j = 0; j < probs.cols; ++j) {
            const double diff = p[j] - (j == static_cast<std::size_t>(labels[i]) ? 1.0 : 0.0);
            sum += diff * diff;
        }
    }
    return sum / static_cast<double>(probs.rows);
}

double auroc(const std::vector<double>& negatives, const std::vector<double>& positives) {
    if (negatives.empty() || positives.empty())
        throw std::invalid_argument("auroc needs scores on both sides");
    struct Entry {
        double score;
        bool positive;
    };
    std::vector<Entry> all;
    all.reserve(negatives.size() + positives.size());
    for (double s : negatives) all.push_back({s, false});
    for (double s : positives) all.push_back({s, true});
    std::sort(all.begin(), all.end(),
              [](const Entry& a, const Entry& b) { return a.score < b.score; });

    // Average ranks over tie groups, then the rank-sum U statistic.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j + 1 < all.size() && all[j + 1].score == all[i].score) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k)
            if (all[k].positive) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double np = static_cast<double>(positives.size());
    const double nn = static_cast<double>(negatives.size());
    const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
    return u / (np * nn);
}

double accuracy(const Matrix& probs, const std::vector<int>& labels) {
    check_labels(probs, labels);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < probs.rows; ++i)
        if (argmax_row(probs.row(i), probs.cols) == static_cast<std::size_t>(labels[i]))
            ++correct;
    return static_cast<double>(correct) / static_cast<double>(probs.rows);
}

EvalReport evaluate(const Matrix& probs, const std::vector<int>& labels) {
    EvalReport r;
    r.accuracy = accuracy(probs, labels);
    r.nll = nll(probs, labels);
    r.ece = ece(probs, labels);
    r.brier = brier(probs, labels);
    r.count = probs.rows;
    return r;
}

}  // namespace repulse
