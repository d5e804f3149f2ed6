#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "repulse/dataset.hpp"
#include "repulse/metrics.hpp"
#include "repulse/particles.hpp"
#include "repulse/povi.hpp"
#include "repulse/rng.hpp"

namespace repulse {

/// Two input clusters, uniform on [-2,-1] and [1,2]; targets
/// y = sin(2x) + 0.1 x^3 + eps with eps ~ N(0, 0.1^2).
Dataset gen_regression_toy(std::uint64_t seed, std::size_t n_per_cluster);

/// Interleaved half circles of radius 1, the lower moon shifted by
/// (1, -0.5), with isotropic Gaussian noise. Binary labels, balanced up to
/// one sample.
Dataset gen_two_moons(std::uint64_t seed, std::size_t n, double noise_std);

/// k isotropic Gaussian clusters with centers evenly spaced on a circle of
/// the given radius; n samples total, classes balanced up to remainder.
Dataset gen_blobs(std::uint64_t seed, std::size_t n, std::size_t k, double radius,
                  double spread);

/// Appends ambiguous samples built as convex combinations
/// x = lambda x_a + (1 - lambda) x_b of inputs from two distinct classes,
/// lambda ~ U(0.4, 0.6), labeled uniformly from {class(a), class(b)} and
/// flagged. fraction is ambiguous count / base count.
Dataset gen_ambiguous_mix(const Dataset& base, double ambiguous_fraction, Rng& rng);

struct OodReport {
    struct Entry {
        std::string ood_name;
        double epistemic = 0.0;
        double total = 0.0;
        double aleatoric = 0.0;
    };
    EvalReport id_report;
    std::vector<Entry> aurocs;
};

/// ID metrics plus, per OOD set, the AUROC of each uncertainty kind as the
/// ID-vs-OOD score.
OodReport ood_eval(const ParticleSet& ps, const Dataset& id_test,
                   const std::vector<Dataset>& ood_sets);

enum class AcquisitionScore : std::uint8_t {
    Epistemic = 0,
    Total = 1,
    Aleatoric = 2,
    Random = 3,
};

struct AcquisitionConfig {
    std::size_t initial_labeled = 20;
    std::size_t acquire_per_round = 5;
    std::size_t rounds = 55;
    AcquisitionScore score = AcquisitionScore::Epistemic;
    TrainConfig retrain;
    std::uint64_t seed = 0;
};

/// Each round: retrain from scratch on the labeled set (particles
/// re-initialized from proto's specs with a per-round sub-seed), record test
/// accuracy, then move the top acquire_per_round pool samples by score into
/// the labeled set (ties by pool index; Random draws uniformly). Returns the
/// per-round accuracy curve.
std::vector<double> active_learning_run(const Dataset& pool, const Dataset& test,
                                        const ParticleSet& proto, const AcquisitionConfig& cfg);

}  // namespace repulse
