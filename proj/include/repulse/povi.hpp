#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "repulse/dataset.hpp"
#include "repulse/kernels.hpp"
#include "repulse/matrix.hpp"
#include "repulse/nn.hpp"
#include "repulse/particles.hpp"
#include "repulse/repulsion.hpp"

namespace repulse {

/// Raised when training produces non-finite parameters or losses.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class LikelihoodKind : std::uint8_t { Categorical = 0, GaussianFixedNoise = 1 };

struct Likelihood {
    LikelihoodKind kind = LikelihoodKind::Categorical;
    double noise_std = 0.1;  // GaussianFixedNoise only

    static Likelihood categorical() { return {LikelihoodKind::Categorical, 0.0}; }
    static Likelihood gaussian(double noise_std) {
        return {LikelihoodKind::GaussianFixedNoise, noise_std};
    }
};

enum class Method : std::uint8_t { PlainEnsemble = 0, ParamRepulsion = 1, FunctionRepulsion = 2 };

/// Step-size multiplier applied from the given step onward.
struct DecayPoint {
    std::uint64_t step = 0;
    double multiplier = 1.0;
};

struct TrainConfig {
    double step_size = 1e-3;
    std::uint64_t steps = 0;
    std::size_t train_batch_size = 128;
    std::size_t repulsion_batch_size = 128;
    double repulsion_weight = 1.0;  // gamma; 0 disables repulsion entirely
    double prior_variance = 100.0;  // sigma_p^2 of the isotropic Gaussian prior
    Method method = Method::PlainEnsemble;
    KernelConfig kernel{};
    Likelihood likelihood{};
    std::uint64_t dataset_size = 0;  // N; train() fills it from the dataset
    std::uint64_t seed = 0;
    std::vector<DecayPoint> decay;
    bool spectral_norm = false;
    double spectral_coeff = 3.0;
    std::uint64_t log_every = 1;
};

struct TrainLogEntry {
    std::uint64_t step = 0;
    double train_nll = 0.0;
    double mean_function_distance = 0.0;  // on the last repulsion batch; 0 without one
    double mean_param_distance = 0.0;
    double bandwidth = 0.0;
};

struct TrainLog {
    std::vector<TrainLogEntry> entries;
};

/// Sum over the batch, in nats. Categorical targets are integral class
/// labels; Gaussian requires one output column.
double log_likelihood(const Matrix& outputs, const std::vector<double>& targets,
                      const Likelihood& lik);

/// Gradient of (N/B) log p(batch | particle i) - ||theta_i||^2 / (2 sigma_p^2)
/// over the particle's own parameters. With an unfrozen MultiHead base and
/// base_grad non-null, the same objective's gradient over the base parameters
/// (prior included) is written there.
ParamVector attraction_gradient(const ParticleSet& ps, std::size_t i, const Batch& batch,
                                const TrainConfig& cfg, ParamVector* base_grad = nullptr);

struct StepStats {
    double train_nll = 0.0;
    double mean_function_distance = 0.0;
    double mean_param_distance = 0.0;
    double bandwidth = 0.0;
};

/// theta_i += eps * [attraction - gamma * repulsion_direction(i, particles)],
/// all directions taken from the pre-step positions. With gamma == 0 or a
/// single particle the repulsion path is skipped and the arithmetic is the
/// plain-ensemble update, so those trajectories coincide bitwise.
StepStats povi_step_param(ParticleSet& ps, const Batch& batch, const TrainConfig& cfg,
                          double step_size);

/// Function-space variant: u_i = flattened particle outputs on the repulsion
/// batch (logits or probabilities per the kernel config), r_i the repulsion
/// direction among the u vectors, pulled back through backward as a
/// cotangent. Same gamma == 0 / n == 1 short circuit as above. Repulsion
/// updates particle parameters only; an unfrozen base moves by the mean
/// attraction gradient in both step kinds.
StepStats povi_step_function(ParticleSet& ps, const Batch& train_batch,
                             const RepulsionBatch& repulsion, const TrainConfig& cfg,
                             double step_size);

/// Epoch loop: reshuffles sample order each epoch, walks mini-batches without
/// replacement, draws a fresh repulsion batch per step when the method needs
/// one, applies the decay schedule and optional spectral normalization.
/// Batch shuffling and repulsion draws use separate seed streams, so runs
/// that differ only in repulsion settings see identical train batches.
std::pair<ParticleSet, TrainLog> train(ParticleSet ps, const Dataset& data,
                                       const RepulsionSource* rep_source,
                                       const TrainConfig& cfg);

}  // namespace repulse
