#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "repulse/matrix.hpp"
#include "repulse/nn.hpp"

namespace repulse {

enum class ParticleMode : std::uint8_t { FullEnsemble = 0, MultiHead = 1 };

/// n particles, either as independent full networks or as head parameter
/// blocks on top of one shared base. In MultiHead mode a head consumes the
/// activated base output, so a linear head composed with the base is the same
/// function as one deeper full network.
struct ParticleSet {
    ParticleMode mode = ParticleMode::FullEnsemble;
    MlpSpec base_spec;     // the particle spec in FullEnsemble mode
    MlpSpec head_spec;     // MultiHead only
    ParamVector base_params;  // MultiHead only
    bool base_frozen = true;  // MultiHead only
    std::vector<ParamVector> particles;
    std::uint64_t rng_seed = 0;
    std::uint64_t step_counter = 0;

    std::size_t n() const { return particles.size(); }
    std::size_t input_dim() const { return base_spec.input_dim(); }
    std::size_t output_dim() const {
        return mode == ParticleMode::MultiHead ? head_spec.output_dim() : base_spec.output_dim();
    }
    const MlpSpec& particle_spec() const {
        return mode == ParticleMode::MultiHead ? head_spec : base_spec;
    }

    void validate() const;
};

ParticleSet init_full_ensemble(const MlpSpec& spec, std::size_t n, std::uint64_t seed);

/// head_spec.layer_widths.front() must equal base_spec.output_dim().
ParticleSet init_multi_head(const MlpSpec& base_spec, const MlpSpec& head_spec, std::size_t n,
                            std::uint64_t seed);

/// Replace the particles of proto with n identical copies of map_params
/// (heads in MultiHead mode, full parameter vectors otherwise).
ParticleSet clone_from_map(const ParticleSet& proto, const ParamVector& map_params,
                           std::size_t n);

/// Activated base output for MultiHead mode; this is what heads consume.
Matrix base_features(const ParticleSet& ps, const Matrix& inputs);

/// Per-particle outputs, one B x K matrix per particle in particle order.
std::vector<Matrix> predict_all(const ParticleSet& ps, const Matrix& inputs);

/// Particles stacked as an n x P matrix (rows in particle order).
Matrix particle_matrix(const ParticleSet& ps);

/// For a frozen base with linear heads of width d -> K this is (d*K + K)*n.
std::size_t trainable_parameter_count(const ParticleSet& ps);

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BadMagicError : CheckpointError {
    using CheckpointError::CheckpointError;
};
struct VersionMismatchError : CheckpointError {
    using CheckpointError::CheckpointError;
};
struct TruncatedCheckpointError : CheckpointError {
    using CheckpointError::CheckpointError;
};
struct SpecDigestMismatchError : CheckpointError {
    using CheckpointError::CheckpointError;
};

void save_checkpoint(const ParticleSet& ps, const std::string& path);
ParticleSet load_checkpoint(const std::string& path);

}  // namespace repulse
