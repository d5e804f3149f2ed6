#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "repulse/matrix.hpp"

namespace repulse {

enum class Activation : std::uint8_t { ReLU = 0, Tanh = 1 };

/// Feed-forward network shape: first entry is the input width, last is the
/// output width. The activation is applied after every layer except the last;
/// the output is always linear.
struct MlpSpec {
    std::vector<std::size_t> layer_widths;
    Activation activation = Activation::ReLU;

    std::size_t num_layers() const { return layer_widths.size() - 1; }
    std::size_t input_dim() const { return layer_widths.front(); }
    std::size_t output_dim() const { return layer_widths.back(); }

    void validate() const;
    bool operator==(const MlpSpec&) const = default;
};

/// Flat parameters in canonical order: for each layer, the weight matrix
/// (d_out x d_in, row-major) followed by the biases. Checkpoints, kernels and
/// gradients all use this order.
using ParamVector = std::vector<double>;

std::size_t parameter_count(const MlpSpec& spec);

/// Byte offset bookkeeping for one layer inside a flat ParamVector.
struct LayerView {
    std::size_t weight_offset;
    std::size_t bias_offset;
    std::size_t d_in;
    std::size_t d_out;
};
std::vector<LayerView> layer_views(const MlpSpec& spec);

struct Batch {
    Matrix inputs;                 // B x d_in
    std::vector<double> targets;   // class labels (integral values) or regression targets
    bool has_targets() const { return !targets.empty(); }
};

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

Matrix forward(const ParamVector& params, const MlpSpec& spec, const Matrix& inputs);

/// Gradient of <cotangent, f(inputs; params)> with respect to params, in
/// canonical flat order. If input_grad is non-null it receives the gradient
/// with respect to the inputs (B x d_in).
ParamVector backward(const ParamVector& params, const MlpSpec& spec, const Matrix& inputs,
                     const Matrix& output_cotangent, Matrix* input_grad = nullptr);

/// Weights i.i.d. uniform on [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
ParamVector init_params(const MlpSpec& spec, std::uint64_t seed);

double activation_apply(Activation act, double x);
double activation_grad(Activation act, double pre);  // ReLU subgradient at 0 is 0

/// Power-iteration state for one dense layer. u and v are kept unit-norm;
/// coeff is the target Lipschitz bound for the layer.
struct SpectralLayerState {
    std::vector<double> u;  // d_out
    std::vector<double> v;  // d_in
    double coeff = 3.0;
};

SpectralLayerState init_spectral_state(std::size_t d_out, std::size_t d_in, double coeff,
                                       std::uint64_t seed);

/// One power-iteration step on the flat weight block, then rescale by
/// min(1, coeff / sigma_hat). A zero (or rank-degenerate) matrix is returned
/// unchanged with untouched state. Returns sigma_hat.
double spectral_normalize(double* weight, std::size_t d_out, std::size_t d_in,
                          SpectralLayerState& state);
double spectral_normalize(Matrix& weight, SpectralLayerState& state);

}  // namespace repulse
