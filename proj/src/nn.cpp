#include "repulse/nn.hpp"

#include <cmath>
#include <string>

#include "repulse/rng.hpp"

namespace repulse {

void MlpSpec::validate() const {
    if (layer_widths.size() < 2)
        throw DimensionError("MlpSpec requires at least input and output widths");
    for (std::size_t w : layer_widths)
        if (w == 0) throw DimensionError("MlpSpec widths must be positive");
}

std::size_t parameter_count(const MlpSpec& spec) {
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l)
        total += spec.layer_widths[l] * spec.layer_widths[l + 1] + spec.layer_widths[l + 1];
    return total;
}

std::vector<LayerView> layer_views(const MlpSpec& spec) {
    std::vector<LayerView> views;
    std::size_t pos = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
        LayerView v;
        v.d_in = spec.layer_widths[l];
        v.d_out = spec.layer_widths[l + 1];
        v.weight_offset = pos;
        v.bias_offset = pos + v.d_in * v.d_out;
        pos = v.bias_offset + v.d_out;
        views.push_back(v);
    }
    return views;
}

double activation_apply(Activation act, double x) {
    return act == Activation::Tanh ? std::tanh(x) : (x > 0.0 ? x : 0.0);
}

double activation_grad(Activation act, double pre) {
    if (act == Activation::Tanh) {
        const double t = std::tanh(pre);
        return 1.0 - t * t;
    }
    return pre > 0.0 ? 1.0 : 0.0;
}

namespace {

void check_shapes(const ParamVector& params, const MlpSpec& spec, const Matrix& inputs) {
    spec.validate();
    if (params.size() != parameter_count(spec))
        throw DimensionError("parameter vector has " + std::to_string(params.size()) +
                             " values, spec needs " + std::to_string(parameter_count(spec)));
    if (inputs.cols != spec.input_dim())
        throw DimensionError("layer 0: input width " + std::to_string(inputs.cols) +
                             " does not match spec width " + std::to_string(spec.input_dim()));
}

// Affine layer on a full batch: out = act @ W^T + b.
void affine(const double* w, const double* b, const Matrix& in, Matrix& out) {
    for (std::size_t s = 0; s < in.rows; ++s) {
        const double* x = in.row(s);
        double* y = out.row(s);
        for (std::size_t o = 0; o < out.cols; ++o) {
            const double* wrow = w + o * in.cols;
            double sum = b[o];
            for (std::size_t i = 0; i < in.cols; ++i) sum += wrow[i] * x[i];
            y[o] = sum;
        }
    }
}

}  // namespace

Matrix forward(const ParamVector& params, const MlpSpec& spec, const Matrix& inputs) {
    check_shapes(params, spec, inputs);
    const auto views = layer_views(spec);
    Matrix act = inputs;
    for (std::size_t l = 0; l < views.size(); ++l) {
        const LayerView& v = views[l];
        Matrix next(act.rows, v.d_out);
        affine(params.data() + v.weight_offset, params.data() + v.bias_offset, act, next);
        if (l + 1 < views.size())
            for (double& x : next.data) x = activation_apply(spec.activation, x);
        act = std::move(next);
    }
    return act;
}

ParamVector backward(const ParamVector& params, const MlpSpec& spec, const Matrix& inputs,
                     const Matrix& output_cotangent, Matrix* input_grad) {
    check_shapes(params, spec, inputs);
    if (output_cotangent.rows != inputs.rows || output_cotangent.cols != spec.output_dim())
        throw DimensionError("cotangent shape " + std::to_string(output_cotangent.rows) + "x" +
                             std::to_string(output_cotangent.cols) + " does not match outputs");
    const auto views = layer_views(spec);
    const std::size_t L = views.size();

    // Post-activation values per layer; acts[0] is the input batch.
    std::vector<Matrix> acts(L + 1);
    acts[0] = inputs;
    for (std::size_t l = 0; l < L; ++l) {
        const LayerView& v = views[l];
        Matrix next(inputs.rows, v.d_out);
        affine(params.data() + v.weight_offset, params.data() + v.bias_offset, acts[l], next);
        if (l + 1 < L)
            for (double& x : next.data) x = activation_apply(spec.activation, x);
        acts[l + 1] = std::move(next);
    }

    ParamVector grad(params.size(), 0.0);
    Matrix delta = output_cotangent;
    for (std::size_t l = L; l-- > 0;) {
        const LayerView& v = views[l];
        const double* w = params.data() + v.weight_offset;
        double* gw = grad.data() + v.weight_offset;
        double* gb = grad.data() + v.bias_offset;
        for (std::size_t s = 0; s < inputs.rows; ++s) {
            const double* d = delta.row(s);
            const double* a = acts[l].row(s);
            for (std::size_t o = 0; o < v.d_out; ++o) {
                double* gwrow = gw + o * v.d_in;
                for (std::size_t i = 0; i < v.d_in; ++i) gwrow[i] += d[o] * a[i];
                gb[o] += d[o];
            }
        }
        if (l == 0 && input_grad == nullptr) break;
        Matrix prev(inputs.rows, v.d_in, 0.0);
        for (std::size_t s = 0; s < inputs.rows; ++s) {
            const double* d = delta.row(s);
            double* p = prev.row(s);
            for (std::size_t o = 0; o < v.d_out; ++o) {
                const double* wrow = w + o * v.d_in;
                for (std::size_t i = 0; i < v.d_in; ++i) p[i] += d[o] * wrow[i];
            }
        }
        if (l > 0) {
            // Chain through the activation; ReLU uses post-activation sign
            // (output 0 means gradient 0, including at the kink).
            const Matrix& a = acts[l];
            if (spec.activation == Activation::Tanh) {
                for (std::size_t k = 0; k < prev.data.size(); ++k)
                    prev.data[k] *= 1.0 - a.data[k] * a.data[k];
            } else {
                for (std::size_t k = 0; k < prev.data.size(); ++k)
                    if (!(a.data[k] > 0.0)) prev.data[k] = 0.0;
            }
        }
        if (l == 0) {
            *input_grad = std::move(prev);
            break;
        }
        delta = std::move(prev);
    }
    return grad;
}

ParamVector init_params(const MlpSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    ParamVector params(parameter_count(spec), 0.0);
    for (const LayerView& v : layer_views(spec)) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(v.d_in));
        for (std::size_t k = 0; k < v.d_in * v.d_out; ++k)
            params[v.weight_offset + k] = rng.uniform(-bound, bound);
    }
    return params;
}

SpectralLayerState init_spectral_state(std::size_t d_out, std::size_t d_in, double coeff,
                                       std::uint64_t seed) {
    Rng rng(seed);
    SpectralLayerState state;
    state.coeff = coeff;
    state.u.resize(d_out);
    state.v.resize(d_in);
    auto fill_unit = [&rng](std::vector<double>& x) {
        double norm = 0.0;
        do {
            norm = 0.0;
            for (double& e : x) {
                e = rng.normal();
                norm += e * e;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        for (double& e : x) e /= norm;
    };
    fill_unit(state.u);
    fill_unit(state.v);
    return state;
}

double spectral_normalize(double* weight, std::size_t d_out, std::size_t d_in,
                          SpectralLayerState& state) {
    if (state.u.size() != d_out || state.v.size() != d_in)
        throw DimensionError("spectral state does not match weight shape");
    std::vector<double> v_new(d_in, 0.0);
    for (std::size_t o = 0; o < d_out; ++o) {
        const double* wrow = weight + o * d_in;
        for (std::size_t i = 0; i < d_in; ++i) v_new[i] += wrow[i] * state.u[o];
    }
    double vn = 0.0;
    for (double e : v_new) vn += e * e;
    if (vn == 0.0) return 0.0;
    vn = std::sqrt(vn);
    for (double& e : v_new) e /= vn;

    std::vector<double> u_new(d_out, 0.0);
    for (std::size_t o = 0; o < d_out; ++o) {
        const double* wrow = weight + o * d_in;
        double sum = 0.0;
        for (std::size_t i = 0; i < d_in; ++i) sum += wrow[i] * v_new[i];
        u_new[o] = sum;
    }
    double un = 0.0;
    for (double e : u_new) un += e * e;
    if (un == 0.0) return 0.0;
    un = std::sqrt(un);
    for (double& e : u_new) e /= un;

    state.v = std::move(v_new);
    state.u = std::move(u_new);
    double sigma = 0.0;
    for (std::size_t o = 0; o < d_out; ++o) {
        const double* wrow = weight + o * d_in;
        double sum = 0.0;
        for (std::size_t i = 0; i < d_in; ++i) sum += wrow[i] * state.v[i];
        sigma += state.u[o] * sum;
    }
    const double scale = sigma > state.coeff ? state.coeff / sigma : 1.0;
    if (scale < 1.0)
        for (std::size_t k = 0; k < d_out * d_in; ++k) weight[k] *= scale;
    return sigma;
}

double spectral_normalize(Matrix& weight, SpectralLayerState& state) {
    return spectral_normalize(weight.data.data(), weight.rows, weight.cols, state);
}

}  // namespace repulse
