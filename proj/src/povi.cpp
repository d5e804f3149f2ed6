#include "repulse/povi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "repulse/rng.hpp"
#include "repulse/util.hpp"

namespace repulse {

namespace {

int label_of(double target, std::size_t k) {
    if (!(target >= 0.0) || target != std::floor(target) ||
        target >= static_cast<double>(k))
        throw std::out_of_range("class label " + std::to_string(target) + " outside [0, " +
                                std::to_string(k) + ")");
    return static_cast<int>(target);
}

// d log p(batch) / d outputs, scaled; also reports the batch log likelihood.
Matrix likelihood_cotangent(const Matrix& outputs, const std::vector<double>& targets,
                            const Likelihood& lik, double scale, double* ll_out) {
    const std::size_t b = outputs.rows;
    const std::size_t k = outputs.cols;
    Matrix cot(b, k, 0.0);
    double ll = 0.0;
    if (lik.kind == LikelihoodKind::Categorical) {
        for (std::size_t s = 0; s < b; ++s) {
            const double* z = outputs.row(s);
            const int y = label_of(targets[s], k);
            double mx = z[0];
            for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, z[j]);
            double sum = 0.0;
            for (std::size_t j = 0; j < k; ++j) sum += std::exp(z[j] - mx);
            ll += z[static_cast<std::size_t>(y)] - mx - std::log(sum);
            double* c = cot.row(s);
            for (std::size_t j = 0; j < k; ++j)
                c[j] = scale * ((static_cast<int>(j) == y ? 1.0 : 0.0) -
                                std::exp(z[j] - mx) / sum);
        }
    } else {
        if (k != 1) throw DimensionError("Gaussian likelihood needs one output column");
        const double var = lik.noise_std * lik.noise_std;
        const double log_norm = 0.5 * std::log(2.0 * 3.14159265358979323846 * var);
        for (std::size_t s = 0; s < b; ++s) {
            const double mu = outputs(s, 0);
            const double r = targets[s] - mu;
            ll += -r * r / (2.0 * var) - log_norm;
            cot(s, 0) = scale * r / var;
        }
    }
    if (ll_out != nullptr) *ll_out = ll;
    return cot;
}

struct ParticleGrads {
    std::vector<ParamVector> particle;  // one per particle
    ParamVector base;                   // joint MultiHead mode only, mean over particles
    double mean_nll = 0.0;              // per-sample nats, averaged over particles
};

// Attraction gradients for every particle from the pre-step state, plus the
// shared-base gradient when the base is trainable.
ParticleGrads attraction_all(const ParticleSet& ps, const Batch& batch,
                             const TrainConfig& cfg) {
    const std::size_t n = ps.n();
    const std::size_t b = batch.inputs.rows;
    const double scale =
        cfg.dataset_size > 0 ? static_cast<double>(cfg.dataset_size) / static_cast<double>(b)
                             : 1.0;
    const bool joint = ps.mode == ParticleMode::MultiHead && !ps.base_frozen;

    ParticleGrads g;
    g.particle.resize(n);
    std::vector<double> nlls(n, 0.0);
    std::vector<ParamVector> base_parts;
    if (joint) base_parts.assign(n, ParamVector());

    Matrix feats;
    Matrix base_lin;
    if (ps.mode == ParticleMode::MultiHead) {
        base_lin = forward(ps.base_params, ps.base_spec, batch.inputs);
        feats = base_lin;
        for (double& x : feats.data) x = activation_apply(ps.base_spec.activation, x);
    }

    parallel_for(n, [&](std::size_t i) {
        const MlpSpec& spec = ps.particle_spec();
        const Matrix& in = ps.mode == ParticleMode::MultiHead ? feats : batch.inputs;
        const Matrix out = forward(ps.particles[i], spec, in);
        double ll = 0.0;
        const Matrix cot = likelihood_cotangent(out, batch.targets, cfg.likelihood, scale, &ll);
        nlls[i] = -ll / static_cast<double>(b);
        Matrix input_grad;
        ParamVector grad = backward(ps.particles[i], spec, in, cot,
                                    joint ? &input_grad : nullptr);
        for (std::size_t k = 0; k < grad.size(); ++k)
            grad[k] -= ps.particles[i][k] / cfg.prior_variance;
        g.particle[i] = std::move(grad);
        if (joint) {
            // Chain the feature cotangent through the base activation.
            Matrix lin_cot = input_grad;
            if (ps.base_spec.activation == Activation::Tanh) {
                for (std::size_t k = 0; k < lin_cot.data.size(); ++k)
                    lin_cot.data[k] *= 1.0 - feats.data[k] * feats.data[k];
            } else {
                for (std::size_t k = 0; k < lin_cot.data.size(); ++k)
                    if (!(base_lin.data[k] > 0.0)) lin_cot.data[k] = 0.0;
            }
            base_parts[i] = backward(ps.base_params, ps.base_spec, batch.inputs, lin_cot);
        }
    });

    for (double v : nlls) g.mean_nll += v;
    g.mean_nll /= static_cast<double>(n);

    if (joint) {
        g.base.assign(ps.base_params.size(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < g.base.size(); ++k) g.base[k] += base_parts[i][k];
        for (std::size_t k = 0; k < g.base.size(); ++k) {
            g.base[k] /= static_cast<double>(n);
            g.base[k] -= ps.base_params[k] / cfg.prior_variance;
        }
    }
    return g;
}

double mean_offdiag_l2(const Matrix& vectors) {
    if (vectors.rows < 2) return 0.0;
    const Matrix d = pairwise_distances(vectors, Distance::L2);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < d.rows; ++i)
        for (std::size_t j = i + 1; j < d.cols; ++j) {
            sum += d(i, j);
            ++count;
        }
    return sum / static_cast<double>(count);
}

void apply_updates(ParticleSet& ps, const std::vector<ParamVector>& updates,
                   const ParticleGrads& grads, double step_size) {
    parallel_for(ps.n(), [&](std::size_t i) {
        ParamVector& theta = ps.particles[i];
        const ParamVector& u = updates[i];
        for (std::size_t k = 0; k < theta.size(); ++k) theta[k] += step_size * u[k];
    });
    if (!grads.base.empty())
        for (std::size_t k = 0; k < ps.base_params.size(); ++k)
            ps.base_params[k] += step_size * grads.base[k];
}

}  // namespace

double log_likelihood(const Matrix& outputs, const std::vector<double>& targets,
                      const Likelihood& lik) {
    if (outputs.rows != targets.size())
        throw DimensionError("output rows and target count differ");
    double ll = 0.0;
    likelihood_cotangent(outputs, targets, lik, 1.0, &ll);
    return ll;
}

ParamVector attraction_gradient(const ParticleSet& ps, std::size_t i, const Batch& batch,
                                const TrainConfig& cfg, ParamVector* base_grad) {
    if (i >= ps.n()) throw std::out_of_range("particle index out of range");
    if (!batch.has_targets()) throw std::invalid_argument("attraction needs batch targets");
    const ParticleGrads g = attraction_all(ps, batch, cfg);
    if (base_grad != nullptr) *base_grad = g.base;
    return g.particle[i];
}

StepStats povi_step_param(ParticleSet& ps, const Batch& batch, const TrainConfig& cfg,
                          double step_size) {
    const std::size_t n = ps.n();
    ParticleGrads grads = attraction_all(ps, batch, cfg);
    StepStats stats;
    stats.train_nll = grads.mean_nll;

    const bool repulse =
        cfg.method == Method::ParamRepulsion && cfg.repulsion_weight != 0.0 && n > 1;
    if (repulse) {
        KernelConfig kc = cfg.kernel;
        kc.space = KernelSpace::Parameter;
        const Matrix vectors = particle_matrix(ps);
        double bw = 0.0;
        const Matrix dirs = repulsion_directions(vectors, kc, &bw);
        stats.bandwidth = bw;
        stats.mean_param_distance = mean_offdiag_l2(vectors);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < grads.particle[i].size(); ++k)
                grads.particle[i][k] -= cfg.repulsion_weight * dirs(i, k);
    }
    apply_updates(ps, grads.particle, grads, step_size);
    ps.step_counter += 1;
    return stats;
}

StepStats povi_step_function(ParticleSet& ps, const Batch& train_batch,
                             const RepulsionBatch& repulsion, const TrainConfig& cfg,
                             double step_size) {
    const std::size_t n = ps.n();
    ParticleGrads grads = attraction_all(ps, train_batch, cfg);
    StepStats stats;
    stats.train_nll = grads.mean_nll;

    const bool repulse = cfg.repulsion_weight != 0.0 && n > 1;
    if (repulse) {
        if (repulsion.inputs.rows == 0)
            throw std::invalid_argument("function repulsion needs a repulsion batch");
        const std::size_t br = repulsion.inputs.rows;
        const std::size_t k = ps.output_dim();
        const MlpSpec& spec = ps.particle_spec();

        Matrix feats;
        if (ps.mode == ParticleMode::MultiHead) feats = base_features(ps, repulsion.inputs);
        const Matrix& rep_in = ps.mode == ParticleMode::MultiHead ? feats : repulsion.inputs;

        std::vector<Matrix> outs(n);
        parallel_for(n, [&](std::size_t i) { outs[i] = forward(ps.particles[i], spec, rep_in); });

        const bool prob_repr = cfg.kernel.representation == FunctionRepr::Probabilities;
        Matrix u(n, br * k);
        std::vector<Matrix> probs;
        if (prob_repr) probs.assign(n, Matrix());
        for (std::size_t i = 0; i < n; ++i) {
            if (prob_repr) {
                Matrix p(br, k);
                for (std::size_t s = 0; s < br; ++s) {
                    const double* z = outs[i].row(s);
                    double mx = z[0];
                    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, z[j]);
                    double sum = 0.0;
                    for (std::size_t j = 0; j < k; ++j) {
                        p(s, j) = std::exp(z[j] - mx);
                        sum += p(s, j);
                    }
                    for (std::size_t j = 0; j < k; ++j) p(s, j) /= sum;
                }
                std::copy(p.data.begin(), p.data.end(), u.row(i));
                probs[i] = std::move(p);
            } else {
                std::copy(outs[i].data.begin(), outs[i].data.end(), u.row(i));
            }
        }

        KernelConfig kc = cfg.kernel;
        kc.space = KernelSpace::Function;
        double bw = 0.0;
        const Matrix dirs = repulsion_directions(u, kc, &bw);
        stats.bandwidth = bw;
        stats.mean_function_distance = mean_offdiag_l2(u);

        parallel_for(n, [&](std::size_t i) {
            Matrix cot(br, k);
            std::copy(dirs.row(i), dirs.row(i) + br * k, cot.data.begin());
            if (prob_repr) {
                // Pull the probability-space cotangent back through softmax.
                const Matrix& p = probs[i];
                for (std::size_t s = 0; s < br; ++s) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < k; ++j) dot += cot(s, j) * p(s, j);
                    for (std::size_t j = 0; j < k; ++j)
                        cot(s, j) = p(s, j) * (cot(s, j) - dot);
                }
            }
            const ParamVector pull = backward(ps.particles[i], spec, rep_in, cot);
            for (std::size_t q = 0; q < grads.particle[i].size(); ++q)
                grads.particle[i][q] -= cfg.repulsion_weight * pull[q];
        });
    }
    apply_updates(ps, grads.particle, grads, step_size);
    ps.step_counter += 1;
    return stats;
}

std::pair<ParticleSet, TrainLog> train(ParticleSet ps, const Dataset& data,
                                       const RepulsionSource* rep_source,
                                       const TrainConfig& cfg_in) {
    ps.validate();
    if (data.size() == 0) throw std::invalid_argument("empty dataset");
    if (cfg_in.train_batch_size == 0) throw std::invalid_argument("train batch size is 0");
    if (cfg_in.train_batch_size > data.size())
        throw std::invalid_argument("train batch size exceeds dataset size");
    if (cfg_in.method == Method::FunctionRepulsion && rep_source == nullptr &&
        cfg_in.repulsion_weight != 0.0 && ps.n() > 1)
        throw std::invalid_argument("function repulsion needs a repulsion source");

    TrainConfig cfg = cfg_in;
    cfg.dataset_size = data.size();

    const std::size_t n_data = data.size();
    Rng shuffle_rng(derive_seed(cfg.seed, 1));
    Rng rep_rng(derive_seed(cfg.seed, 2));

    const bool use_function = cfg.method == Method::FunctionRepulsion &&
                              cfg.repulsion_weight != 0.0 && ps.n() > 1;

    // Spectral states per trainable layer: particles first, then the base
    // when it trains jointly.
    std::vector<std::vector<SpectralLayerState>> head_states;
    std::vector<SpectralLayerState> base_states;
    const bool joint = ps.mode == ParticleMode::MultiHead && !ps.base_frozen;
    if (cfg.spectral_norm) {
        const auto views = layer_views(ps.particle_spec());
        head_states.resize(ps.n());
        for (std::size_t i = 0; i < ps.n(); ++i)
            for (std::size_t l = 0; l < views.size(); ++l)
                head_states[i].push_back(init_spectral_state(
                    views[l].d_out, views[l].d_in, cfg.spectral_coeff,
                    derive_seed(cfg.seed, 1000 + i * 100 + l)));
        if (joint) {
            const auto bviews = layer_views(ps.base_spec);
            for (std::size_t l = 0; l < bviews.size(); ++l)
                base_states.push_back(init_spectral_state(bviews[l].d_out, bviews[l].d_in,
                                                          cfg.spectral_coeff,
                                                          derive_seed(cfg.seed, 2000 + l)));
        }
    }

    std::vector<std::size_t> order(n_data);
    std::iota(order.begin(), order.end(), 0);
    std::size_t pos = n_data;  // forces a shuffle before the first batch

    std::vector<DecayPoint> decay = cfg.decay;
    std::sort(decay.begin(), decay.end(),
              [](const DecayPoint& a, const DecayPoint& b) { return a.step < b.step; });
    std::size_t decay_idx = 0;
    double multiplier = 1.0;

    TrainLog log;
    for (std::uint64_t t = 0; t < cfg.steps; ++t) {
        while (decay_idx < decay.size() && decay[decay_idx].step <= t) {
            multiplier = decay[decay_idx].multiplier;
            ++decay_idx;
        }
        const double eps = cfg.step_size * multiplier;

        if (pos >= n_data) {
            shuffle_rng.shuffle(order);
            pos = 0;
        }
        const std::size_t b = std::min(cfg.train_batch_size, n_data - pos);
        Batch batch;
        batch.inputs = Matrix(b, data.dim());
        batch.targets.resize(b);
        for (std::size_t s = 0; s < b; ++s) {
            const std::size_t idx = order[pos + s];
            for (std::size_t j = 0; j < data.dim(); ++j)
                batch.inputs(s, j) = data.inputs(idx, j);
            batch.targets[s] = data.targets[idx];
        }
        pos += b;

        StepStats stats;
        if (use_function) {
            const RepulsionBatch rep = draw(*rep_source, rep_rng, cfg.repulsion_batch_size);
            stats = povi_step_function(ps, batch, rep, cfg, eps);
        } else {
            stats = povi_step_param(ps, batch, cfg, eps);
        }

        if (cfg.spectral_norm) {
            const auto views = layer_views(ps.particle_spec());
            for (std::size_t i = 0; i < ps.n(); ++i)
                for (std::size_t l = 0; l < views.size(); ++l)
                    spectral_normalize(ps.particles[i].data() + views[l].weight_offset,
                                       views[l].d_out, views[l].d_in, head_states[i][l]);
            if (joint) {
                const auto bviews = layer_views(ps.base_spec);
                for (std::size_t l = 0; l < bviews.size(); ++l)
                    spectral_normalize(ps.base_params.data() + bviews[l].weight_offset,
                                       bviews[l].d_out, bviews[l].d_in, base_states[l]);
            }
        }

        const bool record = cfg.log_every != 0 && ((t + 1) % cfg.log_every == 0 ||
                                                   t + 1 == cfg.steps);
        if (record) {
            if (!std::isfinite(stats.train_nll))
                throw NumericError("non-finite training loss at step " + std::to_string(t + 1));
            TrainLogEntry e;
            e.step = ps.step_counter;
            e.train_nll = stats.train_nll;
            e.mean_function_distance = stats.mean_function_distance;
            e.mean_param_distance = stats.mean_param_distance != 0.0
                                        ? stats.mean_param_distance
                                        : mean_offdiag_l2(particle_matrix(ps));
            e.bandwidth = stats.bandwidth;
            log.entries.push_back(e);
        }
    }

    for (const ParamVector& p : ps.particles)
        for (double v : p)
            if (!std::isfinite(v)) throw NumericError("non-finite particle parameter");
    return {std::move(ps), std::move(log)};
}

}  // namespace repulse
