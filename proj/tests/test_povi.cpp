#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "repulse/dataset.hpp"
#include "repulse/kernels.hpp"
#include "repulse/nn.hpp"
#include "repulse/particles.hpp"
#include "repulse/povi.hpp"
#include "repulse/repulsion.hpp"
#include "repulse/rng.hpp"

using namespace repulse;

namespace {

Matrix random_matrix(std::uint64_t seed, std::size_t rows, std::size_t cols) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.normal();
    return m;
}

Batch class_batch(std::uint64_t seed, std::size_t b, std::size_t d, std::size_t k) {
    Rng rng(seed);
    Batch batch;
    batch.inputs = Matrix(b, d);
    for (double& v : batch.inputs.data) v = rng.normal();
    batch.targets.resize(b);
    for (double& t : batch.targets) t = static_cast<double>(rng.index(k));
    return batch;
}

Batch reg_batch(std::uint64_t seed, std::size_t b, std::size_t d) {
    Rng rng(seed);
    Batch batch;
    batch.inputs = Matrix(b, d);
    for (double& v : batch.inputs.data) v = rng.normal();
    batch.targets.resize(b);
    for (double& t : batch.targets) t = rng.normal();
    return batch;
}

Dataset class_dataset(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t k) {
    Batch b = class_batch(seed, n, d, k);
    Dataset ds;
    ds.inputs = std::move(b.inputs);
    ds.targets = std::move(b.targets);
    ds.target_kind = TargetKind::ClassLabel;
    ds.name = "synthetic";
    return ds;
}

constexpr double kPi = 3.14159265358979323846;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double attraction_objective(const ParamVector& theta, const MlpSpec& spec, const Matrix& inputs,
                            const std::vector<double>& targets, const Likelihood& lik,
                            double scale, double prior_variance) {
    const Matrix out = forward(theta, spec, inputs);
    return scale * log_likelihood(out, targets, lik) - dot(theta, theta) / (2.0 * prior_variance);
}

}  // namespace

TEST_CASE("log likelihood matches closed forms") {
    SUBCASE("uniform logits over ten classes") {
        const std::size_t b = 7, k = 10;
        Matrix z(b, k, 0.0);
        std::vector<double> y(b);
        for (std::size_t s = 0; s < b; ++s) y[s] = static_cast<double>(s % k);
        const double ll = log_likelihood(z, y, Likelihood::categorical());
        CHECK(ll == doctest::Approx(-static_cast<double>(b) * std::log(10.0)).epsilon(1e-12));
    }
    SUBCASE("categorical against a scalar log-softmax loop") {
        Rng rng(4);
        const std::size_t b = 12, k = 5;
        Matrix z = random_matrix(8, b, k);
        std::vector<double> y(b);
        for (double& t : y) t = static_cast<double>(rng.index(k));
        double want = 0.0;
        for (std::size_t s = 0; s < b; ++s) {
            double denom = 0.0;
            for (std::size_t j = 0; j < k; ++j) denom += std::exp(z(s, j));
            want += z(s, static_cast<std::size_t>(y[s])) - std::log(denom);
        }
        CHECK(log_likelihood(z, y, Likelihood::categorical()) ==
              doctest::Approx(want).epsilon(1e-12));
    }
    SUBCASE("gaussian with zero residual is the pure normalizer") {
        const std::size_t b = 9;
        const double sigma = 0.37;
        Matrix z(b, 1);
        std::vector<double> y(b);
        for (std::size_t s = 0; s < b; ++s) {
            z(s, 0) = 0.1 * static_cast<double>(s);
            y[s] = z(s, 0);
        }
        const double want =
            -static_cast<double>(b) * 0.5 * std::log(2.0 * kPi * sigma * sigma);
        CHECK(log_likelihood(z, y, Likelihood::gaussian(sigma)) ==
              doctest::Approx(want).epsilon(1e-12));
    }
    SUBCASE("gaussian against the density formula") {
        Rng rng(5);
        const std::size_t b = 11;
        const double sigma = 0.25;
        Matrix z(b, 1);
        std::vector<double> y(b);
        for (std::size_t s = 0; s < b; ++s) {
            z(s, 0) = rng.normal();
            y[s] = rng.normal();
        }
        double want = 0.0;
        for (std::size_t s = 0; s < b; ++s) {
            const double r = y[s] - z(s, 0);
            want += -r * r / (2.0 * sigma * sigma) -
                    0.5 * std::log(2.0 * kPi * sigma * sigma);
        }
        CHECK(log_likelihood(z, y, Likelihood::gaussian(sigma)) ==
              doctest::Approx(want).epsilon(1e-12));
    }
    SUBCASE("input validation") {
        Matrix z(3, 2, 0.0);
        CHECK_THROWS_AS(log_likelihood(z, {0.0, 1.0}, Likelihood::categorical()),
                        DimensionError);
        CHECK_THROWS_AS(log_likelihood(z, {0.0, 1.0, 0.0}, Likelihood::gaussian(0.1)),
                        DimensionError);
        CHECK_THROWS_AS(log_likelihood(z, {0.0, 2.0, 0.0}, Likelihood::categorical()),
                        std::out_of_range);
        CHECK_THROWS_AS(log_likelihood(z, {0.0, 0.5, 0.0}, Likelihood::categorical()),
                        std::out_of_range);
    }
}

TEST_CASE("attraction gradient matches finite differences of its objective") {
    const double prior_variance = 4.0;

    SUBCASE("full ensemble, categorical") {
        double worst = 0.0;
        for (std::uint64_t trial = 0; trial < 20; ++trial) {
            const MlpSpec spec{{3, 6, 4}, Activation::Tanh};
            ParticleSet ps = init_full_ensemble(spec, 2, 100 + trial);
            Batch batch = class_batch(200 + trial, 8, 3, 4);
            TrainConfig cfg;
            cfg.likelihood = Likelihood::categorical();
            cfg.prior_variance = prior_variance;
            cfg.dataset_size = 40;
            const double scale = 40.0 / 8.0;

            const ParamVector got = attraction_gradient(ps, 1, batch, cfg);
            const std::vector<double> want = oracles::finite_difference_gradient(
                [&](const std::vector<double>& theta) {
                    return attraction_objective(theta, spec, batch.inputs, batch.targets,
                                                cfg.likelihood, scale, prior_variance);
                },
                ps.particles[1]);
            worst = std::max(worst, oracles::max_rel_error(got, want));
        }
        CHECK(worst < 1e-4);
    }

    SUBCASE("full ensemble, gaussian") {
        double worst = 0.0;
        for (std::uint64_t trial = 0; trial < 20; ++trial) {
            const MlpSpec spec{{2, 5, 1}, Activation::Tanh};
            ParticleSet ps = init_full_ensemble(spec, 3, 300 + trial);
            Batch batch = reg_batch(400 + trial, 6, 2);
            TrainConfig cfg;
            cfg.likelihood = Likelihood::gaussian(0.3);
            cfg.prior_variance = prior_variance;
            cfg.dataset_size = 30;
            const double scale = 30.0 / 6.0;

            const ParamVector got = attraction_gradient(ps, 0, batch, cfg);
            const std::vector<double> want = oracles::finite_difference_gradient(
                [&](const std::vector<double>& theta) {
                    return attraction_objective(theta, spec, batch.inputs, batch.targets,
                                                cfg.likelihood, scale, prior_variance);
                },
                ps.particles[0]);
            worst = std::max(worst, oracles::max_rel_error(got, want));
        }
        CHECK(worst < 1e-4);
    }

    SUBCASE("frozen multi-head differentiates the head only") {
        const MlpSpec base{{2, 7, 5}, Activation::Tanh};
        const MlpSpec head{{5, 3}, Activation::Tanh};
        ParticleSet ps = init_multi_head(base, head, 3, 17);
        Batch batch = class_batch(18, 9, 2, 3);
        TrainConfig cfg;
        cfg.prior_variance = prior_variance;
        cfg.dataset_size = 18;
        const double scale = 18.0 / 9.0;

        const Matrix feats = base_features(ps, batch.inputs);
        ParamVector base_grad{1.0};
        const ParamVector got = attraction_gradient(ps, 2, batch, cfg, &base_grad);
        CHECK(base_grad.empty());
        const std::vector<double> want = oracles::finite_difference_gradient(
            [&](const std::vector<double>& theta) {
                return attraction_objective(theta, head, feats, batch.targets, cfg.likelihood,
                                            scale, prior_variance);
            },
            ps.particles[2]);
        CHECK(oracles::max_rel_error(got, want) < 1e-4);
    }

    SUBCASE("joint multi-head also fills the base gradient") {
        const MlpSpec base{{2, 6, 4}, Activation::Tanh};
        const MlpSpec head{{4, 3}, Activation::Tanh};
        ParticleSet ps = init_multi_head(base, head, 3, 23);
        ps.base_frozen = false;
        Batch batch = class_batch(24, 7, 2, 3);
        TrainConfig cfg;
        cfg.prior_variance = prior_variance;
        cfg.dataset_size = 21;
        const double scale = 21.0 / 7.0;

        ParamVector base_grad;
        const ParamVector got = attraction_gradient(ps, 1, batch, cfg, &base_grad);
        REQUIRE(base_grad.size() == ps.base_params.size());

        const std::vector<double> want_head = oracles::finite_difference_gradient(
            [&](const std::vector<double>& theta) {
                Matrix feats = forward(ps.base_params, base, batch.inputs);
                for (double& x : feats.data) x = activation_apply(base.activation, x);
                return attraction_objective(theta, head, feats, batch.targets, cfg.likelihood,
                                            scale, prior_variance);
            },
            ps.particles[1]);
        CHECK(oracles::max_rel_error(got, want_head) < 1e-4);

        const std::vector<double> want_base = oracles::finite_difference_gradient(
            [&](const std::vector<double>& b) {
                Matrix feats = forward(b, base, batch.inputs);
                for (double& x : feats.data) x = activation_apply(base.activation, x);
                double mean_ll = 0.0;
                for (std::size_t i = 0; i < ps.n(); ++i) {
                    const Matrix out = forward(ps.particles[i], head, feats);
                    mean_ll += scale * log_likelihood(out, batch.targets, cfg.likelihood);
                }
                mean_ll /= static_cast<double>(ps.n());
                return mean_ll - dot(b, b) / (2.0 * prior_variance);
            },
            ps.base_params);
        CHECK(oracles::max_rel_error(base_grad, want_base) < 1e-4);
    }

    SUBCASE("index and target validation") {
        ParticleSet ps = init_full_ensemble(MlpSpec{{2, 3, 2}, Activation::Tanh}, 2, 1);
        Batch batch = class_batch(1, 4, 2, 2);
        TrainConfig cfg;
        CHECK_THROWS_AS(attraction_gradient(ps, 2, batch, cfg), std::out_of_range);
        Batch empty;
        empty.inputs = batch.inputs;
        CHECK_THROWS_AS(attraction_gradient(ps, 0, empty, cfg), std::invalid_argument);
    }
}

TEST_CASE("single-particle trajectories coincide bitwise with the map estimate") {
    const MlpSpec spec{{2, 8, 3}, Activation::Tanh};
    const Batch batch = class_batch(9, 16, 2, 3);
    TrainConfig plain;
    plain.method = Method::PlainEnsemble;
    plain.dataset_size = 64;

    TrainConfig param = plain;
    param.method = Method::ParamRepulsion;
    param.repulsion_weight = 1.0;

    TrainConfig func = plain;
    func.method = Method::FunctionRepulsion;
    func.repulsion_weight = 1.0;

    ParticleSet a = init_full_ensemble(spec, 1, 55);
    ParticleSet b = a;
    ParticleSet c = a;
    const RepulsionBatch rep{random_matrix(77, 8, 2)};
    for (int t = 0; t < 50; ++t) {
        povi_step_param(a, batch, plain, 1e-3);
        povi_step_param(b, batch, param, 1e-3);
        povi_step_function(c, batch, rep, func, 1e-3);
    }
    CHECK(a.particles[0] == b.particles[0]);
    CHECK(a.particles[0] == c.particles[0]);
    CHECK(a.step_counter == 50);
}

TEST_CASE("zero repulsion weight reduces both spaces to the plain ensemble bitwise") {
    const MlpSpec spec{{2, 6, 2}, Activation::ReLU};
    const Batch batch = class_batch(13, 12, 2, 2);
    TrainConfig plain;
    plain.method = Method::PlainEnsemble;
    plain.dataset_size = 48;

    TrainConfig param = plain;
    param.method = Method::ParamRepulsion;
    param.repulsion_weight = 0.0;

    TrainConfig func = plain;
    func.method = Method::FunctionRepulsion;
    func.repulsion_weight = 0.0;

    ParticleSet a = init_full_ensemble(spec, 4, 66);
    ParticleSet b = a;
    ParticleSet c = a;
    const RepulsionBatch none{Matrix()};
    for (int t = 0; t < 30; ++t) {
        povi_step_param(a, batch, plain, 2e-3);
        povi_step_param(b, batch, param, 2e-3);
        povi_step_function(c, batch, none, func, 2e-3);
    }
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(a.particles[i] == b.particles[i]);
        CHECK(a.particles[i] == c.particles[i]);
    }
}

TEST_CASE("parameter repulsion pushes close particles apart") {
    const MlpSpec spec{{2, 4, 2}, Activation::Tanh};
    ParticleSet base = init_full_ensemble(spec, 2, 3);
    base.particles[1] = base.particles[0];
    Rng rng(71);
    for (double& v : base.particles[1]) v += 1e-2 * rng.normal();

    const Batch batch = class_batch(5, 10, 2, 2);
    TrainConfig with;
    with.method = Method::ParamRepulsion;
    with.repulsion_weight = 1.0;
    with.dataset_size = 10;
    TrainConfig without = with;
    without.repulsion_weight = 0.0;

    ParticleSet a = base;
    ParticleSet b = base;
    const double eps = 1e-3;
    povi_step_param(a, batch, with, eps);
    povi_step_param(b, batch, without, eps);

    for (std::size_t i = 0; i < 2; ++i) {
        const std::size_t j = 1 - i;
        std::vector<double> push(a.particles[i].size());
        std::vector<double> away(push.size());
        for (std::size_t q = 0; q < push.size(); ++q) {
            push[q] = a.particles[i][q] - b.particles[i][q];
            away[q] = base.particles[i][q] - base.particles[j][q];
        }
        CHECK(dot(push, away) > 0.0);
    }
}

TEST_CASE("function repulsion pull-back matches finite differences") {
    const std::size_t n = 4;
    const MlpSpec spec{{2, 6, 3}, Activation::Tanh};
    const Batch batch = class_batch(31, 8, 2, 3);
    const RepulsionBatch rep{random_matrix(32, 5, 2)};
    const std::size_t br = rep.inputs.rows, k = spec.output_dim();

    for (const FunctionRepr repr : {FunctionRepr::Logits, FunctionRepr::Probabilities}) {
        CAPTURE(static_cast<int>(repr));
        const ParticleSet ps = init_full_ensemble(spec, n, 90);

        const auto embed = [&](const ParamVector& theta) {
            Matrix out = forward(theta, spec, rep.inputs);
            if (repr == FunctionRepr::Probabilities) {
                for (std::size_t s = 0; s < br; ++s) {
                    double* z = out.row(s);
                    double mx = z[0];
                    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, z[j]);
                    double sum = 0.0;
                    for (std::size_t j = 0; j < k; ++j) {
                        z[j] = std::exp(z[j] - mx);
                        sum += z[j];
                    }
                    for (std::size_t j = 0; j < k; ++j) z[j] /= sum;
                }
            }
            return out.data;
        };

        Matrix u(n, br * k);
        for (std::size_t i = 0; i < n; ++i) {
            const std::vector<double> ui = embed(ps.particles[i]);
            std::copy(ui.begin(), ui.end(), u.row(i));
        }
        const double nu = median_bandwidth(pairwise_distances(u, Distance::SqL2), n);

        TrainConfig plain;
        plain.method = Method::PlainEnsemble;
        plain.dataset_size = 8;
        TrainConfig func = plain;
        func.method = Method::FunctionRepulsion;
        func.repulsion_weight = 1.0;
        func.kernel.distance = Distance::SqL2;
        func.kernel.bandwidth = Bandwidth::fixed(nu);
        func.kernel.representation = repr;

        const double eps = 1e-3;
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            ParticleSet with = ps;
            ParticleSet without = ps;
            povi_step_function(with, batch, rep, func, eps);
            povi_step_param(without, batch, plain, eps);

            std::vector<double> pull(ps.particles[i].size());
            for (std::size_t q = 0; q < pull.size(); ++q)
                pull[q] = (without.particles[i][q] - with.particles[i][q]) / eps;

            const std::vector<double> want = oracles::finite_difference_gradient(
                [&](const std::vector<double>& theta) {
                    const std::vector<double> ui = embed(theta);
                    double total = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        double sq = 0.0;
                        for (std::size_t q = 0; q < ui.size(); ++q) {
                            const double diff = ui[q] - u(j, q);
                            sq += diff * diff;
                        }
                        total += std::exp(-sq / nu);
                    }
                    return std::log(total);
                },
                ps.particles[i]);
            worst = std::max(worst, oracles::max_rel_error(pull, want, 1e-4));
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("function repulsion with a positive weight requires a repulsion batch") {
    const MlpSpec spec{{2, 4, 2}, Activation::Tanh};
    ParticleSet ps = init_full_ensemble(spec, 3, 7);
    const Batch batch = class_batch(8, 6, 2, 2);
    TrainConfig func;
    func.method = Method::FunctionRepulsion;
    func.repulsion_weight = 1.0;
    func.dataset_size = 6;
    const RepulsionBatch none{Matrix()};
    CHECK_THROWS_AS(povi_step_function(ps, batch, none, func, 1e-3), std::invalid_argument);
}

TEST_CASE("identical particles stay identical through both step kinds") {
    const MlpSpec spec{{2, 5, 2}, Activation::Tanh};
    ParticleSet proto = init_full_ensemble(spec, 1, 44);
    ParticleSet ps = clone_from_map(proto, proto.particles[0], 3);
    const Batch batch = class_batch(45, 10, 2, 2);
    const RepulsionBatch rep{random_matrix(46, 6, 2)};

    TrainConfig param;
    param.method = Method::ParamRepulsion;
    param.repulsion_weight = 1.0;
    param.dataset_size = 10;
    TrainConfig func = param;
    func.method = Method::FunctionRepulsion;

    ParticleSet a = ps;
    ParticleSet b = ps;
    for (int t = 0; t < 10; ++t) {
        povi_step_param(a, batch, param, 1e-3);
        povi_step_function(b, batch, rep, func, 1e-3);
    }
    for (std::size_t i = 1; i < 3; ++i) {
        CHECK(a.particles[i] == a.particles[0]);
        CHECK(b.particles[i] == b.particles[0]);
    }
    for (double v : a.particles[0]) CHECK(std::isfinite(v));
    for (double v : b.particles[0]) CHECK(std::isfinite(v));
}

TEST_CASE("steps are equivariant under particle permutation") {
    const std::size_t n = 5;
    const MlpSpec spec{{2, 5, 3}, Activation::Tanh};
    const ParticleSet ps = init_full_ensemble(spec, n, 58);
    const Batch batch = class_batch(59, 9, 2, 3);
    const RepulsionBatch rep{random_matrix(60, 6, 2)};
    const std::vector<std::size_t> perm{3, 0, 4, 1, 2};

    ParticleSet shuffled = ps;
    for (std::size_t i = 0; i < n; ++i) shuffled.particles[i] = ps.particles[perm[i]];

    TrainConfig param;
    param.method = Method::ParamRepulsion;
    param.repulsion_weight = 1.5;
    param.dataset_size = 9;
    TrainConfig func = param;
    func.method = Method::FunctionRepulsion;

    SUBCASE("parameter space") {
        ParticleSet a = ps;
        ParticleSet b = shuffled;
        povi_step_param(a, batch, param, 1e-3);
        povi_step_param(b, batch, param, 1e-3);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t q = 0; q < a.particles[0].size(); ++q)
                CHECK(b.particles[i][q] ==
                      doctest::Approx(a.particles[perm[i]][q]).epsilon(1e-9));
    }
    SUBCASE("function space") {
        ParticleSet a = ps;
        ParticleSet b = shuffled;
        povi_step_function(a, batch, rep, func, 1e-3);
        povi_step_function(b, batch, rep, func, 1e-3);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t q = 0; q < a.particles[0].size(); ++q)
                CHECK(b.particles[i][q] ==
                      doctest::Approx(a.particles[perm[i]][q]).epsilon(1e-9));
    }
}

TEST_CASE("an unfrozen base moves by the mean attraction gradient") {
    const MlpSpec base{{2, 6, 4}, Activation::Tanh};
    const MlpSpec head{{4, 2}, Activation::Tanh};
    ParticleSet ps = init_multi_head(base, head, 3, 71);
    ps.base_frozen = false;
    const Batch batch = class_batch(72, 8, 2, 2);
    TrainConfig cfg;
    cfg.method = Method::ParamRepulsion;
    cfg.repulsion_weight = 1.0;
    cfg.dataset_size = 8;

    ParamVector base_grad;
    attraction_gradient(ps, 0, batch, cfg, &base_grad);
    const ParamVector before = ps.base_params;
    const double eps = 1e-3;
    povi_step_param(ps, batch, cfg, eps);
    for (std::size_t k = 0; k < before.size(); ++k)
        CHECK(ps.base_params[k] == doctest::Approx(before[k] + eps * base_grad[k]).epsilon(1e-12));

    ParticleSet frozen = init_multi_head(base, head, 3, 71);
    const ParamVector frozen_before = frozen.base_params;
    povi_step_param(frozen, batch, cfg, eps);
    CHECK(frozen.base_params == frozen_before);
}

TEST_CASE("train with zero steps returns the input set and an empty log") {
    const Dataset data = class_dataset(81, 20, 2, 2);
    ParticleSet ps = init_full_ensemble(MlpSpec{{2, 4, 2}, Activation::Tanh}, 3, 82);
    TrainConfig cfg;
    cfg.steps = 0;
    cfg.train_batch_size = 10;
    auto [out, log] = train(ps, data, nullptr, cfg);
    CHECK(log.entries.empty());
    CHECK(out.step_counter == 0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(out.particles[i] == ps.particles[i]);
}

TEST_CASE("decay multipliers apply from their step onward") {
    Dataset data;
    data.inputs = Matrix(1, 2);
    data.inputs(0, 0) = 0.3;
    data.inputs(0, 1) = -0.6;
    data.targets = {1.0};
    data.target_kind = TargetKind::ClassLabel;

    TrainConfig cfg;
    cfg.method = Method::PlainEnsemble;
    cfg.step_size = 1e-2;
    cfg.steps = 6;
    cfg.train_batch_size = 1;
    cfg.decay = {{4, 0.1}, {2, 0.5}};
    cfg.seed = 5;

    ParticleSet ps = init_full_ensemble(MlpSpec{{2, 3, 2}, Activation::Tanh}, 2, 91);
    auto [got, log] = train(ps, data, nullptr, cfg);

    Batch batch;
    batch.inputs = data.inputs;
    batch.targets = data.targets;
    TrainConfig manual = cfg;
    manual.dataset_size = 1;
    ParticleSet want = ps;
    for (std::uint64_t t = 0; t < 6; ++t) {
        const double mult = t < 2 ? 1.0 : (t < 4 ? 0.5 : 0.1);
        povi_step_param(want, batch, manual, cfg.step_size * mult);
    }
    for (std::size_t i = 0; i < 2; ++i) CHECK(got.particles[i] == want.particles[i]);
    CHECK(got.step_counter == 6);
    REQUIRE(log.entries.size() == 6);
    CHECK(log.entries.front().step == 1);
    CHECK(log.entries.back().step == 6);
}

TEST_CASE("identical seeds replay identical training runs") {
    const Dataset data = class_dataset(101, 30, 2, 3);
    const MlpSpec spec{{2, 5, 3}, Activation::Tanh};
    TrainConfig cfg;
    cfg.method = Method::FunctionRepulsion;
    cfg.repulsion_weight = 1.0;
    cfg.steps = 8;
    cfg.train_batch_size = 10;
    cfg.repulsion_batch_size = 6;
    cfg.seed = 7;
    const RepulsionSource src = RepulsionSource::uniform_noise(-1.0, 1.0, 2);

    auto [a, la] = train(init_full_ensemble(spec, 3, 102), data, &src, cfg);
    auto [b, lb] = train(init_full_ensemble(spec, 3, 102), data, &src, cfg);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a.particles[i] == b.particles[i]);
    REQUIRE(la.entries.size() == lb.entries.size());
    for (std::size_t e = 0; e < la.entries.size(); ++e) {
        CHECK(la.entries[e].train_nll == lb.entries[e].train_nll);
        CHECK(la.entries[e].mean_function_distance == lb.entries[e].mean_function_distance);
    }
}

TEST_CASE("train batches do not depend on the repulsion settings") {
    const Dataset data = class_dataset(111, 24, 2, 2);
    const MlpSpec spec{{2, 4, 2}, Activation::Tanh};
    TrainConfig plain;
    plain.method = Method::PlainEnsemble;
    plain.steps = 5;
    plain.train_batch_size = 8;
    plain.seed = 3;

    TrainConfig func = plain;
    func.method = Method::FunctionRepulsion;
    func.repulsion_weight = 1.0;
    func.repulsion_batch_size = 4;
    const RepulsionSource src = RepulsionSource::uniform_noise(0.0, 1.0, 2);

    auto [a, la] = train(init_full_ensemble(spec, 1, 112), data, nullptr, plain);
    auto [b, lb] = train(init_full_ensemble(spec, 1, 112), data, &src, func);
    CHECK(a.particles[0] == b.particles[0]);
}

TEST_CASE("training log reports distances and bandwidths per mode") {
    const Dataset data = class_dataset(121, 20, 2, 2);
    const MlpSpec spec{{2, 4, 2}, Activation::Tanh};

    SUBCASE("parameter mode fills parameter distance and bandwidth") {
        TrainConfig cfg;
        cfg.method = Method::ParamRepulsion;
        cfg.repulsion_weight = 1.0;
        cfg.steps = 4;
        cfg.train_batch_size = 10;
        auto [out, log] = train(init_full_ensemble(spec, 3, 122), data, nullptr, cfg);
        REQUIRE(log.entries.size() == 4);
        for (const TrainLogEntry& e : log.entries) {
            CHECK(e.mean_param_distance > 0.0);
            CHECK(e.mean_function_distance == 0.0);
            CHECK(e.bandwidth > 0.0);
            CHECK(std::isfinite(e.train_nll));
        }
    }
    SUBCASE("function mode fills function distance") {
        TrainConfig cfg;
        cfg.method = Method::FunctionRepulsion;
        cfg.repulsion_weight = 1.0;
        cfg.steps = 4;
        cfg.train_batch_size = 10;
        cfg.repulsion_batch_size = 5;
        const RepulsionSource src = RepulsionSource::uniform_noise(-1.0, 1.0, 2);
        auto [out, log] = train(init_full_ensemble(spec, 3, 123), data, &src, cfg);
        REQUIRE(log.entries.size() == 4);
        for (const TrainLogEntry& e : log.entries) {
            CHECK(e.mean_function_distance > 0.0);
            CHECK(e.mean_param_distance > 0.0);
            CHECK(e.bandwidth > 0.0);
        }
    }
    SUBCASE("log_every thins entries but keeps the last step") {
        TrainConfig cfg;
        cfg.steps = 5;
        cfg.train_batch_size = 10;
        cfg.log_every = 2;
        auto [out, log] = train(init_full_ensemble(spec, 2, 124), data, nullptr, cfg);
        REQUIRE(log.entries.size() == 3);
        CHECK(log.entries[0].step == 2);
        CHECK(log.entries[1].step == 4);
        CHECK(log.entries[2].step == 5);
    }
}

TEST_CASE("spectral normalization bounds every trainable layer") {
    const Dataset data = class_dataset(131, 24, 3, 2);
    const MlpSpec spec{{3, 8, 2}, Activation::Tanh};
    TrainConfig cfg;
    cfg.steps = 60;
    cfg.train_batch_size = 12;
    cfg.step_size = 1e-3;
    cfg.spectral_norm = true;
    cfg.spectral_coeff = 0.5;
    auto [out, log] = train(init_full_ensemble(spec, 2, 132), data, nullptr, cfg);

    const auto views = layer_views(spec);
    for (std::size_t i = 0; i < out.n(); ++i)
        for (const LayerView& v : views) {
            Matrix w(v.d_out, v.d_in);
            std::copy(out.particles[i].begin() + static_cast<std::ptrdiff_t>(v.weight_offset),
                      out.particles[i].begin() +
                          static_cast<std::ptrdiff_t>(v.weight_offset + v.d_out * v.d_in),
                      w.data.begin());
            CHECK(oracles::spectral_norm_reference(w) <= cfg.spectral_coeff * 1.02);
        }

    TrainConfig off = cfg;
    off.spectral_norm = false;
    auto [raw, log2] = train(init_full_ensemble(spec, 2, 132), data, nullptr, off);
    CHECK(raw.particles[0] != out.particles[0]);
}

TEST_CASE("divergence raises a numeric error") {
    const Dataset data = class_dataset(141, 16, 2, 2);
    Dataset reg = data;
    reg.target_kind = TargetKind::Regression;
    for (double& t : reg.targets) t += 0.25;
    const MlpSpec spec{{2, 6, 1}, Activation::Tanh};
    TrainConfig cfg;
    cfg.likelihood = Likelihood::gaussian(0.1);
    cfg.step_size = 1e3;
    cfg.steps = 50;
    cfg.train_batch_size = 8;
    CHECK_THROWS_AS(train(init_full_ensemble(spec, 2, 142), reg, nullptr, cfg), NumericError);
}

TEST_CASE("train validates its inputs") {
    const Dataset data = class_dataset(151, 10, 2, 2);
    const MlpSpec spec{{2, 3, 2}, Activation::Tanh};
    ParticleSet ps = init_full_ensemble(spec, 2, 152);
    TrainConfig cfg;
    cfg.steps = 1;

    SUBCASE("empty dataset") {
        Dataset empty;
        empty.inputs = Matrix(0, 2);
        cfg.train_batch_size = 1;
        CHECK_THROWS_AS(train(ps, empty, nullptr, cfg), std::invalid_argument);
    }
    SUBCASE("zero batch") {
        cfg.train_batch_size = 0;
        CHECK_THROWS_AS(train(ps, data, nullptr, cfg), std::invalid_argument);
    }
    SUBCASE("batch larger than the dataset") {
        cfg.train_batch_size = 11;
        CHECK_THROWS_AS(train(ps, data, nullptr, cfg), std::invalid_argument);
    }
    SUBCASE("function repulsion without a source") {
        cfg.train_batch_size = 5;
        cfg.method = Method::FunctionRepulsion;
        cfg.repulsion_weight = 1.0;
        CHECK_THROWS_AS(train(ps, data, nullptr, cfg), std::invalid_argument);
        ParticleSet solo = init_full_ensemble(spec, 1, 153);
        CHECK_NOTHROW(train(solo, data, nullptr, cfg));
    }
}

TEST_CASE("repulsion spreads an ensemble wider than plain training") {
    const Dataset data = class_dataset(161, 40, 2, 2);
    const MlpSpec spec{{2, 6, 2}, Activation::Tanh};
    TrainConfig plain;
    plain.method = Method::PlainEnsemble;
    plain.steps = 40;
    plain.train_batch_size = 20;
    plain.step_size = 5e-3;
    plain.seed = 9;

    TrainConfig rep = plain;
    rep.method = Method::ParamRepulsion;
    rep.repulsion_weight = 5.0;

    const ParticleSet start = init_full_ensemble(spec, 4, 162);
    auto [a, la] = train(start, data, nullptr, plain);
    auto [b, lb] = train(start, data, nullptr, rep);
    REQUIRE(!la.entries.empty());
    REQUIRE(!lb.entries.empty());
    CHECK(lb.entries.back().mean_param_distance > la.entries.back().mean_param_distance);
}
