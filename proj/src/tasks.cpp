#include "repulse/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "repulse/uncertainty.hpp"
#include "repulse/util.hpp"

namespace repulse {

Dataset gen_regression_toy(std::uint64_t seed, std::size_t n_per_cluster) {
    if (n_per_cluster == 0) throw std::invalid_argument("cluster size must be positive");
    Rng rng(seed);
    Dataset ds;
    ds.name = "regression-toy";
    ds.target_kind = TargetKind::Regression;
    ds.inputs = Matrix(2 * n_per_cluster, 1);
    ds.targets.resize(2 * n_per_cluster);
    for (std::size_t c = 0; c < 2; ++c) {
        const double lo = c == 0 ? -2.0 : 1.0;
        const double hi = c == 0 ? -1.0 : 2.0;
        for (std::size_t i = 0; i < n_per_cluster; ++i) {
            const std::size_t row = c * n_per_cluster + i;
            const double x = rng.uniform(lo, hi);
            ds.inputs(row, 0) = x;
            ds.targets[row] = std::sin(2.0 * x) + 0.1 * x * x * x + 0.1 * rng.normal();
        }
    }
    return ds;
}

Dataset gen_two_moons(std::uint64_t seed, std::size_t n, double noise_std) {
    if (n < 2) throw std::invalid_argument("two moons needs at least 2 samples");
    Rng rng(seed);
    Dataset ds;
    ds.name = "two-moons";
    ds.target_kind = TargetKind::ClassLabel;
    ds.inputs = Matrix(n, 2);
    ds.targets.resize(n);
    const std::size_t n0 = n - n / 2;
    const double pi = 3.14159265358979323846;
    for (std::size_t i = 0; i < n; ++i) {
        const bool upper = i < n0;
        const double t = rng.uniform(0.0, pi);
        double x = upper ? std::cos(t) : 1.0 - std::cos(t);
        double y = upper ? std::sin(t) : 0.5 - std::sin(t);
        x += noise_std * rng.normal();
        y += noise_std * rng.normal();
        ds.inputs(i, 0) = x;
        ds.inputs(i, 1) = y;
        ds.targets[i] = upper ? 0.0 : 1.0;
    }
    return ds;
}

Dataset gen_blobs(std::uint64_t seed, std::size_t n, std::size_t k, double radius,
                  double spread) {
    if (n == 0 || k == 0) throw std::invalid_argument("blobs need n >= 1 and k >= 1");
    Rng rng(seed);
    Dataset ds;
    ds.name = "blobs";
    ds.target_kind = TargetKind::ClassLabel;
    ds.inputs = Matrix(n, 2);
    ds.targets.resize(n);
    const double pi = 3.14159265358979323846;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t cls = i % k;
        const double ang = 2.0 * pi * static_cast<double>(cls) / static_cast<double>(k);
        ds.inputs(i, 0) = radius * std::cos(ang) + spread * rng.normal();
        ds.inputs(i, 1) = radius * std::sin(ang) + spread * rng.normal();
        ds.targets[i] = static_cast<double>(cls);
    }
    return ds;
}

Dataset gen_ambiguous_mix(const Dataset& base, double ambiguous_fraction, Rng& rng) {
    if (base.target_kind != TargetKind::ClassLabel)
        throw std::invalid_argument("ambiguous mix needs a classification base");
    if (base.num_classes() < 2)
        throw std::invalid_argument("ambiguous mix needs at least 2 classes");
    if (ambiguous_fraction < 0.0) throw std::invalid_argument("negative ambiguous fraction");
    const std::size_t count =
        static_cast<std::size_t>(std::llround(ambiguous_fraction * base.size()));
    if (count == 0) return base;

    const std::size_t n = base.size();
    const std::size_t d = base.dim();
    Dataset ds;
    ds.name = base.name + "+ambiguous";
    ds.target_kind = TargetKind::ClassLabel;
    ds.inputs = Matrix(n + count, d);
    ds.targets.resize(n + count);
    ds.ambiguous.assign(n + count, 0);
    std::copy(base.inputs.data.begin(), base.inputs.data.end(), ds.inputs.data.begin());
    std::copy(base.targets.begin(), base.targets.end(), ds.targets.begin());

    for (std::size_t s = 0; s < count; ++s) {
        const std::size_t a = rng.index(n);
        std::size_t b = rng.index(n);
        while (base.targets[b] == base.targets[a]) b = rng.index(n);
        const double lambda = rng.uniform(0.4, 0.6);
        const std::size_t row = n + s;
        for (std::size_t j = 0; j < d; ++j)
            ds.inputs(row, j) =
                lambda * base.inputs(a, j) + (1.0 - lambda) * base.inputs(b, j);
        ds.targets[row] = rng.uniform() < 0.5 ? base.targets[a] : base.targets[b];
        ds.ambiguous[row] = 1;
    }
    return ds;
}

namespace {

// Ensemble predictive distribution: mean softmax over particles, N x K.
Matrix mean_probs(const ParticleSet& ps, const Matrix& inputs) {
    const std::vector<Matrix> preds = predict_all(ps, inputs);
    const std::size_t k = ps.output_dim();
    Matrix mean(inputs.rows, k, 0.0);
    for (const Matrix& out : preds) {
        for (std::size_t s = 0; s < inputs.rows; ++s) {
            const double* z = out.row(s);
            std::vector<double> p = softmax(std::vector<double>(z, z + k));
            for (std::size_t j = 0; j < k; ++j) mean(s, j) += p[j];
        }
    }
    for (double& v : mean.data) v /= static_cast<double>(preds.size());
    return mean;
}

struct ScoreLists {
    std::vector<double> epistemic, total, aleatoric;
};

ScoreLists uncertainty_scores(const ParticleSet& ps, const Matrix& inputs) {
    const std::vector<UncertaintyTriple> triples = decompose_batch(ps, inputs);
    ScoreLists s;
    s.epistemic.reserve(triples.size());
    s.total.reserve(triples.size());
    s.aleatoric.reserve(triples.size());
    for (const UncertaintyTriple& t : triples) {
        s.epistemic.push_back(t.epistemic);
        s.total.push_back(t.total);
        s.aleatoric.push_back(t.aleatoric);
    }
    return s;
}

}  // namespace

OodReport ood_eval(const ParticleSet& ps, const Dataset& id_test,
                   const std::vector<Dataset>& ood_sets) {
    OodReport report;
    report.id_report = evaluate(mean_probs(ps, id_test.inputs), class_labels(id_test));
    const ScoreLists id_scores = uncertainty_scores(ps, id_test.inputs);
    for (const Dataset& ood : ood_sets) {
        const ScoreLists ood_scores = uncertainty_scores(ps, ood.inputs);
        OodReport::Entry e;
        e.ood_name = ood.name;
        e.epistemic = auroc(id_scores.epistemic, ood_scores.epistemic);
        e.total = auroc(id_scores.total, ood_scores.total);
        e.aleatoric = auroc(id_scores.aleatoric, ood_scores.aleatoric);
        report.aurocs.push_back(std::move(e));
    }
    return report;
}

std::vector<double> active_learning_run(const Dataset& pool, const Dataset& test,
                                        const ParticleSet& proto, const AcquisitionConfig& cfg) {
    if (cfg.initial_labeled == 0 || cfg.acquire_per_round == 0 || cfg.rounds == 0)
        throw std::invalid_argument("acquisition counts must be positive");
    if (cfg.initial_labeled + (cfg.rounds - 1) * cfg.acquire_per_round > pool.size())
        throw std::invalid_argument("pool too small for the acquisition schedule");

    Rng acq_rng(derive_seed(cfg.seed, 3));
    std::vector<std::size_t> labeled =
        acq_rng.sample_without_replacement(pool.size(), cfg.initial_labeled);
    std::vector<bool> taken(pool.size(), false);
    for (std::size_t idx : labeled) taken[idx] = true;

    const std::vector<int> test_labels = class_labels(test);
    std::vector<double> curve;
    curve.reserve(cfg.rounds);

    for (std::size_t round = 0; round < cfg.rounds; ++round) {
        Dataset labeled_ds;
        labeled_ds.name = "al-labeled";
        labeled_ds.target_kind = pool.target_kind;
        labeled_ds.inputs = Matrix(labeled.size(), pool.dim());
        labeled_ds.targets.resize(labeled.size());
        for (std::size_t s = 0; s < labeled.size(); ++s) {
            for (std::size_t j = 0; j < pool.dim(); ++j)
                labeled_ds.inputs(s, j) = pool.inputs(labeled[s], j);
            labeled_ds.targets[s] = pool.targets[labeled[s]];
        }

        const std::uint64_t round_seed = derive_seed(cfg.seed, 100 + round);
        ParticleSet ps;
        if (proto.mode == ParticleMode::MultiHead) {
            ps = init_multi_head(proto.base_spec, proto.head_spec, proto.n(), round_seed);
            ps.base_params = proto.base_params;
            ps.base_frozen = proto.base_frozen;
        } else {
            ps = init_full_ensemble(proto.base_spec, proto.n(), round_seed);
        }

        TrainConfig tc = cfg.retrain;
        tc.seed = derive_seed(cfg.seed, 200 + round);
        tc.train_batch_size = std::min(tc.train_batch_size, labeled_ds.size());
        RepulsionSource rep = RepulsionSource::train_inputs(labeled_ds.inputs);
        auto [trained, log] = train(std::move(ps), labeled_ds, &rep, tc);

        curve.push_back(accuracy(mean_probs(trained, test.inputs), test_labels));

        if (round + 1 == cfg.rounds) break;

        std::vector<std::size_t> remaining;
        for (std::size_t idx = 0; idx < pool.size(); ++idx)
            if (!taken[idx]) remaining.push_back(idx);

        std::vector<std::size_t> picked;
        if (cfg.score == AcquisitionScore::Random) {
            const std::vector<std::size_t> draw =
                acq_rng.sample_without_replacement(remaining.size(), cfg.acquire_per_round);
            for (std::size_t d : draw) picked.push_back(remaining[d]);
        } else {
            Matrix rem_inputs(remaining.size(), pool.dim());
            for (std::size_t s = 0; s < remaining.size(); ++s)
                for (std::size_t j = 0; j < pool.dim(); ++j)
                    rem_inputs(s, j) = pool.inputs(remaining[s], j);
            const ScoreLists scores = uncertainty_scores(trained, rem_inputs);
            const std::vector<double>& key = cfg.score == AcquisitionScore::Epistemic
                                                 ? scores.epistemic
                                                 : cfg.score == AcquisitionScore::Total
                                                       ? scores.total
                                                       : scores.aleatoric;
            std::vector<std::size_t> idx(remaining.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
                if (key[a] != key[b]) return key[a] > key[b];
                return remaining[a] < remaining[b];
            });
            for (std::size_t s = 0; s < cfg.acquire_per_round; ++s)
                picked.push_back(remaining[idx[s]]);
        }
        for (std::size_t idx : picked) {
            taken[idx] = true;
            labeled.push_back(idx);
        }
    }
    return curve;
}

}  // namespace repulse
