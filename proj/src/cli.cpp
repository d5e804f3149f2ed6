#include "repulse/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "repulse/dataset.hpp"
#include "repulse/kernels.hpp"
#include "repulse/metrics.hpp"
#include "repulse/nn.hpp"
#include "repulse/particles.hpp"
#include "repulse/povi.hpp"
#include "repulse/repulsion.hpp"
#include "repulse/rng.hpp"
#include "repulse/svg.hpp"
#include "repulse/tasks.hpp"
#include "repulse/uncertainty.hpp"
#include "repulse/util.hpp"

namespace repulse {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

[[noreturn]] void bad(const std::string& msg) { throw ConfigError(msg); }

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::string checkpoint;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool percent = false;
};

// --- JSON access with strict key checking ---------------------------------

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object()) bad(where + " must be an object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known) bad("unknown key " + where + "." + item.key());
    }
}

const json* find(const json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

double get_num(const json& j, const std::string& where, const char* key, double def) {
    const json* v = find(j, key);
    if (!v) return def;
    if (!v->is_number()) bad(where + "." + key + " must be a number");
    return v->get<double>();
}

std::uint64_t get_u64(const json& j, const std::string& where, const char* key,
                      std::uint64_t def) {
    const json* v = find(j, key);
    if (!v) return def;
    if (!(v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0)))
        bad(where + "." + key + " must be a non-negative integer");
    return v->get<std::uint64_t>();
}

std::size_t get_size(const json& j, const std::string& where, const char* key,
                     std::size_t def) {
    return static_cast<std::size_t>(get_u64(j, where, key, def));
}

bool get_bool(const json& j, const std::string& where, const char* key, bool def) {
    const json* v = find(j, key);
    if (!v) return def;
    if (!v->is_boolean()) bad(where + "." + key + " must be true or false");
    return v->get<bool>();
}

std::string get_str(const json& j, const std::string& where, const char* key,
                    const std::string& def) {
    const json* v = find(j, key);
    if (!v) return def;
    if (!v->is_string()) bad(where + "." + key + " must be a string");
    return v->get<std::string>();
}

std::string require_str(const json& j, const std::string& where, const char* key) {
    if (!find(j, key)) bad(where + "." + key + " is required");
    return get_str(j, where, key, "");
}

// --- Config section parsers ------------------------------------------------

Activation parse_activation(const std::string& s, const std::string& where) {
    if (s == "relu") return Activation::ReLU;
    if (s == "tanh") return Activation::Tanh;
    bad(where + " must be \"relu\" or \"tanh\"");
}

std::vector<std::size_t> parse_widths(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() < 2)
        bad(where + " must be an array of at least two layer widths");
    std::vector<std::size_t> widths;
    for (const auto& e : v) {
        if (!(e.is_number_unsigned() || (e.is_number_integer() && e.get<std::int64_t>() > 0)))
            bad(where + " entries must be positive integers");
        const auto w = e.get<std::uint64_t>();
        if (w == 0) bad(where + " entries must be positive integers");
        widths.push_back(static_cast<std::size_t>(w));
    }
    return widths;
}

struct ModelCfg {
    ParticleMode mode = ParticleMode::FullEnsemble;
    MlpSpec base;
    MlpSpec head;
    std::size_t n = 1;
    std::string base_checkpoint;
    bool base_frozen = true;
};

ModelCfg parse_model(const json& j) {
    check_keys(j, "model",
               {"mode", "layers", "activation", "head_layers", "head_activation", "particles",
                "base_checkpoint", "base_frozen"});
    ModelCfg m;
    const std::string mode = get_str(j, "model", "mode", "full");
    if (mode == "full")
        m.mode = ParticleMode::FullEnsemble;
    else if (mode == "multi_head")
        m.mode = ParticleMode::MultiHead;
    else
        bad("model.mode must be \"full\" or \"multi_head\"");

    const json* layers = find(j, "layers");
    if (!layers) bad("model.layers is required");
    m.base.layer_widths = parse_widths(*layers, "model.layers");
    m.base.activation = parse_activation(get_str(j, "model", "activation", "relu"),
                                         "model.activation");
    m.n = get_size(j, "model", "particles", 1);
    if (m.n == 0) bad("model.particles must be at least 1");
    m.base_checkpoint = get_str(j, "model", "base_checkpoint", "");
    m.base_frozen = get_bool(j, "model", "base_frozen", true);

    if (m.mode == ParticleMode::MultiHead) {
        const json* head = find(j, "head_layers");
        if (!head) bad("model.head_layers is required in multi_head mode");
        m.head.layer_widths = parse_widths(*head, "model.head_layers");
        m.head.activation = parse_activation(
            get_str(j, "model", "head_activation",
                    m.base.activation == Activation::ReLU ? "relu" : "tanh"),
            "model.head_activation");
    } else {
        if (find(j, "head_layers")) bad("model.head_layers requires multi_head mode");
        if (find(j, "base_checkpoint")) bad("model.base_checkpoint requires multi_head mode");
    }
    return m;
}

/// The donor checkpoint must hold one full network whose layer widths extend
/// the model's base widths; the shared prefix of its parameters becomes the
/// base. This lets a pretrained network with its task head still in place
/// serve as a frozen feature extractor.
void adopt_base(ParticleSet& ps, const ModelCfg& m) {
    ParticleSet donor = load_checkpoint(m.base_checkpoint);
    if (donor.mode != ParticleMode::FullEnsemble || donor.n() != 1)
        bad("base checkpoint must hold a single full network");
    const auto& want = m.base.layer_widths;
    const auto& have = donor.base_spec.layer_widths;
    if (have.size() < want.size() || !std::equal(want.begin(), want.end(), have.begin()) ||
        donor.base_spec.activation != m.base.activation)
        bad("base checkpoint architecture does not extend model.layers");
    const std::size_t p = parameter_count(m.base);
    ps.base_params.assign(donor.particles[0].begin(),
                          donor.particles[0].begin() + static_cast<std::ptrdiff_t>(p));
}

ParticleSet build_particle_set(const ModelCfg& m, std::uint64_t seed) {
    if (m.mode == ParticleMode::FullEnsemble) return init_full_ensemble(m.base, m.n, seed);
    ParticleSet ps = init_multi_head(m.base, m.head, m.n, seed);
    ps.base_frozen = m.base_frozen;
    if (!m.base_checkpoint.empty()) adopt_base(ps, m);
    return ps;
}

KernelConfig parse_kernel(const json& j) {
    check_keys(j, "kernel", {"distance", "bandwidth", "representation"});
    KernelConfig k;
    const std::string d = get_str(j, "kernel", "distance", "sql2");
    if (d == "l1")
        k.distance = Distance::L1;
    else if (d == "l2")
        k.distance = Distance::L2;
    else if (d == "sql2")
        k.distance = Distance::SqL2;
    else
        bad("kernel.distance must be \"l1\", \"l2\" or \"sql2\"");

    if (const json* b = find(j, "bandwidth")) {
        if (b->is_string()) {
            if (b->get<std::string>() != "median")
                bad("kernel.bandwidth must be \"median\" or a positive number");
            k.bandwidth = Bandwidth::median();
        } else if (b->is_number()) {
            const double v = b->get<double>();
            if (!(v > 0.0)) bad("kernel.bandwidth must be positive");
            k.bandwidth = Bandwidth::fixed(v);
        } else {
            bad("kernel.bandwidth must be \"median\" or a positive number");
        }
    }

    const std::string r = get_str(j, "kernel", "representation", "logits");
    if (r == "logits")
        k.representation = FunctionRepr::Logits;
    else if (r == "probabilities")
        k.representation = FunctionRepr::Probabilities;
    else
        bad("kernel.representation must be \"logits\" or \"probabilities\"");
    return k;
}

TrainConfig parse_train(const json& j, const json* kernel, Likelihood default_lik) {
    check_keys(j, "train",
               {"step_size", "steps", "train_batch_size", "repulsion_batch_size",
                "repulsion_weight", "prior_variance", "method", "likelihood", "noise_std",
                "decay", "spectral_norm", "spectral_coeff", "log_every"});
    TrainConfig cfg;
    cfg.step_size = get_num(j, "train", "step_size", 1e-3);
    cfg.steps = get_u64(j, "train", "steps", 0);
    cfg.train_batch_size = get_size(j, "train", "train_batch_size", 128);
    cfg.repulsion_batch_size = get_size(j, "train", "repulsion_batch_size", 128);
    cfg.repulsion_weight = get_num(j, "train", "repulsion_weight", 1.0);
    cfg.prior_variance = get_num(j, "train", "prior_variance", 100.0);
    cfg.spectral_norm = get_bool(j, "train", "spectral_norm", false);
    cfg.spectral_coeff = get_num(j, "train", "spectral_coeff", 3.0);
    cfg.log_every = get_u64(j, "train", "log_every", 1);

    const std::string method = get_str(j, "train", "method", "plain");
    if (method == "plain")
        cfg.method = Method::PlainEnsemble;
    else if (method == "param")
        cfg.method = Method::ParamRepulsion;
    else if (method == "function")
        cfg.method = Method::FunctionRepulsion;
    else
        bad("train.method must be \"plain\", \"param\" or \"function\"");

    cfg.likelihood = default_lik;
    if (const json* l = find(j, "likelihood")) {
        if (!l->is_string()) bad("train.likelihood must be a string");
        const std::string s = l->get<std::string>();
        if (s == "categorical")
            cfg.likelihood = Likelihood::categorical();
        else if (s == "gaussian")
            cfg.likelihood = Likelihood::gaussian(0.1);
        else
            bad("train.likelihood must be \"categorical\" or \"gaussian\"");
    }
    if (find(j, "noise_std")) {
        if (cfg.likelihood.kind != LikelihoodKind::GaussianFixedNoise)
            bad("train.noise_std requires the gaussian likelihood");
        const double s = get_num(j, "train", "noise_std", 0.1);
        if (!(s > 0.0)) bad("train.noise_std must be positive");
        cfg.likelihood.noise_std = s;
    }

    if (const json* d = find(j, "decay")) {
        if (!d->is_array()) bad("train.decay must be an array");
        for (std::size_t i = 0; i < d->size(); ++i) {
            const json& e = (*d)[i];
            const std::string where = "train.decay[" + std::to_string(i) + "]";
            check_keys(e, where, {"step", "multiplier"});
            DecayPoint p;
            p.step = get_u64(e, where, "step", 0);
            p.multiplier = get_num(e, where, "multiplier", 1.0);
            if (!(p.multiplier > 0.0)) bad(where + ".multiplier must be positive");
            cfg.decay.push_back(p);
        }
    }

    cfg.kernel = kernel ? parse_kernel(*kernel) : KernelConfig{};
    return cfg;
}

RepulsionSource parse_repulsion(const json& j, const Matrix& train_inputs) {
    check_keys(j, "repulsion",
               {"kind", "pool", "patch_side", "image_height", "image_width", "image_channels",
                "low", "high", "dim", "box"});
    const std::string kind = get_str(j, "repulsion", "kind", "train_inputs");
    if (kind == "train_inputs") return RepulsionSource::train_inputs(train_inputs);
    if (kind == "patch_shuffle") {
        ImageShape shape;
        shape.h = get_size(j, "repulsion", "image_height", 0);
        shape.w = get_size(j, "repulsion", "image_width", 0);
        shape.c = get_size(j, "repulsion", "image_channels", 1);
        const std::size_t side = get_size(j, "repulsion", "patch_side", 0);
        return RepulsionSource::patch_shuffled(train_inputs, side, shape);
    }
    if (kind == "ood_pool") {
        const std::string path = require_str(j, "repulsion", "pool");
        return RepulsionSource::ood_pool(load_dataset(path).inputs);
    }
    if (kind == "uniform_noise") {
        const double lo = get_num(j, "repulsion", "low", 0.0);
        const double hi = get_num(j, "repulsion", "high", 1.0);
        const std::size_t dim = get_size(j, "repulsion", "dim", train_inputs.cols);
        return RepulsionSource::uniform_noise(lo, hi, dim);
    }
    if (kind == "uniform_domain") {
        std::vector<std::pair<double, double>> box;
        if (const json* b = find(j, "box")) {
            if (!b->is_array() || b->empty()) bad("repulsion.box must be a non-empty array");
            for (const auto& e : *b) {
                if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                    bad("repulsion.box entries must be [low, high] pairs");
                box.emplace_back(e[0].get<double>(), e[1].get<double>());
            }
        } else {
            if (!find(j, "low") || !find(j, "high"))
                bad("repulsion.uniform_domain needs box or low/high");
            const double lo = get_num(j, "repulsion", "low", 0.0);
            const double hi = get_num(j, "repulsion", "high", 1.0);
            box.assign(train_inputs.cols, {lo, hi});
        }
        return RepulsionSource::uniform_domain(std::move(box));
    }
    bad("repulsion.kind must be one of train_inputs, patch_shuffle, ood_pool, uniform_noise, "
        "uniform_domain");
}

// --- Shared plumbing --------------------------------------------------------

json load_config_file(const CommonOpts& opts) {
    std::ifstream in(opts.config_path, std::ios::binary);
    if (!in) bad("cannot open config file " + opts.config_path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        bad(opts.config_path + ": " + e.what());
    }
    if (!j.is_object()) bad("config root must be an object");
    return j;
}

std::uint64_t resolve_seed(const json& j, const CommonOpts& opts) {
    if (opts.seed_set) return opts.seed;
    return get_u64(j, "config", "seed", 0);
}

std::string resolve_out(const json& j, const CommonOpts& opts, bool required) {
    std::string dir = opts.out_dir;
    if (dir.empty()) dir = get_str(j, "config", "out", "");
    if (dir.empty()) {
        if (required) bad("an output directory is required (--out or \"out\" in the config)");
        return dir;
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) bad("cannot create output directory " + dir + ": " + ec.message());
    return dir;
}

std::string join(const std::string& dir, const char* name) {
    return (fs::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) bad("cannot open " + path + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) bad("short write to " + path);
}

void write_trainlog(const TrainLog& log, const std::string& dir) {
    CsvWriter csv({"step", "train_nll", "mean_function_distance", "mean_param_distance",
                   "bandwidth"});
    for (const auto& e : log.entries)
        csv.add_row({static_cast<double>(e.step), e.train_nll, e.mean_function_distance,
                     e.mean_param_distance, e.bandwidth});
    csv.write(join(dir, "trainlog.csv"));
}

void write_metrics(const EvalReport& r, const std::string& path) {
    CsvWriter csv({"accuracy", "nll", "ece", "brier", "count"});
    csv.add_row({r.accuracy, r.nll, r.ece, r.brier, static_cast<double>(r.count)});
    csv.write(path);
}

Matrix ensemble_mean_probs(const ParticleSet& ps, const Matrix& inputs) {
    const std::vector<Matrix> outs = predict_all(ps, inputs);
    const std::size_t k = ps.output_dim();
    Matrix probs(inputs.rows, k, 0.0);
    std::vector<double> logits(k);
    for (const Matrix& out : outs) {
        for (std::size_t b = 0; b < out.rows; ++b) {
            for (std::size_t c = 0; c < k; ++c) logits[c] = out(b, c);
            const std::vector<double> p = softmax(logits);
            for (std::size_t c = 0; c < k; ++c) probs(b, c) += p[c];
        }
    }
    const double inv = 1.0 / static_cast<double>(outs.size());
    for (double& v : probs.data) v *= inv;
    return probs;
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
    std::vector<double> xs(count);
    for (std::size_t i = 0; i < count; ++i)
        xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    return xs;
}

std::string metric_display(double v, bool percent) {
    char buf[64];
    if (percent)
        std::snprintf(buf, sizeof(buf), "%.4f%%", v * 100.0);
    else
        std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void print_report(const EvalReport& r, bool percent) {
    std::cout << "accuracy=" << metric_display(r.accuracy, false)
              << " nll=" << metric_display(r.nll, percent)
              << " ece=" << metric_display(r.ece, percent)
              << " brier=" << metric_display(r.brier, false) << " n=" << r.count << "\n";
}

/// Stage-one MAP fit of base-plus-task-head as one network (heavy-ball
/// momentum), after which the base prefix of the parameters replaces
/// ps.base_params.
void pretrain_base(ParticleSet& ps, const ModelCfg& model, const json& j, const Dataset& data,
                   const TrainConfig& outer, std::uint64_t seed) {
    check_keys(j, "pretrain", {"steps", "step_size", "momentum", "batch_size"});
    if (ps.mode != ParticleMode::MultiHead) bad("pretrain requires multi_head mode");
    if (!model.base_checkpoint.empty()) bad("pretrain and model.base_checkpoint are exclusive");
    const std::uint64_t steps = get_u64(j, "pretrain", "steps", 0);
    const double step_size = get_num(j, "pretrain", "step_size", outer.step_size);
    const double momentum = get_num(j, "pretrain", "momentum", 0.9);
    const std::size_t batch =
        std::min(get_size(j, "pretrain", "batch_size", outer.train_batch_size), data.size());
    if (batch == 0) bad("pretrain.batch_size must be positive");

    MlpSpec full = model.base;
    full.layer_widths.push_back(ps.head_spec.output_dim());
    ParticleSet net = init_full_ensemble(full, 1, derive_seed(seed, 0));

    TrainConfig map_cfg;
    map_cfg.likelihood = outer.likelihood;
    map_cfg.prior_variance = outer.prior_variance;
    map_cfg.train_batch_size = batch;
    map_cfg.dataset_size = data.size();

    Rng order_rng(derive_seed(seed, 1));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t pos = order.size();
    ParamVector velocity(net.particles[0].size(), 0.0);

    for (std::uint64_t t = 0; t < steps; ++t) {
        if (pos >= order.size()) {
            order_rng.shuffle(order);
            pos = 0;
        }
        const std::size_t b = std::min(batch, order.size() - pos);
        Batch bt;
        bt.inputs = Matrix(b, data.dim());
        bt.targets.resize(b);
        for (std::size_t r = 0; r < b; ++r) {
            const std::size_t src = order[pos + r];
            for (std::size_t c = 0; c < data.dim(); ++c)
                bt.inputs(r, c) = data.inputs(src, c);
            bt.targets[r] = data.targets[src];
        }
        pos += b;
        const ParamVector grad = attraction_gradient(net, 0, bt, map_cfg);
        for (std::size_t k = 0; k < velocity.size(); ++k) {
            velocity[k] = momentum * velocity[k] + grad[k];
            net.particles[0][k] += step_size * velocity[k];
        }
    }
    for (double v : net.particles[0])
        if (!std::isfinite(v)) throw NumericError("base pretraining produced non-finite parameters");

    const std::size_t p = parameter_count(model.base);
    ps.base_params.assign(net.particles[0].begin(),
                          net.particles[0].begin() + static_cast<std::ptrdiff_t>(p));
}

struct TrainedRun {
    ParticleSet particles;
    TrainLog log;
};

TrainedRun run_training(const json& j, const Dataset& data, std::uint64_t seed,
                        Likelihood default_lik) {
    const json* model_j = find(j, "model");
    if (!model_j) bad("config.model is required");
    const json* train_j = find(j, "train");
    if (!train_j) bad("config.train is required");
    const ModelCfg model = parse_model(*model_j);
    TrainConfig cfg = parse_train(*train_j, find(j, "kernel"), default_lik);
    cfg.seed = seed;

    ParticleSet ps = build_particle_set(model, derive_seed(seed, 20));
    if (const json* p = find(j, "pretrain"))
        pretrain_base(ps, model, *p, data, cfg, derive_seed(seed, 30));

    const json* rep_j = find(j, "repulsion");
    RepulsionSource rep = rep_j ? parse_repulsion(*rep_j, data.inputs)
                                : RepulsionSource::train_inputs(data.inputs);
    auto [trained, log] = train(std::move(ps), data, &rep, cfg);
    return {std::move(trained), std::move(log)};
}

// --- Subcommands ------------------------------------------------------------

int run_toy_regression(const json& j, const CommonOpts& opts) {
    check_keys(j, "config",
               {"seed", "out", "n_per_cluster", "grid", "model", "train", "kernel", "repulsion",
                "pretrain"});
    const std::uint64_t seed = resolve_seed(j, opts);
    const std::string out = resolve_out(j, opts, true);
    const std::size_t npc = get_size(j, "config", "n_per_cluster", 50);
    if (npc == 0) bad("config.n_per_cluster must be positive");

    double gmin = -6.0, gmax = 6.0;
    std::size_t gpoints = 200;
    if (const json* g = find(j, "grid")) {
        check_keys(*g, "grid", {"min", "max", "points"});
        gmin = get_num(*g, "grid", "min", gmin);
        gmax = get_num(*g, "grid", "max", gmax);
        gpoints = get_size(*g, "grid", "points", gpoints);
        if (!(gmax > gmin) || gpoints < 2) bad("config.grid must satisfy max > min, points >= 2");
    }

    const Dataset data = gen_regression_toy(derive_seed(seed, 10), npc);
    TrainedRun run = run_training(j, data, seed, Likelihood::gaussian(0.1));

    const std::vector<double> xs = linspace(gmin, gmax, gpoints);
    Matrix grid(gpoints, 1);
    for (std::size_t i = 0; i < gpoints; ++i) grid(i, 0) = xs[i];
    const std::vector<Matrix> outs = predict_all(run.particles, grid);
    Matrix preds(outs.size(), gpoints);
    for (std::size_t i = 0; i < outs.size(); ++i)
        for (std::size_t g = 0; g < gpoints; ++g) preds(i, g) = outs[i](g, 0);

    std::vector<double> train_x(data.size()), train_y = data.targets;
    for (std::size_t i = 0; i < data.size(); ++i) train_x[i] = data.inputs(i, 0);
    write_text(join(out, "bands.svg"), plot_regression_bands(xs, preds, train_x, train_y));

    std::vector<std::string> header{"x"};
    for (std::size_t i = 0; i < preds.rows; ++i) header.push_back("particle_" + std::to_string(i));
    header.push_back("mean");
    header.push_back("std");
    CsvWriter csv(header);
    for (std::size_t g = 0; g < gpoints; ++g) {
        std::vector<double> row{xs[g]};
        double mean = 0.0;
        for (std::size_t i = 0; i < preds.rows; ++i) {
            row.push_back(preds(i, g));
            mean += preds(i, g);
        }
        mean /= static_cast<double>(preds.rows);
        double var = 0.0;
        for (std::size_t i = 0; i < preds.rows; ++i) {
            const double d = preds(i, g) - mean;
            var += d * d;
        }
        row.push_back(mean);
        row.push_back(std::sqrt(var / static_cast<double>(preds.rows)));
        csv.add_row(row);
    }
    csv.write(join(out, "particles.csv"));
    write_trainlog(run.log, out);
    if (!opts.checkpoint.empty()) save_checkpoint(run.particles, opts.checkpoint);

    const double final_nll =
        run.log.entries.empty() ? 0.0 : run.log.entries.back().train_nll;
    std::cout << "toy-regression: " << run.particles.n() << " particles, " << data.size()
              << " train points, final train nll " << metric_display(final_nll, false) << "\n";
    std::cout << "wrote " << join(out, "bands.svg") << ", " << join(out, "particles.csv") << ", "
              << join(out, "trainlog.csv") << "\n";
    return 0;
}

int run_toy_classification(const json& j, const CommonOpts& opts) {
    check_keys(j, "config",
               {"seed", "out", "n_train", "n_test", "noise_std", "grid", "model", "train",
                "kernel", "repulsion", "pretrain"});
    const std::uint64_t seed = resolve_seed(j, opts);
    const std::string out = resolve_out(j, opts, true);
    const std::size_t n_train = get_size(j, "config", "n_train", 200);
    const std::size_t n_test = get_size(j, "config", "n_test", 400);
    const double noise = get_num(j, "config", "noise_std", 0.1);
    if (n_train == 0 || n_test == 0) bad("config.n_train and config.n_test must be positive");

    double x0 = -2.5, x1 = 3.5, y0 = -2.0, y1 = 2.5;
    std::size_t gpoints = 80;
    if (const json* g = find(j, "grid")) {
        check_keys(*g, "grid", {"x_min", "x_max", "y_min", "y_max", "points"});
        x0 = get_num(*g, "grid", "x_min", x0);
        x1 = get_num(*g, "grid", "x_max", x1);
        y0 = get_num(*g, "grid", "y_min", y0);
        y1 = get_num(*g, "grid", "y_max", y1);
        gpoints = get_size(*g, "grid", "points", gpoints);
        if (!(x1 > x0) || !(y1 > y0) || gpoints < 2) bad("config.grid ranges must be increasing");
    }

    const Dataset data = gen_two_moons(derive_seed(seed, 10), n_train, noise);
    const Dataset test = gen_two_moons(derive_seed(seed, 11), n_test, noise);
    TrainedRun run = run_training(j, data, seed, Likelihood::categorical());

    const EvalReport report =
        evaluate(ensemble_mean_probs(run.particles, test.inputs), class_labels(test));
    write_metrics(report, join(out, "metrics.csv"));
    write_trainlog(run.log, out);

    Matrix grid_inputs(gpoints * gpoints, 2);
    const double dx = (x1 - x0) / static_cast<double>(gpoints);
    const double dy = (y1 - y0) / static_cast<double>(gpoints);
    for (std::size_t r = 0; r < gpoints; ++r)
        for (std::size_t c = 0; c < gpoints; ++c) {
            grid_inputs(r * gpoints + c, 0) = x0 + (static_cast<double>(c) + 0.5) * dx;
            grid_inputs(r * gpoints + c, 1) = y0 + (static_cast<double>(r) + 0.5) * dy;
        }
    const std::vector<UncertaintyTriple> triples = decompose_batch(run.particles, grid_inputs);
    Matrix heat(gpoints, gpoints);
    for (std::size_t r = 0; r < gpoints; ++r)
        for (std::size_t c = 0; c < gpoints; ++c) heat(r, c) = triples[r * gpoints + c].epistemic;

    std::vector<double> sx(data.size()), sy(data.size());
    std::vector<int> scls(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        sx[i] = data.inputs(i, 0);
        sy[i] = data.inputs(i, 1);
        scls[i] = static_cast<int>(data.targets[i]);
    }
    write_text(join(out, "heatmap.svg"), plot_heatmap(heat, x0, x1, y0, y1, sx, sy, scls));
    if (!opts.checkpoint.empty()) save_checkpoint(run.particles, opts.checkpoint);

    std::cout << "toy-classification: ";
    print_report(report, opts.percent);
    std::cout << "wrote " << join(out, "heatmap.svg") << ", " << join(out, "metrics.csv") << ", "
              << join(out, "trainlog.csv") << "\n";
    return 0;
}

int run_train(const json& j, const CommonOpts& opts) {
    check_keys(j, "config",
               {"seed", "out", "data", "model", "train", "kernel", "repulsion", "pretrain"});
    const std::uint64_t seed = resolve_seed(j, opts);
    const std::string out = resolve_out(j, opts, false);

    const json* data_j = find(j, "data");
    if (!data_j) bad("config.data is required");
    check_keys(*data_j, "data", {"train", "test", "target_kind"});
    std::optional<TargetKind> expect;
    const std::string kind = get_str(*data_j, "data", "target_kind", "");
    if (kind == "class")
        expect = TargetKind::ClassLabel;
    else if (kind == "regression")
        expect = TargetKind::Regression;
    else if (!kind.empty())
        bad("data.target_kind must be \"class\" or \"regression\"");

    const Dataset data = load_dataset(require_str(*data_j, "data", "train"), expect);
    const Likelihood default_lik = data.target_kind == TargetKind::ClassLabel
                                       ? Likelihood::categorical()
                                       : Likelihood::gaussian(0.1);
    TrainedRun run = run_training(j, data, seed, default_lik);

    if (!opts.checkpoint.empty()) save_checkpoint(run.particles, opts.checkpoint);
    if (!out.empty()) write_trainlog(run.log, out);

    const std::string test_path = get_str(*data_j, "data", "test", "");
    if (!test_path.empty()) {
        const Dataset test = load_dataset(test_path, expect);
        if (test.target_kind == TargetKind::ClassLabel) {
            const EvalReport report =
                evaluate(ensemble_mean_probs(run.particles, test.inputs), class_labels(test));
            if (!out.empty()) write_metrics(report, join(out, "metrics.csv"));
            std::cout << "test: ";
            print_report(report, opts.percent);
        } else {
            bad("data.test evaluation requires class labels");
        }
    }

    const double final_nll =
        run.log.entries.empty() ? 0.0 : run.log.entries.back().train_nll;
    std::cout << "train: " << run.particles.n() << " particles, " << run.particles.step_counter
              << " total steps, final train nll " << metric_display(final_nll, false) << "\n";
    return 0;
}

int run_decompose(const json& j, const CommonOpts& opts) {
    check_keys(j, "config", {"seed", "out", "data", "bins"});
    if (opts.checkpoint.empty()) bad("--checkpoint is required for decompose");
    const std::string out = resolve_out(j, opts, true);
    const std::size_t bins = get_size(j, "config", "bins", 30);
    if (bins == 0) bad("config.bins must be positive");

    const json* data_j = find(j, "data");
    if (!data_j) bad("config.data is required");
    check_keys(*data_j, "data", {"eval"});
    const Dataset ds = load_dataset(require_str(*data_j, "data", "eval"));

    const ParticleSet ps = load_checkpoint(opts.checkpoint);
    const std::vector<UncertaintyTriple> triples = decompose_batch(ps, ds.inputs);

    CsvWriter csv({"index", "total", "aleatoric", "epistemic"});
    std::vector<double> total(triples.size()), aleatoric(triples.size()),
        epistemic(triples.size());
    for (std::size_t i = 0; i < triples.size(); ++i) {
        total[i] = triples[i].total;
        aleatoric[i] = triples[i].aleatoric;
        epistemic[i] = triples[i].epistemic;
        csv.add_row({static_cast<double>(i), total[i], aleatoric[i], epistemic[i]});
    }
    csv.write(join(out, "uncertainty.csv"));
    write_text(join(out, "histogram.svg"),
               plot_histogram({"total", "aleatoric", "epistemic"},
                              {total, aleatoric, epistemic}, bins));

    const auto mean = [](const std::vector<double>& v) {
        return v.empty() ? 0.0
                         : std::accumulate(v.begin(), v.end(), 0.0) /
                               static_cast<double>(v.size());
    };
    std::cout << "decompose: n=" << triples.size() << " mean_total="
              << metric_display(mean(total), false)
              << " mean_aleatoric=" << metric_display(mean(aleatoric), false)
              << " mean_epistemic=" << metric_display(mean(epistemic), false) << "\n";
    std::cout << "wrote " << join(out, "uncertainty.csv") << ", " << join(out, "histogram.svg")
              << "\n";
    return 0;
}

int run_ood_eval(const json& j, const CommonOpts& opts) {
    check_keys(j, "config", {"seed", "out", "data"});
    if (opts.checkpoint.empty()) bad("--checkpoint is required for ood-eval");
    const std::string out = resolve_out(j, opts, true);

    const json* data_j = find(j, "data");
    if (!data_j) bad("config.data is required");
    check_keys(*data_j, "data", {"id_test", "ood"});
    const Dataset id_test =
        load_dataset(require_str(*data_j, "data", "id_test"), TargetKind::ClassLabel);

    const json* ood_j = find(*data_j, "ood");
    if (!ood_j || !ood_j->is_object() || ood_j->empty())
        bad("data.ood must map at least one name to a dataset path");
    std::vector<Dataset> oods;
    for (const auto& item : ood_j->items()) {
        if (!item.value().is_string()) bad("data.ood." + item.key() + " must be a path");
        Dataset ds = load_dataset(item.value().get<std::string>());
        ds.name = item.key();
        oods.push_back(std::move(ds));
    }

    const ParticleSet ps = load_checkpoint(opts.checkpoint);
    const OodReport report = ood_eval(ps, id_test, oods);

    CsvWriter csv({"ood_name", "epistemic_auroc", "total_auroc", "aleatoric_auroc"});
    for (const auto& e : report.aurocs)
        csv.add_row_mixed({e.ood_name, format_g17(e.epistemic), format_g17(e.total),
                           format_g17(e.aleatoric)});
    csv.write(join(out, "ood_auroc.csv"));
    write_metrics(report.id_report, join(out, "metrics.csv"));

    std::cout << "id: ";
    print_report(report.id_report, opts.percent);
    for (const auto& e : report.aurocs)
        std::cout << "ood " << e.ood_name << ": epistemic_auroc="
                  << metric_display(e.epistemic, false)
                  << " total_auroc=" << metric_display(e.total, false)
                  << " aleatoric_auroc=" << metric_display(e.aleatoric, false) << "\n";
    std::cout << "wrote " << join(out, "ood_auroc.csv") << ", " << join(out, "metrics.csv")
              << "\n";
    return 0;
}

AcquisitionScore parse_score(const std::string& s) {
    if (s == "epistemic") return AcquisitionScore::Epistemic;
    if (s == "total") return AcquisitionScore::Total;
    if (s == "aleatoric") return AcquisitionScore::Aleatoric;
    if (s == "random") return AcquisitionScore::Random;
    bad("acquisition score must be one of epistemic, total, aleatoric, random");
}

int run_active_learn(const json& j, const CommonOpts& opts) {
    check_keys(j, "config",
               {"seed", "out", "pool", "test", "acquisition", "model", "train", "kernel"});
    const std::uint64_t seed = resolve_seed(j, opts);
    const std::string out = resolve_out(j, opts, true);

    std::size_t pool_size = 1200, classes = 8;
    double radius = 3.0, spread = 0.5, ambiguous_fraction = 0.0;
    if (const json* p = find(j, "pool")) {
        check_keys(*p, "pool", {"size", "classes", "radius", "spread", "ambiguous_fraction"});
        pool_size = get_size(*p, "pool", "size", pool_size);
        classes = get_size(*p, "pool", "classes", classes);
        radius = get_num(*p, "pool", "radius", radius);
        spread = get_num(*p, "pool", "spread", spread);
        ambiguous_fraction = get_num(*p, "pool", "ambiguous_fraction", ambiguous_fraction);
    }
    std::size_t test_size = 2000;
    if (const json* t = find(j, "test")) {
        check_keys(*t, "test", {"size"});
        test_size = get_size(*t, "test", "size", test_size);
    }

    Dataset pool = gen_blobs(derive_seed(seed, 10), pool_size, classes, radius, spread);
    if (ambiguous_fraction > 0.0) {
        Rng mix_rng(derive_seed(seed, 12));
        pool = gen_ambiguous_mix(pool, ambiguous_fraction, mix_rng);
    }
    const Dataset test = gen_blobs(derive_seed(seed, 11), test_size, classes, radius, spread);

    AcquisitionConfig acfg;
    std::vector<std::string> score_names{"epistemic", "random"};
    if (const json* a = find(j, "acquisition")) {
        check_keys(*a, "acquisition",
                   {"initial_labeled", "acquire_per_round", "rounds", "scores"});
        acfg.initial_labeled = get_size(*a, "acquisition", "initial_labeled", 20);
        acfg.acquire_per_round = get_size(*a, "acquisition", "acquire_per_round", 5);
        acfg.rounds = get_size(*a, "acquisition", "rounds", 55);
        if (const json* s = find(*a, "scores")) {
            if (!s->is_array() || s->empty()) bad("acquisition.scores must be a non-empty array");
            score_names.clear();
            for (const auto& e : *s) {
                if (!e.is_string()) bad("acquisition.scores entries must be strings");
                score_names.push_back(e.get<std::string>());
            }
        }
    }

    const json* model_j = find(j, "model");
    if (!model_j) bad("config.model is required");
    const json* train_j = find(j, "train");
    if (!train_j) bad("config.train is required");
    const ModelCfg model = parse_model(*model_j);
    acfg.retrain = parse_train(*train_j, find(j, "kernel"), Likelihood::categorical());
    acfg.seed = seed;
    const ParticleSet proto = build_particle_set(model, derive_seed(seed, 20));

    std::vector<double> labeled(acfg.rounds);
    for (std::size_t r = 0; r < acfg.rounds; ++r)
        labeled[r] =
            static_cast<double>(acfg.initial_labeled + r * acfg.acquire_per_round);

    std::vector<std::vector<double>> curves;
    for (const std::string& name : score_names) {
        acfg.score = parse_score(name);
        curves.push_back(active_learning_run(pool, test, proto, acfg));
    }

    std::vector<std::string> header{"labeled"};
    header.insert(header.end(), score_names.begin(), score_names.end());
    CsvWriter csv(header);
    for (std::size_t r = 0; r < acfg.rounds; ++r) {
        std::vector<double> row{labeled[r]};
        for (const auto& c : curves) row.push_back(c[r]);
        csv.add_row(row);
    }
    csv.write(join(out, "accuracy_curves.csv"));
    write_text(join(out, "curves.svg"),
               plot_curves(labeled, score_names, curves, "labeled samples", "test accuracy"));

    std::cout << "active-learn: pool=" << pool.size() << " test=" << test.size() << "\n";
    for (std::size_t s = 0; s < score_names.size(); ++s)
        std::cout << score_names[s]
                  << ": final_accuracy=" << metric_display(curves[s].back(), false) << "\n";
    std::cout << "wrote " << join(out, "accuracy_curves.csv") << ", " << join(out, "curves.svg")
              << "\n";
    return 0;
}

std::string widths_string(const MlpSpec& spec) {
    std::string s = "[";
    for (std::size_t i = 0; i < spec.layer_widths.size(); ++i) {
        if (i > 0) s += " ";
        s += std::to_string(spec.layer_widths[i]);
    }
    return s + "]";
}

int run_info(const CommonOpts& opts) {
    if (opts.checkpoint.empty()) bad("--checkpoint is required for info");
    const ParticleSet ps = load_checkpoint(opts.checkpoint);
    const char* act = ps.base_spec.activation == Activation::ReLU ? "relu" : "tanh";
    if (ps.mode == ParticleMode::MultiHead) {
        const char* head_act = ps.head_spec.activation == Activation::ReLU ? "relu" : "tanh";
        std::cout << "mode: multi_head\n"
                  << "particles: " << ps.n() << "\n"
                  << "base: " << widths_string(ps.base_spec) << " activation=" << act
                  << " frozen=" << (ps.base_frozen ? "yes" : "no") << "\n"
                  << "head: " << widths_string(ps.head_spec) << " activation=" << head_act
                  << "\n";
    } else {
        std::cout << "mode: full_ensemble\n"
                  << "particles: " << ps.n() << "\n"
                  << "network: " << widths_string(ps.base_spec) << " activation=" << act << "\n";
    }
    std::cout << "rng_seed: " << ps.rng_seed << "\n"
              << "step_counter: " << ps.step_counter << "\n"
              << "trainable_parameters: " << trainable_parameter_count(ps) << "\n";
    return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Repulsive particle ensembles for neural networks"};
    app.require_subcommand(1);

    CommonOpts opts;
    long long threads = 1;

    struct SubDef {
        const char* name;
        const char* desc;
        bool needs_config;
        bool needs_checkpoint;
    };
    const SubDef defs[] = {
        {"toy-regression", "Train on the two-cluster 1-D toy and plot predictive bands", true,
         false},
        {"toy-classification", "Train on two moons and map epistemic uncertainty", true, false},
        {"train", "Train on datasets from files and save a checkpoint", true, false},
        {"decompose", "Per-sample uncertainty decomposition for a checkpoint", true, true},
        {"ood-eval", "ID metrics and ID-vs-OOD uncertainty AUROCs for a checkpoint", true, true},
        {"active-learn", "Pool-based active learning with uncertainty acquisition", true, false},
        {"info", "Describe a checkpoint", false, true},
    };
    for (const SubDef& d : defs) {
        CLI::App* sub = app.add_subcommand(d.name, d.desc);
        CLI::Option* config =
            sub->add_option("--config", opts.config_path, "JSON experiment config");
        if (d.needs_config) config->required();
        sub->add_option("--seed", opts.seed, "Seed overriding the config value");
        sub->add_option("--out", opts.out_dir, "Output directory");
        CLI::Option* ck = sub->add_option("--checkpoint", opts.checkpoint, "Checkpoint path");
        if (d.needs_checkpoint) ck->required();
        sub->add_flag("--percent", opts.percent, "Display NLL and ECE multiplied by 100");
        sub->add_option("--threads", threads, "Worker thread count (default 1)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: usage: " << e.what() << "\n";
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    opts.seed_set = sub->count("--seed") > 0;

    if (const char* env = std::getenv("REPULSE_THREADS")) {
        char* end = nullptr;
        const long long n = std::strtoll(env, &end, 10);
        if (end == env || *end != '\0' || n <= 0) {
            std::cerr << "error: config: REPULSE_THREADS must be a positive integer\n";
            return 3;
        }
        threads = n;
    }
    if (threads <= 0) {
        std::cerr << "error: config: --threads must be positive\n";
        return 3;
    }
    set_thread_count(static_cast<std::size_t>(threads));

    const std::string name = sub->get_name();
    try {
        if (name == "info") return run_info(opts);
        const json cfg = load_config_file(opts);
        if (name == "toy-regression") return run_toy_regression(cfg, opts);
        if (name == "toy-classification") return run_toy_classification(cfg, opts);
        if (name == "train") return run_train(cfg, opts);
        if (name == "decompose") return run_decompose(cfg, opts);
        if (name == "ood-eval") return run_ood_eval(cfg, opts);
        if (name == "active-learn") return run_active_learn(cfg, opts);
        std::cerr << "error: usage: unknown subcommand " << name << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: numeric: " << e.what() << "\n";
        return 4;
    } catch (const CheckpointError& e) {
        std::cerr << "error: checkpoint: " << e.what() << "\n";
        return 3;
    } catch (const DatasetError& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace repulse
