#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "repulse/dataset.hpp"
#include "repulse/rng.hpp"
#include "repulse/tasks.hpp"

namespace {

using namespace repulse;

struct Common {
    std::string out;
    std::string format = "csv";
    std::uint64_t seed = 0;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--out", c.out, "Output dataset path")->required();
    sub->add_option("--format", c.format, "File format: csv or binary")
        ->check(CLI::IsMember({"csv", "binary"}));
    sub->add_option("--seed", c.seed, "Generator seed");
}

void save(const Dataset& ds, const Common& c) {
    if (c.format == "binary")
        save_dataset_binary(ds, c.out);
    else
        save_dataset_csv(ds, c.out);
    const char* kind = ds.target_kind == TargetKind::ClassLabel ? "class" : "regression";
    std::cout << "wrote " << ds.size() << " samples (" << ds.dim() << " features, " << kind
              << ") to " << c.out << "\n";
}

Dataset uniform_box(std::uint64_t seed, std::size_t n, std::size_t dim, std::vector<double> lo,
                    std::vector<double> hi) {
    if (lo.size() == 1) lo.assign(dim, lo[0]);
    if (hi.size() == 1) hi.assign(dim, hi[0]);
    if (lo.size() != dim || hi.size() != dim)
        throw std::runtime_error("--low/--high need 1 value or one per dimension");
    for (std::size_t c = 0; c < dim; ++c)
        if (!(hi[c] > lo[c])) throw std::runtime_error("--high must exceed --low");
    Dataset ds;
    ds.inputs = Matrix(n, dim);
    ds.targets.assign(n, 0.0);
    ds.target_kind = TargetKind::ClassLabel;
    Rng rng(seed);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < dim; ++c) ds.inputs(r, c) = rng.uniform(lo[c], hi[c]);
    return ds;
}

Dataset mixed_rows_only(const Dataset& ds) {
    Dataset out;
    out.target_kind = ds.target_kind;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (i < ds.ambiguous.size() && ds.ambiguous[i]) keep.push_back(i);
    out.inputs = Matrix(keep.size(), ds.dim());
    out.targets.resize(keep.size());
    for (std::size_t r = 0; r < keep.size(); ++r) {
        for (std::size_t c = 0; c < ds.dim(); ++c) out.inputs(r, c) = ds.inputs(keep[r], c);
        out.targets[r] = ds.targets[keep[r]];
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic dataset generator for the repulse CLI"};
    app.require_subcommand(1);

    Common common;

    std::size_t npc = 50;
    CLI::App* toy = app.add_subcommand("toy1d", "Two-cluster 1-D regression toy");
    add_common(toy, common);
    toy->add_option("--n-per-cluster", npc, "Samples per cluster");

    std::size_t moons_n = 200;
    double moons_noise = 0.1;
    CLI::App* moons = app.add_subcommand("moons", "Two interleaved half circles");
    add_common(moons, common);
    moons->add_option("--n", moons_n, "Total samples");
    moons->add_option("--noise", moons_noise, "Gaussian noise std");

    std::size_t blobs_n = 400, blobs_k = 8;
    double blobs_radius = 3.0, blobs_spread = 0.5;
    CLI::App* blobs = app.add_subcommand("blobs", "Gaussian clusters on a circle");
    add_common(blobs, common);
    blobs->add_option("--n", blobs_n, "Total samples");
    blobs->add_option("--classes", blobs_k, "Number of clusters");
    blobs->add_option("--radius", blobs_radius, "Circle radius for cluster centers");
    blobs->add_option("--spread", blobs_spread, "Within-cluster std");

    std::string amb_from;
    double amb_fraction = 0.5;
    bool amb_mixed_only = false;
    CLI::App* amb = app.add_subcommand(
        "ambiguous", "Convex between-class mixes appended to an existing dataset");
    add_common(amb, common);
    amb->add_option("--from", amb_from, "Base classification dataset")->required();
    amb->add_option("--fraction", amb_fraction, "Mixed samples as a fraction of the base count");
    amb->add_flag("--mixed-only", amb_mixed_only, "Keep only the mixed samples");

    std::size_t box_n = 200, box_dim = 2;
    std::vector<double> box_lo{0.0}, box_hi{1.0};
    CLI::App* box = app.add_subcommand("uniform", "Uniform box samples, all labeled class 0");
    add_common(box, common);
    box->add_option("--n", box_n, "Total samples");
    box->add_option("--dim", box_dim, "Input dimension");
    box->add_option("--low", box_lo, "Lower bounds (1 value or one per dimension)");
    box->add_option("--high", box_hi, "Upper bounds (1 value or one per dimension)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: usage: " << e.what() << "\n";
        return 2;
    }

    try {
        if (toy->parsed()) {
            save(gen_regression_toy(common.seed, npc), common);
        } else if (moons->parsed()) {
            save(gen_two_moons(common.seed, moons_n, moons_noise), common);
        } else if (blobs->parsed()) {
            save(gen_blobs(common.seed, blobs_n, blobs_k, blobs_radius, blobs_spread), common);
        } else if (amb->parsed()) {
            const Dataset base = load_dataset(amb_from, TargetKind::ClassLabel);
            Rng rng(common.seed);
            const Dataset mixed = gen_ambiguous_mix(base, amb_fraction, rng);
            save(amb_mixed_only ? mixed_rows_only(mixed) : mixed, common);
        } else {
            save(uniform_box(common.seed, box_n, box_dim, box_lo, box_hi), common);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
