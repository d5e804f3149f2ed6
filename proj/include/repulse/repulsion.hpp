#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "repulse/matrix.hpp"
#include "repulse/rng.hpp"

namespace repulse {

enum class RepulsionKind : std::uint8_t {
    TrainInputs = 0,
    PatchShuffle = 1,
    OodPool = 2,
    UniformNoise = 3,
    UniformDomain = 4,
};

struct ImageShape {
    std::size_t h = 0;
    std::size_t w = 0;
    std::size_t c = 1;
};

/// Where repulsion samples come from. Pool-backed kinds hold a copy of the
/// backing rows.
struct RepulsionSource {
    RepulsionKind kind = RepulsionKind::TrainInputs;
    Matrix pool;                  // TrainInputs / PatchShuffle / OodPool
    std::size_t patch_side = 0;   // PatchShuffle
    ImageShape image_shape{};     // PatchShuffle; h*w*c must equal pool.cols
    double low = 0.0;             // UniformNoise
    double high = 1.0;            // UniformNoise
    std::size_t dim = 0;          // UniformNoise
    std::vector<std::pair<double, double>> box;  // UniformDomain, (low, high) per dim

    static RepulsionSource train_inputs(Matrix pool);
    static RepulsionSource patch_shuffled(Matrix pool, std::size_t patch_side, ImageShape shape);
    static RepulsionSource ood_pool(Matrix pool);
    static RepulsionSource uniform_noise(double low, double high, std::size_t dim);
    static RepulsionSource uniform_domain(std::vector<std::pair<double, double>> box);
};

struct RepulsionBatch {
    Matrix inputs;  // B_r x d_in
};

/// Pool kinds sample rows uniformly without replacement (with replacement
/// when b exceeds the pool size); PatchShuffle additionally shuffles each
/// sampled row; noise and domain kinds draw i.i.d. uniforms per entry.
RepulsionBatch draw(const RepulsionSource& source, Rng& rng, std::size_t b);

/// Permutes p x p tiles anchored at multiples of p, uniformly at random
/// within classes of equal tile shape (residual edge tiles form their own
/// classes); channels move together. Layout is row-major (y, x, channel).
/// Tile classes are processed in order of first appearance in a row-major
/// tile scan, and within a class the anchor list in scan order is permuted
/// by one Fisher-Yates pass; tile k of the class is then filled from the
/// permuted anchor k.
std::vector<double> patch_shuffle(const std::vector<double>& image, ImageShape shape,
                                  std::size_t patch_side, Rng& rng);

}  // namespace repulse
