#include "repulse/repulsion.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <string>

namespace repulse {

RepulsionSource RepulsionSource::train_inputs(Matrix pool) {
    RepulsionSource s;
    s.kind = RepulsionKind::TrainInputs;
    s.pool = std::move(pool);
    return s;
}

RepulsionSource RepulsionSource::patch_shuffled(Matrix pool, std::size_t patch_side,
                                                ImageShape shape) {
    if (shape.h * shape.w * shape.c != pool.cols)
        throw std::invalid_argument("image shape does not match pool row width");
    if (patch_side == 0 || patch_side > std::max(shape.h, shape.w))
        throw std::invalid_argument("patch side outside [1, max(H, W)]");
    RepulsionSource s;
    s.kind = RepulsionKind::PatchShuffle;
    s.pool = std::move(pool);
    s.patch_side = patch_side;
    s.image_shape = shape;
    return s;
}

RepulsionSource RepulsionSource::ood_pool(Matrix pool) {
    RepulsionSource s;
    s.kind = RepulsionKind::OodPool;
    s.pool = std::move(pool);
    return s;
}

RepulsionSource RepulsionSource::uniform_noise(double low, double high, std::size_t dim) {
    if (!(low < high)) throw std::invalid_argument("noise bounds need low < high");
    if (dim == 0) throw std::invalid_argument("noise dimension must be positive");
    RepulsionSource s;
    s.kind = RepulsionKind::UniformNoise;
    s.low = low;
    s.high = high;
    s.dim = dim;
    return s;
}

RepulsionSource RepulsionSource::uniform_domain(std::vector<std::pair<double, double>> box) {
    if (box.empty()) throw std::invalid_argument("empty domain box");
    for (const auto& [lo, hi] : box)
        if (!(lo < hi)) throw std::invalid_argument("domain bounds need low < high");
    RepulsionSource s;
    s.kind = RepulsionKind::UniformDomain;
    s.box = std::move(box);
    return s;
}

RepulsionBatch draw(const RepulsionSource& source, Rng& rng, std::size_t b) {
    if (b == 0) throw std::invalid_argument("repulsion batch size must be positive");
    RepulsionBatch batch;
    switch (source.kind) {
        case RepulsionKind::TrainInputs:
        case RepulsionKind::PatchShuffle:
        case RepulsionKind::OodPool: {
            const Matrix& pool = source.pool;
            if (pool.rows == 0) throw std::invalid_argument("empty repulsion pool");
            std::vector<std::size_t> picks;
            if (b <= pool.rows) {
                picks = rng.sample_without_replacement(pool.rows, b);
            } else {
                picks.reserve(b);
                for (std::size_t i = 0; i < b; ++i) picks.push_back(rng.index(pool.rows));
            }
            batch.inputs = Matrix(b, pool.cols);
            for (std::size_t i = 0; i < b; ++i)
                std::memcpy(batch.inputs.row(i), pool.row(picks[i]), pool.cols * sizeof(double));
            if (source.kind == RepulsionKind::PatchShuffle) {
                for (std::size_t i = 0; i < b; ++i) {
                    std::vector<double> img(batch.inputs.row(i),
                                            batch.inputs.row(i) + pool.cols);
                    img = patch_shuffle(img, source.image_shape, source.patch_side, rng);
                    std::memcpy(batch.inputs.row(i), img.data(), pool.cols * sizeof(double));
                }
            }
            break;
        }
        case RepulsionKind::UniformNoise: {
            batch.inputs = Matrix(b, source.dim);
            for (double& v : batch.inputs.data) v = rng.uniform(source.low, source.high);
            break;
        }
        case RepulsionKind::UniformDomain: {
            batch.inputs = Matrix(b, source.box.size());
            for (std::size_t i = 0; i < b; ++i)
                for (std::size_t j = 0; j < source.box.size(); ++j)
                    batch.inputs(i, j) = rng.uniform(source.box[j].first, source.box[j].second);
            break;
        }
    }
    return batch;
}

std::vector<double> patch_shuffle(const std::vector<double>& image, ImageShape shape,
                                  std::size_t patch_side, Rng& rng) {
    const std::size_t h = shape.h, w = shape.w, c = shape.c;
    if (image.size() != h * w * c)
        throw std::invalid_argument("image size does not match shape");
    if (patch_side == 0 || patch_side > std::max(h, w))
        throw std::invalid_argument("patch side outside [1, max(H, W)]");

    struct Anchor {
        std::size_t y, x;
    };
    struct Group {
        std::size_t th, tw;
        std::vector<Anchor> anchors;
    };
    std::vector<Group> groups;
    for (std::size_t y = 0; y < h; y += patch_side) {
        for (std::size_t x = 0; x < w; x += patch_side) {
            const std::size_t th = std::min(patch_side, h - y);
            const std::size_t tw = std::min(patch_side, w - x);
            Group* g = nullptr;
            for (Group& cand : groups)
                if (cand.th == th && cand.tw == tw) {
                    g = &cand;
                    break;
                }
            if (g == nullptr) {
                groups.push_back({th, tw, {}});
                g = &groups.back();
            }
            g->anchors.push_back({y, x});
        }
    }

    std::vector<double> out(image.size(), 0.0);
    for (const Group& g : groups) {
        std::vector<Anchor> perm = g.anchors;
        rng.shuffle(perm);
        for (std::size_t k = 0; k < g.anchors.size(); ++k) {
            const Anchor dst = g.anchors[k];
            const Anchor src = perm[k];
            for (std::size_t dy = 0; dy < g.th; ++dy) {
                const double* from = image.data() + ((src.y + dy) * w + src.x) * c;
                double* to = out.data() + ((dst.y + dy) * w + dst.x) * c;
                std::memcpy(to, from, g.tw * c * sizeof(double));
            }
        }
    }
    return out;
}

}  // namespace repulse
