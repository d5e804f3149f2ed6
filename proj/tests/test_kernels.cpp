#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "repulse/kernels.hpp"
#include "repulse/rng.hpp"

using namespace repulse;

namespace {

Matrix random_particles(Rng& rng, std::size_t n, std::size_t m, double scale = 1.0) {
    Matrix v(n, m);
    for (double& x : v.data) x = scale * rng.normal();
    return v;
}

double loop_distance(const Matrix& v, std::size_t i, std::size_t j, Distance metric) {
    double acc = 0.0;
    for (std::size_t d = 0; d < v.cols; ++d) {
        const double diff = v(i, d) - v(j, d);
        if (metric == Distance::L1)
            acc += std::abs(diff);
        else
            acc += diff * diff;
    }
    return metric == Distance::L2 ? std::sqrt(acc) : acc;
}

double sorted_median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace

TEST_CASE("pairwise distances on the 3-4-5 triangle") {
    Matrix v(2, 2, 0.0);
    v(1, 0) = 3.0;
    v(1, 1) = 4.0;
    CHECK(pairwise_distances(v, Distance::L2)(0, 1) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(pairwise_distances(v, Distance::SqL2)(0, 1) == doctest::Approx(25.0).epsilon(1e-15));
    CHECK(pairwise_distances(v, Distance::L1)(0, 1) == doctest::Approx(7.0).epsilon(1e-15));
    CHECK(pairwise_distances(v, Distance::L2)(0, 0) == 0.0);
    CHECK(pairwise_distances(v, Distance::L2)(1, 1) == 0.0);
}

TEST_CASE("pairwise distances match scalar loops") {
    Rng rng(3);
    for (Distance metric : {Distance::L1, Distance::L2, Distance::SqL2}) {
        for (int trial = 0; trial < 20; ++trial) {
            const Matrix v = random_particles(rng, 2 + rng.index(6), 1 + rng.index(8));
            const Matrix d = pairwise_distances(v, metric);
            for (std::size_t i = 0; i < v.rows; ++i)
                for (std::size_t j = 0; j < v.rows; ++j)
                    CHECK(d(i, j) ==
                          doctest::Approx(loop_distance(v, i, j, metric)).epsilon(1e-12));
        }
    }
}

TEST_CASE("median bandwidth follows the sort-and-average oracle") {
    Rng rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + rng.index(7);
        const Matrix v = random_particles(rng, n, 3);
        const Matrix sq = pairwise_distances(v, Distance::SqL2);
        std::vector<double> offdiag;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) offdiag.push_back(sq(i, j));
        const double want = sorted_median(offdiag) / std::log(static_cast<double>(n));
        CHECK(median_bandwidth(sq, n) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("median bandwidth of two points is dist^2 over log 2") {
    Matrix v(2, 1, 0.0);
    v(1, 0) = 3.0;
    const Matrix sq = pairwise_distances(v, Distance::SqL2);
    CHECK(median_bandwidth(sq, 2) == doctest::Approx(9.0 / std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("collapsed particles fall back to the tiny fixed bandwidth") {
    Matrix v(3, 4, 0.7);
    const Matrix sq = pairwise_distances(v, Distance::SqL2);
    CHECK(median_bandwidth(sq, 3) == 1e-8);
}

TEST_CASE("median bandwidth needs at least two particles") {
    const Matrix sq(1, 1, 0.0);
    CHECK_THROWS_AS(median_bandwidth(sq, 1), std::invalid_argument);
}

TEST_CASE("kernel matrix properties: symmetry, unit diagonal, range") {
    Rng rng(21);
    for (Distance metric : {Distance::L1, Distance::L2, Distance::SqL2}) {
        KernelConfig cfg;
        cfg.distance = metric;
        for (int trial = 0; trial < 15; ++trial) {
            const std::size_t n = 2 + rng.index(8);
            const Matrix v = random_particles(rng, n, 1 + rng.index(6));
            const Matrix d = pairwise_distances(v, metric);
            const Matrix sq = metric == Distance::SqL2 ? d : pairwise_distances(v, Distance::SqL2);
            const KernelMatrix k = kernel_matrix(d, cfg, &sq);
            CHECK(k.bandwidth_used == doctest::Approx(median_bandwidth(sq, n)));
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(k.values(i, i) == 1.0);
                for (std::size_t j = 0; j < n; ++j) {
                    CHECK(k.values(i, j) == k.values(j, i));
                    CHECK(k.values(i, j) > 0.0);
                    CHECK(k.values(i, j) <= 1.0);
                    CHECK(k.values(i, j) ==
                          doctest::Approx(std::exp(-d(i, j) / k.bandwidth_used))
                              .epsilon(1e-15));
                }
            }
        }
    }
}

TEST_CASE("fixed bandwidth must be positive") {
    KernelConfig cfg;
    cfg.bandwidth = Bandwidth::fixed(0.0);
    const Matrix d(2, 2, 0.0);
    CHECK_THROWS_AS(kernel_matrix(d, cfg), std::invalid_argument);
}

TEST_CASE("median-heuristic squared-l2 kernel is scale invariant") {
    Rng rng(33);
    KernelConfig cfg;
    cfg.distance = Distance::SqL2;
    const Matrix v = random_particles(rng, 6, 5);
    const KernelMatrix base = kernel_matrix(pairwise_distances(v, Distance::SqL2), cfg);
    for (double c : {0.1, 1.0, 10.0}) {
        Matrix scaled = v;
        for (double& x : scaled.data) x *= c;
        const KernelMatrix k = kernel_matrix(pairwise_distances(scaled, Distance::SqL2), cfg);
        for (std::size_t i = 0; i < k.values.data.size(); ++i)
            CHECK(std::abs(k.values.data[i] - base.values.data[i]) < 1e-10);
    }
}

TEST_CASE("repulsion direction is the gradient of the log kernel sum") {
    Rng rng(45);
    for (Distance metric : {Distance::L1, Distance::L2, Distance::SqL2}) {
        double worst = 0.0;
        int used = 0;
        for (int trial = 0; trial < 60 && used < 25; ++trial) {
            const std::size_t n = 2 + rng.index(5);
            const std::size_t m = 1 + rng.index(5);
            const Matrix v = random_particles(rng, n, m);

            // L1 is kinked where coordinates coincide; keep the finite
            // difference step away from those folds.
            if (metric == Distance::L1) {
                bool near = false;
                for (std::size_t i = 0; i < n && !near; ++i)
                    for (std::size_t j = i + 1; j < n && !near; ++j)
                        for (std::size_t d = 0; d < m; ++d)
                            if (std::abs(v(i, d) - v(j, d)) < 1e-3) near = true;
                if (near) continue;
            }
            ++used;

            const Matrix sq = pairwise_distances(v, Distance::SqL2);
            KernelConfig cfg;
            cfg.distance = metric;
            cfg.bandwidth = Bandwidth::fixed(median_bandwidth(sq, n));

            const std::size_t i = rng.index(n);
            const std::vector<double> dir = repulsion_direction(i, v, cfg);

            const auto logsum = [&](const std::vector<double>& vi) {
                Matrix moved = v;
                for (std::size_t d = 0; d < m; ++d) moved(i, d) = vi[d];
                const Matrix dist = pairwise_distances(moved, metric);
                const KernelMatrix k = kernel_matrix(dist, cfg);
                double sum = 0.0;
                for (std::size_t j = 0; j < n; ++j) sum += k.values(i, j);
                return std::log(sum);
            };
            std::vector<double> vi(v.row(i), v.row(i) + m);
            const std::vector<double> fd = oracles::finite_difference_gradient(logsum, vi);
            worst = std::max(worst, oracles::max_rel_error(dir, fd));
        }
        CHECK(used >= 20);
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("repulsion direction matches an explicit two-loop oracle for sql2") {
    Rng rng(57);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.index(6);
        const std::size_t m = 1 + rng.index(5);
        const Matrix v = random_particles(rng, n, m);
        KernelConfig cfg;
        cfg.distance = Distance::SqL2;

        double bw = 0.0;
        const Matrix dirs = repulsion_directions(v, cfg, &bw);
        const Matrix sq = pairwise_distances(v, Distance::SqL2);
        const double nu = median_bandwidth(sq, n);
        CHECK(bw == doctest::Approx(nu));

        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> num(m, 0.0);
            double den = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double k = std::exp(-sq(i, j) / nu);
                den += k;
                for (std::size_t d = 0; d < m; ++d)
                    num[d] += -2.0 / nu * k * (v(i, d) - v(j, d));
            }
            for (std::size_t d = 0; d < m; ++d)
                CHECK(dirs(i, d) == doctest::Approx(num[d] / den).epsilon(1e-12));
        }
    }
}

TEST_CASE("two particles repel antisymmetrically") {
    Rng rng(69);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix v = random_particles(rng, 2, 1 + rng.index(6));
        for (Distance metric : {Distance::L1, Distance::L2, Distance::SqL2}) {
            KernelConfig cfg;
            cfg.distance = metric;
            const Matrix dirs = repulsion_directions(v, cfg);
            for (std::size_t d = 0; d < v.cols; ++d) CHECK(dirs(0, d) == -dirs(1, d));
        }
    }
}

TEST_CASE("a single particle feels no repulsion") {
    Matrix v(1, 4, 2.0);
    KernelConfig cfg;
    double bw = -1.0;
    const Matrix dirs = repulsion_directions(v, cfg, &bw);
    REQUIRE(dirs.rows == 1);
    for (double x : dirs.data) CHECK(x == 0.0);

    cfg.bandwidth = Bandwidth::fixed(2.5);
    double bw2 = -1.0;
    repulsion_directions(v, cfg, &bw2);
    CHECK(bw2 == 2.5);
}

TEST_CASE("collapsed particles produce zero directions, not NaN") {
    Matrix v(4, 3, 1.25);
    for (Distance metric : {Distance::L1, Distance::L2, Distance::SqL2}) {
        KernelConfig cfg;
        cfg.distance = metric;
        const Matrix dirs = repulsion_directions(v, cfg);
        REQUIRE(dirs.all_finite());
        for (double x : dirs.data) CHECK(x == 0.0);
    }
}

TEST_CASE("row extraction agrees with the batched directions") {
    Rng rng(81);
    const Matrix v = random_particles(rng, 5, 4);
    for (Distance metric : {Distance::L1, Distance::L2, Distance::SqL2}) {
        KernelConfig cfg;
        cfg.distance = metric;
        const Matrix dirs = repulsion_directions(v, cfg);
        for (std::size_t i = 0; i < v.rows; ++i) {
            const std::vector<double> one = repulsion_direction(i, v, cfg);
            for (std::size_t d = 0; d < v.cols; ++d) CHECK(one[d] == dirs(i, d));
        }
    }
}
