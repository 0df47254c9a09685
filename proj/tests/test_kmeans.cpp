// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "loralego/errors.hpp"
#include "loralego/kmeans.hpp"
#include "loralego/rng.hpp"

using namespace loralego;

namespace {

std::vector<std::vector<double>> random_points(std::size_t n, std::size_t dim, Rng& rng) {
    std::vector<std::vector<double>> points(n);
    for (auto& p : points) {
        p = rng.gaussian_vector(dim);
    }
    return points;
}

void check_result_invariants(const std::vector<std::vector<double>>& points,
                             const ClusterResult& result, std::size_t k) {
    REQUIRE(result.assignments.size() == points.size());
    REQUIRE(result.centroids.size() == k);
    const auto members = result.members();
    double inertia = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        REQUIRE(members[c].size() >= 1);
        // Centroid must be the arithmetic mean of its members.
        std::vector<double> mean(points.front().size(), 0.0);
        for (const std::size_t p : members[c]) {
            for (std::size_t j = 0; j < mean.size(); ++j) {
                mean[j] += points[p][j];
            }
        }
        for (std::size_t j = 0; j < mean.size(); ++j) {
            mean[j] /= static_cast<double>(members[c].size());
            CHECK(std::fabs(mean[j] - result.centroids[c][j]) < 1e-12);
        }
        for (const std::size_t p : members[c]) {
            for (std::size_t j = 0; j < mean.size(); ++j) {
                const double d = points[p][j] - result.centroids[c][j];
                inertia += d * d;
            }
        }
    }
    CHECK(result.inertia == doctest::Approx(inertia).epsilon(1e-10));
    CHECK(result.inertia >= 0.0);
}

}  // namespace

TEST_CASE("k=1 yields the global mean and total variance times n") {
    Rng rng(1);
    const auto points = random_points(40, 3, rng);
    KmeansConfig cfg;
    cfg.k = 1;
    cfg.seed = 7;
    const ClusterResult result = kmeans(points, cfg);
    check_result_invariants(points, result, 1);

    std::vector<double> mean(3, 0.0);
    for (const auto& p : points) {
        for (std::size_t j = 0; j < 3; ++j) {
            mean[j] += p[j];
        }
    }
    for (double& v : mean) {
        v /= 40.0;
    }
    double expected = 0.0;
    for (const auto& p : points) {
        for (std::size_t j = 0; j < 3; ++j) {
            expected += (p[j] - mean[j]) * (p[j] - mean[j]);
        }
    }
    CHECK(result.inertia == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("four collinear points split into the known optimum") {
    const std::vector<std::vector<double>> points = {{0, 0}, {2, 0}, {10, 0}, {12, 0}};
    KmeansConfig cfg;
    cfg.k = 2;
    cfg.seed = 3;
    const ClusterResult result = kmeans(points, cfg);
    check_result_invariants(points, result, 2);
    CHECK(result.inertia == doctest::Approx(4.0).epsilon(1e-12));

    std::set<double> xs;
    for (const auto& c : result.centroids) {
        xs.insert(c[0]);
        CHECK(c[1] == 0.0);
    }
    CHECK(xs == std::set<double>{1.0, 11.0});

    // Exhaustive enumeration agrees.
    const ClusterResult oracle = brute_force_cluster(points, 2);
    CHECK(oracle.inertia == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("duplicates with k = distinct count reach zero inertia") {
    const std::vector<std::vector<double>> points = {{1, 1}, {1, 1}, {5, 5}, {5, 5}, {9, 0}};
    KmeansConfig cfg;
    cfg.k = 3;
    cfg.seed = 11;
    const ClusterResult result = kmeans(points, cfg);
    check_result_invariants(points, result, 3);
    CHECK(result.inertia == 0.0);
}

TEST_CASE("k between distinct count and n still succeeds") {
    const std::vector<std::vector<double>> points = {{1, 1}, {1, 1}, {1, 1}, {5, 5}};
    KmeansConfig cfg;
    cfg.k = 3;
    cfg.seed = 2;
    const ClusterResult result = kmeans(points, cfg);
    check_result_invariants(points, result, 3);
    CHECK(result.inertia == 0.0);
}

TEST_CASE("kmeans++ with k = n returns a permutation of the points") {
    Rng rng(4);
    const auto points = random_points(6, 2, rng);
    Rng init_rng(9);
    const auto centroids = kmeans_pp_init(points, 6, init_rng);
    REQUIRE(centroids.size() == 6);
    std::vector<std::vector<double>> sorted_points = points;
    std::vector<std::vector<double>> sorted_centroids = centroids;
    std::sort(sorted_points.begin(), sorted_points.end());
    std::sort(sorted_centroids.begin(), sorted_centroids.end());
    CHECK(sorted_points == sorted_centroids);
}

TEST_CASE("kmeans++ with k = 1 picks one of the points") {
    Rng rng(5);
    const auto points = random_points(10, 3, rng);
    Rng init_rng(1);
    const auto centroids = kmeans_pp_init(points, 1, init_rng);
    REQUIRE(centroids.size() == 1);
    CHECK(std::count(points.begin(), points.end(), centroids[0]) == 1);
}

TEST_CASE("kmeans++ is deterministic given the seed") {
    Rng rng(6);
    const auto points = random_points(20, 4, rng);
    Rng r1(77);
    Rng r2(77);
    CHECK(kmeans_pp_init(points, 5, r1) == kmeans_pp_init(points, 5, r2));
}

TEST_CASE("kmeans++ rejects k larger than the point count") {
    Rng rng(7);
    const auto points = random_points(3, 2, rng);
    Rng init_rng(0);
    CHECK_THROWS_AS(kmeans_pp_init(points, 4, init_rng), DomainError);
}

TEST_CASE("inertia is non-increasing within a Lloyd run") {
    Rng rng(8);
    for (int trial = 0; trial < 25; ++trial) {
        const auto points = random_points(30 + rng.uniform_below(30), 4, rng);
        Rng init_rng(trial);
        std::vector<double> history;
        lloyd(points, kmeans_pp_init(points, 4, init_rng), 100, 1e-12, &history);
        REQUIRE(history.size() >= 1);
        for (std::size_t i = 1; i < history.size(); ++i) {
            CHECK(history[i] <= history[i - 1] * (1.0 + 1e-12) + 1e-12);
        }
    }
}

TEST_CASE("empty clusters are repaired by donating the farthest point") {
    // The first centroid is far from every point, so its cluster starts
    // empty; repair must hand it the farthest point and the run must still
    // end with every cluster populated and inertia monotone.
    const std::vector<std::vector<double>> points = {{0, 0}, {0.5, 0}, {10, 0}, {10.5, 0}};
    std::vector<std::vector<double>> centroids = {{100, 0}, {5, 0}};
    std::vector<double> history;
    const ClusterResult result = lloyd(points, centroids, 50, 1e-12, &history);
    const auto members = result.members();
    CHECK(members[0].size() >= 1);
    CHECK(members[1].size() >= 1);
    for (std::size_t i = 1; i < history.size(); ++i) {
        CHECK(history[i] <= history[i - 1] * (1.0 + 1e-12) + 1e-12);
    }
    // The optimum for this layout pairs the two groups.
    CHECK(result.inertia == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("kmeans matches the exhaustive oracle on 50 small instances") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 4 + rng.uniform_below(5);  // 4..8
        const std::size_t k = 1 + rng.uniform_below(3);  // 1..3
        const auto points = random_points(n, 2, rng);
        KmeansConfig cfg;
        cfg.k = k;
        cfg.n_init = 20;
        cfg.seed = derive_seed(1234, static_cast<std::uint64_t>(trial));
        const ClusterResult fast = kmeans(points, cfg);
        const ClusterResult exact = brute_force_cluster(points, k);
        CHECK(fast.inertia <= exact.inertia * 1.001 + 1e-12);
        check_result_invariants(points, fast, k);
    }
}

TEST_CASE("kmeans is deterministic for identical inputs") {
    Rng rng(10);
    const auto points = random_points(25, 5, rng);
    KmeansConfig cfg;
    cfg.k = 4;
    cfg.seed = 99;
    const ClusterResult a = kmeans(points, cfg);
    const ClusterResult b = kmeans(points, cfg);
    CHECK(a.assignments == b.assignments);
    CHECK(a.centroids == b.centroids);
    CHECK(a.inertia == b.inertia);
    CHECK(a.iterations_run == b.iterations_run);
}

TEST_CASE("invalid configs are rejected") {
    Rng rng(11);
    const auto points = random_points(5, 2, rng);
    KmeansConfig cfg;
    cfg.k = 0;
    CHECK_THROWS_AS(kmeans(points, cfg), DomainError);
    cfg.k = 6;
    CHECK_THROWS_AS(kmeans(points, cfg), DomainError);
    cfg.k = 2;
    cfg.tol = 0.0;
    CHECK_THROWS_AS(kmeans(points, cfg), DomainError);
    cfg.tol = 1e-6;
    cfg.max_iters = 0;
    CHECK_THROWS_AS(kmeans(points, cfg), DomainError);
    CHECK_THROWS_AS(kmeans({}, KmeansConfig{}), DomainError);
}

TEST_CASE("brute force refuses big instances and handles the edges") {
    Rng rng(12);
    const auto big = random_points(11, 2, rng);
    CHECK_THROWS_AS(brute_force_cluster(big, 2), DomainError);
    const auto points = random_points(6, 2, rng);
    CHECK_THROWS_AS(brute_force_cluster(points, 5), DomainError);  // k > 4 limit

    const ClusterResult singletons = brute_force_cluster(random_points(4, 2, rng), 4);
    CHECK(singletons.inertia == doctest::Approx(0.0).epsilon(1e-15));

    KmeansConfig cfg;
    cfg.k = 1;
    cfg.seed = 5;
    const ClusterResult km = kmeans(points, cfg);
    const ClusterResult bf = brute_force_cluster(points, 1);
    CHECK(km.inertia == doctest::Approx(bf.inertia).epsilon(1e-12));
}
