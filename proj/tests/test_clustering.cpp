#include <algorithm>
#include <set>

#include "claster/clustering.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace claster;
using test_support::random_vector;

namespace {

// Exhaustive scan of every 2-partition of the points; the oracle for small
// k-means instances.
double best_two_partition_objective(const std::vector<Vector>& points) {
    const std::size_t n = points.size();
    double best = -1.0;
    for (std::size_t mask = 1; mask + 1 < (1u << n); ++mask) {
        Vector mean_a(points[0].size(), 0.0), mean_b(points[0].size(), 0.0);
        std::size_t count_a = 0, count_b = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool in_a = (mask >> i) & 1u;
            auto& mean = in_a ? mean_a : mean_b;
            (in_a ? count_a : count_b) += 1;
            for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += points[i][d];
        }
        for (double& x : mean_a) x /= static_cast<double>(count_a);
        for (double& x : mean_b) x /= static_cast<double>(count_b);
        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            objective += squared_distance(points[i], ((mask >> i) & 1u) ? mean_a : mean_b);
        }
        if (best < 0.0 || objective < best) best = objective;
    }
    return best;
}

}  // namespace

TEST_CASE("kmeans with k equal to the number of distinct points is exact") {
    std::vector<Vector> points{{0.0, 0.0}, {5.0, 0.0}, {0.0, 5.0}, {5.0, 5.0}};
    auto model = kmeans_fit(points, 4, 1);
    CHECK(kmeans_objective(model, points) == doctest::Approx(0.0));
    std::set<std::pair<double, double>> centroid_set, point_set;
    for (const auto& c : model.centroids) centroid_set.insert({c.vector[0], c.vector[1]});
    for (const auto& p : points) point_set.insert({p[0], p[1]});
    CHECK(centroid_set == point_set);
}

TEST_CASE("kmeans with k=1 returns the arithmetic mean") {
    std::vector<Vector> points{{1.0, 1.0}, {3.0, 5.0}, {5.0, 0.0}};
    auto model = kmeans_fit(points, 1, 9);
    CHECK(model.centroids[0].vector[0] == doctest::Approx(3.0));
    CHECK(model.centroids[0].vector[1] == doctest::Approx(2.0));
}

TEST_CASE("kmeans objective matches the exhaustive 2-partition optimum") {
    std::vector<Vector> points{{0.0, 0.0}, {0.5, 0.2}, {0.1, 0.4}, {4.0, 4.0}, {4.4, 3.8}, {3.9, 4.5}};
    const double oracle = best_two_partition_objective(points);
    auto model = kmeans_fit(points, 2, 3);
    CHECK(kmeans_objective(model, points) == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("kmeans handles degenerate and undersized inputs") {
    std::vector<Vector> same(5, Vector{2.0, 2.0});
    auto degenerate = kmeans_fit(same, 3, 0);
    CHECK(degenerate.degenerate_input);
    REQUIRE(degenerate.centroids.size() == 3);
    for (const auto& c : degenerate.centroids) CHECK(c.vector == Vector{2.0, 2.0});

    CHECK_THROWS_WITH_AS(kmeans_fit({{1.0}, {2.0}}, 3, 0), doctest::Contains("TooFewPoints"), Error);
    CHECK_THROWS_WITH_AS(kmeans_fit({}, 1, 0), doctest::Contains("TooFewPoints"), Error);
}

TEST_CASE("kmeans is deterministic per seed and mode") {
    std::vector<Vector> points;
    for (std::uint64_t i = 0; i < 40; ++i) points.push_back(random_vector(6, 7000 + i));
    for (auto mode : {KmeansMode::plusplus, KmeansMode::forgy, KmeansMode::random_assign}) {
        auto a = kmeans_fit(points, 5, 17, mode);
        auto b = kmeans_fit(points, 5, 17, mode);
        REQUIRE(a.centroids.size() == b.centroids.size());
        for (std::size_t j = 0; j < a.centroids.size(); ++j) {
            CHECK(a.centroids[j].vector == b.centroids[j].vector);
        }
    }
}

TEST_CASE("kmeans objective is monotone over random instances") {
    // The fit itself throws if a Lloyd iteration ever increases the
    // objective, so it is enough to fit many random instances.
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        std::vector<Vector> points;
        for (std::uint64_t i = 0; i < 25; ++i) points.push_back(random_vector(4, seed * 100 + i));
        CHECK_NOTHROW(kmeans_fit(points, 4, seed));
        CHECK_NOTHROW(kmeans_fit(points, 4, seed, KmeansMode::forgy));
    }
}

TEST_CASE("random_assign averages a random partition and repairs empty slots") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::vector<Vector> points;
        for (std::uint64_t i = 0; i < 5; ++i) points.push_back(random_vector(3, 9000 + seed * 10 + i));
        auto model = kmeans_fit(points, 4, seed, KmeansMode::random_assign);
        REQUIRE(model.centroids.size() == 4);
        for (const auto& c : model.centroids) CHECK(all_finite(c.vector));
    }
}

TEST_CASE("assign picks the nearest centroid with low-index ties") {
    ClusterModel model;
    model.k = 3;
    model.centroids = {{0, {0.0, 0.0}}, {1, {4.0, 0.0}}, {2, {0.0, 4.0}}};

    auto exact = assign(model, {0.0, 4.0});
    CHECK(exact.first == 2);
    CHECK(exact.second == doctest::Approx(0.0));

    auto tie = assign(model, {2.0, 0.0});
    CHECK(tie.first == 0);

    CHECK_THROWS_WITH_AS(assign(model, {1.0}), doctest::Contains("ShapeMismatch"), Error);
}

TEST_CASE("assign matches a linear distance scan on random inputs") {
    ClusterModel model;
    model.k = 8;
    for (std::size_t j = 0; j < 8; ++j) model.centroids.push_back({j, random_vector(5, 300 + j)});
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const Vector point = random_vector(5, 9000 + seed);
        const auto [index, distance] = assign(model, point);
        std::size_t best = 0;
        double best_d = euclidean_distance(model.centroids[0].vector, point);
        for (std::size_t j = 1; j < 8; ++j) {
            const double d = euclidean_distance(model.centroids[j].vector, point);
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        CHECK(index == best);
        CHECK(distance == doctest::Approx(best_d).epsilon(1e-12));
    }
}

TEST_CASE("purity on the documented examples") {
    CHECK(purity({0, 0, 1, 1}, {"A", "A", "B", "B"}, 2).purity == doctest::Approx(1.0));
    CHECK(purity({0, 0, 0, 1}, {"A", "A", "B", "B"}, 2).purity == doctest::Approx(0.75));
    CHECK(purity({0, 0, 1, 1}, {"A", "B", "A", "B"}, 2).purity == doctest::Approx(0.5));
    CHECK_THROWS_WITH_AS(purity({}, {}, 2), doctest::Contains("EmptyInput"), Error);
}

TEST_CASE("purity bounds and histogram consistency") {
    SeededRng rng(123);
    for (int round = 0; round < 20; ++round) {
        const std::size_t n = 30;
        const std::size_t k = 4;
        std::vector<std::size_t> assignments(n);
        std::vector<std::string> labels(n);
        std::map<std::string, std::size_t> class_sizes;
        for (std::size_t i = 0; i < n; ++i) {
            assignments[i] = rng.index(k);
            labels[i] = std::string(1, static_cast<char>('A' + rng.index(3)));
            class_sizes[labels[i]] += 1;
        }
        const auto report = purity(assignments, labels, k);
        std::size_t largest = 0;
        for (const auto& [label, size] : class_sizes) {
            (void)label;
            largest = std::max(largest, size);
        }
        CHECK(report.purity > 0.0);
        CHECK(report.purity <= 1.0);
        CHECK(report.purity >= static_cast<double>(largest) / static_cast<double>(n) - 1e-12);

        // Histogram rows sum to the class sizes, and the cluster-wise maxima
        // reproduce the purity numerator.
        std::size_t numerator = 0;
        for (std::size_t j = 0; j < k; ++j) {
            std::size_t best = 0;
            for (const auto& [label, row] : report.histogram) {
                (void)label;
                best = std::max(best, row[j]);
            }
            numerator += best;
        }
        CHECK(report.purity == doctest::Approx(static_cast<double>(numerator) / static_cast<double>(n)));
        for (const auto& [label, row] : report.histogram) {
            std::size_t total = 0;
            for (std::size_t c : row) total += c;
            CHECK(total == class_sizes.at(label));
        }
    }
}

TEST_CASE("purity is 1 exactly when every cluster is single-class") {
    CHECK(purity({0, 1, 2}, {"A", "A", "B"}, 3).purity == doctest::Approx(1.0));
    CHECK(purity({0, 0, 1}, {"A", "B", "B"}, 2).purity < 1.0);
}

TEST_CASE("cluster_histogram rows are percentages summing to 100") {
    auto rows = cluster_histogram({0, 0, 0, 1}, {"A", "A", "A", "B"}, 3);
    CHECK(rows.at("A") == std::vector<double>{100.0, 0.0, 0.0});
    CHECK(rows.at("B") == std::vector<double>{0.0, 100.0, 0.0});

    auto split_rows = cluster_histogram({0, 0, 0, 1}, {"A", "A", "A", "A"}, 2);
    CHECK(split_rows.at("A") == std::vector<double>{75.0, 25.0});

    for (const auto& [label, row] : cluster_histogram({0, 1, 1, 2, 0}, {"A", "B", "A", "B", "B"}, 3)) {
        (void)label;
        double total = 0.0;
        for (double p : row) total += p;
        CHECK(total == doctest::Approx(100.0).epsilon(1e-9));
    }
}
