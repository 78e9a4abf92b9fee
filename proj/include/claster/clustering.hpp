#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "claster/common.hpp"

namespace claster {

enum class KmeansMode { plusplus, forgy, random_assign };

struct Centroid {
    std::size_t index = 0;
    Vector vector;
};

struct ClusterModel {
    std::vector<Centroid> centroids;
    std::size_t k = 0;
    bool degenerate_input = false;  // all points identical with k > 1
    std::size_t iterations_run = 0;
    std::vector<std::size_t> fit_assignments;  // final partition of the fit points; not serialized
};

// Index and Euclidean distance of the nearest centroid; ties go to the
// lowest index.
inline std::pair<std::size_t, double> assign(const ClusterModel& model, const Vector& point) {
    if (model.centroids.empty()) throw data_error("ShapeMismatch", "assign on an empty cluster model");
    std::size_t best = 0;
    double best_sq = -1.0;
    for (std::size_t j = 0; j < model.centroids.size(); ++j) {
        if (model.centroids[j].vector.size() != point.size()) {
            throw data_error("ShapeMismatch", "point dimension does not match centroids");
        }
        const double d = squared_distance(model.centroids[j].vector, point);
        if (best_sq < 0.0 || d < best_sq) {
            best_sq = d;
            best = j;
        }
    }
    return {best, std::sqrt(best_sq)};
}

inline double kmeans_objective(const ClusterModel& model, const std::vector<Vector>& points) {
    double total = 0.0;
    for (const auto& p : points) {
        const auto [j, d] = assign(model, p);
        (void)j;
        total += d * d;
    }
    return total;
}

namespace detail {

inline std::vector<Vector> init_plusplus(const std::vector<Vector>& points, std::size_t k, SeededRng& rng) {
    std::vector<Vector> centers;
    centers.push_back(points[rng.index(points.size())]);
    Vector best_sq(points.size());
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            double d = squared_distance(points[i], centers[0]);
            for (std::size_t c = 1; c < centers.size(); ++c) {
                d = std::min(d, squared_distance(points[i], centers[c]));
            }
            best_sq[i] = d;
            total += d;
        }
        if (total <= 0.0) {
            centers.push_back(points[rng.index(points.size())]);
            continue;
        }
        double target = rng.uniform01() * total;
        std::size_t chosen = points.size() - 1;
        for (std::size_t i = 0; i < points.size(); ++i) {
            target -= best_sq[i];
            if (target <= 0.0) {
                chosen = i;
                break;
            }
        }
        centers.push_back(points[chosen]);
    }
    return centers;
}

inline std::vector<Vector> init_forgy(const std::vector<Vector>& points, std::size_t k, SeededRng& rng) {
    std::vector<std::size_t> order(points.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<Vector> centers;
    for (std::size_t j = 0; j < k; ++j) centers.push_back(points[order[j]]);
    return centers;
}

// Re-seed each empty cluster from the point currently farthest from its own
// centroid; the farthest point moves to the empty slot, which can only lower
// the objective.
inline void repair_empty_clusters(std::vector<Vector>& centers, std::vector<std::size_t>& counts,
                                  const std::vector<Vector>& points, const std::vector<std::size_t>& assignment) {
    std::vector<bool> taken(points.size(), false);
    for (std::size_t j = 0; j < centers.size(); ++j) {
        if (counts[j] > 0) continue;
        double far_d = -1.0;
        std::size_t far_i = 0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (taken[i]) continue;
            const double d = squared_distance(points[i], centers[assignment[i]]);
            if (d > far_d) {
                far_d = d;
                far_i = i;
            }
        }
        centers[j] = points[far_i];
        taken[far_i] = true;
        counts[j] = 1;
    }
}

}  // namespace detail

// Lloyd k-means over the given points. Runs to an assignment fixpoint or 300
// iterations; random_assign skips Lloyd entirely and averages a random
// partition. Deterministic for a fixed seed.
inline ClusterModel kmeans_fit(const std::vector<Vector>& points, std::size_t k, std::uint64_t seed,
                               KmeansMode mode = KmeansMode::plusplus) {
    if (k < 1) throw data_error("TooFewPoints", "k must be >= 1");
    if (points.empty() || points.size() < k) {
        throw data_error("TooFewPoints",
                         "need at least k=" + std::to_string(k) + " points, got " + std::to_string(points.size()));
    }
    const std::size_t dim = points.front().size();
    for (const auto& p : points) {
        if (p.size() != dim) throw data_error("ShapeMismatch", "points have inconsistent dimensions");
        if (!all_finite(p)) throw numeric_error("NonFiniteValue", "non-finite point passed to kmeans_fit");
    }

    ClusterModel model;
    model.k = k;

    bool all_identical = true;
    for (const auto& p : points) {
        if (p != points.front()) {
            all_identical = false;
            break;
        }
    }
    if (all_identical && k > 1) {
        for (std::size_t j = 0; j < k; ++j) model.centroids.push_back({j, points.front()});
        model.degenerate_input = true;
        model.fit_assignments.assign(points.size(), 0);
        return model;
    }

    SeededRng rng(seed);
    std::vector<Vector> centers;
    std::vector<std::size_t> assignment(points.size(), 0);

    if (mode == KmeansMode::random_assign) {
        centers.assign(k, Vector(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            assignment[i] = rng.index(k);
            counts[assignment[i]] += 1;
            for (std::size_t d = 0; d < dim; ++d) centers[assignment[i]][d] += points[i][d];
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] > 0) {
                for (double& x : centers[j]) x /= static_cast<double>(counts[j]);
            }
        }
        detail::repair_empty_clusters(centers, counts, points, assignment);
        for (std::size_t j = 0; j < k; ++j) model.centroids.push_back({j, std::move(centers[j])});
        model.fit_assignments = std::move(assignment);
        return model;
    }

    centers = (mode == KmeansMode::forgy) ? detail::init_forgy(points, k, rng)
                                          : detail::init_plusplus(points, k, rng);

    double prev_objective = -1.0;
    for (std::size_t iter = 0; iter < 300; ++iter) {
        bool changed = iter == 0;
        double objective = 0.0;
        ClusterModel scratch;
        scratch.k = k;
        for (std::size_t j = 0; j < k; ++j) scratch.centroids.push_back({j, centers[j]});
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto [j, d] = assign(scratch, points[i]);
            objective += d * d;
            if (assignment[i] != j) {
                assignment[i] = j;
                changed = true;
            }
        }
        if (prev_objective >= 0.0 && objective > prev_objective * (1.0 + 1e-12) + 1e-12) {
            throw numeric_error("ObjectiveIncrease", "k-means objective increased between iterations");
        }
        prev_objective = objective;
        model.iterations_run = iter + 1;
        if (!changed) break;

        std::vector<std::size_t> counts(k, 0);
        std::vector<Vector> sums(k, Vector(dim, 0.0));
        for (std::size_t i = 0; i < points.size(); ++i) {
            counts[assignment[i]] += 1;
            for (std::size_t d = 0; d < dim; ++d) sums[assignment[i]][d] += points[i][d];
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] > 0) {
                for (std::size_t d = 0; d < dim; ++d) centers[j][d] = sums[j][d] / static_cast<double>(counts[j]);
            }
        }
        detail::repair_empty_clusters(centers, counts, points, assignment);
    }

    for (std::size_t j = 0; j < k; ++j) model.centroids.push_back({j, std::move(centers[j])});
    return model;
}

struct PurityReport {
    double purity = 0.0;
    std::map<std::string, std::vector<std::size_t>> histogram;  // label -> count per cluster
    std::size_t n_points = 0;
};

// Purity = (1/N) * sum over clusters of the count of the dominant class.
inline PurityReport purity(const std::vector<std::size_t>& assignments, const std::vector<std::string>& labels,
                           std::size_t k) {
    if (assignments.empty() || assignments.size() != labels.size()) {
        throw data_error("EmptyInput", "purity requires equal non-empty assignment/label sequences");
    }
    PurityReport report;
    report.n_points = assignments.size();
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] >= k) throw data_error("ShapeMismatch", "cluster index out of range");
        auto& row = report.histogram[labels[i]];
        if (row.empty()) row.assign(k, 0);
        row[assignments[i]] += 1;
    }
    std::size_t dominant_total = 0;
    for (std::size_t j = 0; j < k; ++j) {
        std::size_t best = 0;
        for (const auto& [label, row] : report.histogram) {
            (void)label;
            best = std::max(best, row[j]);
        }
        dominant_total += best;
    }
    report.purity = static_cast<double>(dominant_total) / static_cast<double>(report.n_points);
    return report;
}

// Per-class distribution over clusters, as percentages summing to 100 per row.
inline std::map<std::string, std::vector<double>> cluster_histogram(const std::vector<std::size_t>& assignments,
                                                                    const std::vector<std::string>& labels,
                                                                    std::size_t k) {
    const PurityReport report = purity(assignments, labels, k);
    std::map<std::string, std::vector<double>> rows;
    for (const auto& [label, counts] : report.histogram) {
        std::size_t total = 0;
        for (std::size_t c : counts) total += c;
        std::vector<double> row(k, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            row[j] = 100.0 * static_cast<double>(counts[j]) / static_cast<double>(total);
        }
        rows.emplace(label, std::move(row));
    }
    return rows;
}

}  // namespace claster
