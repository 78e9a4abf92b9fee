#pragma once

#include <algorithm>
#include <vector>

#include "claster/clustering.hpp"
#include "claster/common.hpp"
#include "claster/neural.hpp"

namespace claster {

// Joint visual-semantic point: the visual feature concatenated with its
// projection into the semantic half of the space.
struct VisualSemanticPoint {
    Vector visual_part;
    Vector semantic_part;
    Vector joined;
};

inline VisualSemanticPoint make_visual_semantic_point(Vector visual, Vector semantic) {
    VisualSemanticPoint psi;
    psi.joined = visual;
    psi.joined.insert(psi.joined.end(), semantic.begin(), semantic.end());
    psi.visual_part = std::move(visual);
    psi.semantic_part = std::move(semantic);
    return psi;
}

// psi = x ++ phi where phi is the mapped visual feature.
inline VisualSemanticPoint build_psi(const MlpParams& psi_mapper, const Vector& x) {
    return make_visual_semantic_point(x, mlp_forward(psi_mapper, x));
}

struct ClusterWeights {
    Vector distances;  // Euclidean distance to each centroid
    Vector weights;    // min-max normalized inverse distances, in [0,1]
};

// Inverse distances are capped at 1e12 (an exact centroid hit takes the cap)
// and then min-max normalized. When every distance is equal — including the
// k = 1 case — all weights are 1.
inline Vector weights_from_distances(const Vector& distances) {
    constexpr double kInverseCap = 1e12;
    if (distances.empty()) throw data_error("ShapeMismatch", "no distances to normalize");
    Vector inverses(distances.size());
    for (std::size_t j = 0; j < distances.size(); ++j) {
        if (distances[j] < 0.0 || !std::isfinite(distances[j])) {
            throw numeric_error("NonFiniteValue", "invalid distance");
        }
        inverses[j] = distances[j] == 0.0 ? kInverseCap : std::min(1.0 / distances[j], kInverseCap);
    }
    const double lo = *std::min_element(inverses.begin(), inverses.end());
    const double hi = *std::max_element(inverses.begin(), inverses.end());
    if (hi == lo) return Vector(distances.size(), 1.0);
    Vector weights(distances.size());
    for (std::size_t j = 0; j < distances.size(); ++j) weights[j] = (inverses[j] - lo) / (hi - lo);
    return weights;
}

inline ClusterWeights cluster_weights(const ClusterModel& model, const VisualSemanticPoint& psi) {
    ClusterWeights result;
    result.distances.resize(model.centroids.size());
    for (std::size_t j = 0; j < model.centroids.size(); ++j) {
        if (model.centroids[j].vector.size() != psi.joined.size()) {
            throw data_error("ShapeMismatch", "psi dimension does not match centroids");
        }
        result.distances[j] = euclidean_distance(model.centroids[j].vector, psi.joined);
    }
    result.weights = weights_from_distances(result.distances);
    return result;
}

struct ClasterRepresentation {
    VisualSemanticPoint psi;
    ClusterWeights weights;
    Vector omega;  // psi + sum_j weights[j] * centroid[j]
};

inline ClasterRepresentation claster_representation(const ClusterModel& model, const VisualSemanticPoint& psi) {
    ClasterRepresentation rep;
    rep.weights = cluster_weights(model, psi);
    rep.omega = psi.joined;
    for (std::size_t j = 0; j < model.centroids.size(); ++j) {
        const double w = rep.weights.weights[j];
        const Vector& c = model.centroids[j].vector;
        for (std::size_t d = 0; d < rep.omega.size(); ++d) rep.omega[d] += w * c[d];
    }
    rep.psi = psi;
    return rep;
}

}  // namespace claster
