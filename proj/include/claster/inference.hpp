#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "claster/common.hpp"
#include "claster/dataset.hpp"
#include "claster/neural.hpp"

namespace claster {

enum class EmbeddingSource { seen, unseen };

struct RectifiedEmbedding {
    std::string class_label;
    Vector vector;
    EmbeddingSource source = EmbeddingSource::unseen;
};

inline double cosine_similarity(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw data_error("ShapeMismatch", "cosine over different dimensions");
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) throw numeric_error("ZeroVector", "cosine undefined for a zero vector");
    return dot(a, b) / (na * nb);
}

// Shift an embedding toward its k nearest (Euclidean) neighbors among the
// seen projections, each weighted by cosine similarity to the target.
inline Vector rectify(const Vector& target, const std::vector<Vector>& seen_projected, std::size_t k_nn) {
    if (seen_projected.empty() || k_nn < 1 || k_nn > seen_projected.size()) {
        throw data_error("EmptyNeighborSet",
                         "need 1 <= k_nn <= " + std::to_string(seen_projected.size()) + ", got k_nn=" +
                             std::to_string(k_nn));
    }
    if (norm(target) == 0.0) throw numeric_error("ZeroVector", "cannot rectify a zero vector");

    std::vector<std::size_t> order(seen_projected.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return squared_distance(target, seen_projected[a]) < squared_distance(target, seen_projected[b]);
    });

    Vector rectified = target;
    for (std::size_t n = 0; n < k_nn; ++n) {
        const Vector& neighbor = seen_projected[order[n]];
        const double weight = cosine_similarity(target, neighbor) / static_cast<double>(k_nn);
        for (std::size_t d = 0; d < rectified.size(); ++d) rectified[d] += weight * neighbor[d];
    }
    return rectified;
}

// Labeled wrapper: when the target itself belongs to the seen set it is
// excluded from its own neighbor candidates.
inline RectifiedEmbedding rectify_class(const std::string& label, const Vector& projected,
                                        const std::vector<std::pair<std::string, Vector>>& seen_projected,
                                        std::size_t k_nn, EmbeddingSource source) {
    std::vector<Vector> candidates;
    for (const auto& [seen_label, vec] : seen_projected) {
        if (seen_label == label) continue;
        candidates.push_back(vec);
    }
    RectifiedEmbedding result;
    result.class_label = label;
    result.vector = rectify(projected, candidates, k_nn);
    result.source = source;
    return result;
}

struct GateConfig {
    double tau = 0.5;  // threshold on the max seen-class probability
};

enum class Route { seen, unseen };

// seen when the classifier is confident (max probability >= tau).
inline Route bias_gate(const Vector& y_hat, const GateConfig& config) {
    check_probability_vector(y_hat);
    if (!(config.tau > 0.0 && config.tau < 1.0)) {
        throw usage_error("InvalidConfigValue", "gate.tau must lie in (0,1)");
    }
    const double top = *std::max_element(y_hat.begin(), y_hat.end());
    return top >= config.tau ? Route::seen : Route::unseen;
}

// Predict an unseen class: take the argmax seen class, project its semantic
// embedding through the mapper, and pick the unseen class whose rectified
// embedding has the highest cosine similarity. Ties resolve to the
// lexicographically smallest label. With soft_query the query instead blends
// every seen projection by its predicted probability.
inline std::string zsl_predict(const Vector& y_hat, const std::vector<std::string>& seen_labels,
                               const ClassEmbeddingTable& embeddings, const MlpParams& mapper,
                               const std::vector<RectifiedEmbedding>& unseen_rectified,
                               bool soft_query = false) {
    check_probability_vector(y_hat);
    if (y_hat.size() != seen_labels.size()) {
        throw data_error("ShapeMismatch", "probability vector does not match seen label count");
    }
    if (unseen_rectified.empty()) throw data_error("EmptyUnseenSet", "no unseen classes to predict");

    Vector query;
    if (soft_query) {
        for (std::size_t j = 0; j < seen_labels.size(); ++j) {
            const Vector projected = mlp_forward(mapper, embeddings.at(seen_labels[j]));
            if (query.empty()) query.assign(projected.size(), 0.0);
            for (std::size_t d = 0; d < projected.size(); ++d) query[d] += y_hat[j] * projected[d];
        }
    } else {
        std::size_t best = 0;
        for (std::size_t j = 1; j < y_hat.size(); ++j) {
            if (y_hat[j] > y_hat[best]) best = j;
        }
        query = mlp_forward(mapper, embeddings.at(seen_labels[best]));
    }

    const std::string* best_label = nullptr;
    double best_similarity = 0.0;
    for (const auto& candidate : unseen_rectified) {
        const double similarity = cosine_similarity(query, candidate.vector);
        if (!best_label || similarity > best_similarity ||
            (similarity == best_similarity && candidate.class_label < *best_label)) {
            best_label = &candidate.class_label;
            best_similarity = similarity;
        }
    }
    return *best_label;
}

struct GzslPrediction {
    Route route = Route::seen;
    std::string label;
};

// Route through the bias gate: confident predictions keep the seen class,
// everything else falls back to the unseen nearest-neighbor search.
inline GzslPrediction gzsl_predict(const Vector& y_hat, const GateConfig& gate,
                                   const std::vector<std::string>& seen_labels,
                                   const ClassEmbeddingTable& embeddings, const MlpParams& mapper,
                                   const std::vector<RectifiedEmbedding>& unseen_rectified,
                                   bool soft_query = false) {
    GzslPrediction prediction;
    prediction.route = bias_gate(y_hat, gate);
    if (prediction.route == Route::seen) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < y_hat.size(); ++j) {
            if (y_hat[j] > y_hat[best]) best = j;
        }
        prediction.label = seen_labels[best];
    } else {
        prediction.label = zsl_predict(y_hat, seen_labels, embeddings, mapper, unseen_rectified, soft_query);
    }
    return prediction;
}

}  // namespace claster
