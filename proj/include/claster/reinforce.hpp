#pragma once

#include <cmath>
#include <vector>

#include "claster/common.hpp"
#include "claster/neural.hpp"

namespace claster {

struct ScheduleSegment {
    std::size_t start = 0;  // first iteration this rate applies to
    double alpha = 0.0;
};

struct RLConfig {
    std::size_t total_iterations = 10000;
    std::vector<ScheduleSegment> schedule = {{0, 0.1}, {1000, 0.01}, {2000, 0.001}};
    double baseline = 0.0;  // beta_j, fixed at zero
};

// +1 when the predicted class index matches the truth, -1 otherwise.
// Argmax ties resolve to the lowest index.
inline int reward(const Vector& y_hat, std::size_t true_index) {
    check_probability_vector(y_hat);
    if (true_index >= y_hat.size()) throw data_error("ShapeMismatch", "true index out of range");
    std::size_t best = 0;
    for (std::size_t j = 1; j < y_hat.size(); ++j) {
        if (y_hat[j] > y_hat[best]) best = j;
    }
    return best == true_index ? 1 : -1;
}

// Dot product of the one-hot truth with the prediction: the probability the
// model placed on the correct class.
inline double classification_score(const Vector& y_hat, std::size_t true_index) {
    check_probability_vector(y_hat);
    if (true_index >= y_hat.size()) throw data_error("ShapeMismatch", "true index out of range");
    return y_hat[true_index];
}

// p = 2 * (1 - logistic(eta)) for the weight of the matched cluster.
inline double match_probability(double eta_closest) {
    return 2.0 * (1.0 - 1.0 / (1.0 + std::exp(-eta_closest)));
}

// Centroid increment alpha * r * (z - p) * (psi - c); applied by the caller
// to the single closest centroid.
inline Vector centroid_update(double alpha, int r, double z, double p, const Vector& psi_joined,
                              const Vector& centroid) {
    if (alpha <= 0.0) throw data_error("ShapeMismatch", "alpha must be positive");
    if (r != 1 && r != -1) throw data_error("ShapeMismatch", "reward must be +1 or -1");
    if (psi_joined.size() != centroid.size()) {
        throw data_error("ShapeMismatch", "psi and centroid dimensions differ");
    }
    const double scale = alpha * static_cast<double>(r) * (z - p);
    Vector delta(psi_joined.size());
    for (std::size_t d = 0; d < delta.size(); ++d) delta[d] = scale * (psi_joined[d] - centroid[d]);
    return delta;
}

inline void validate_schedule(const RLConfig& config) {
    if (config.total_iterations < 1) throw usage_error("InvalidConfigValue", "rl.total_iterations must be >= 1");
    if (config.schedule.empty() || config.schedule.front().start != 0) {
        throw usage_error("InvalidConfigValue", "rl.schedule must start at iteration 0");
    }
    for (std::size_t i = 0; i < config.schedule.size(); ++i) {
        if (config.schedule[i].alpha <= 0.0) {
            throw usage_error("InvalidConfigValue", "rl.schedule rates must be positive");
        }
        if (i > 0 && config.schedule[i].start <= config.schedule[i - 1].start) {
            throw usage_error("InvalidConfigValue", "rl.schedule starts must be strictly increasing");
        }
    }
}

// Piecewise-constant learning rate for the given iteration.
inline double schedule_alpha(const RLConfig& config, std::size_t iteration) {
    validate_schedule(config);
    if (iteration >= config.total_iterations) {
        throw usage_error("OutOfRange", "iteration " + std::to_string(iteration) + " outside [0, " +
                                            std::to_string(config.total_iterations) + ")");
    }
    double alpha = config.schedule.front().alpha;
    for (const auto& segment : config.schedule) {
        if (segment.start <= iteration) alpha = segment.alpha;
    }
    return alpha;
}

}  // namespace claster
