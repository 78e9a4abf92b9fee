#pragma once

#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "claster/clustering.hpp"
#include "claster/common.hpp"
#include "claster/neural.hpp"
#include "claster/reinforce.hpp"

namespace claster {

enum class AblationMode { full, no_clustering, random_clustering, kmeans_only };

struct PipelineConfig {
    std::size_t k_clusters = 6;
    std::size_t mapper_epochs = 50;
    std::size_t classifier_epochs = 50;
    std::size_t batch_size = 32;
    AdamConfig adam;        // lr 1e-4, weight decay 5e-4
    double lambda = 1e-4;   // Frobenius regularizer weight
    RLConfig rl;
    std::size_t rectify_k = 5;
    double gate_tau = 0.5;
    std::uint64_t seed = 0;
    AblationMode ablation_mode = AblationMode::full;
    std::size_t hidden = 32;  // hidden width of the two mapping networks and the classifier dense layer
    std::size_t classifier_kernel_size = 3;
    std::size_t classifier_hidden_channels = 4;
    std::size_t alternations = 1;  // classifier-then-RL cycles
    bool soft_query = false;
    KmeansMode kmeans_init = KmeansMode::plusplus;
    bool standardize_clustering = false;
    bool normalize_embeddings = false;
};

inline std::string ablation_mode_name(AblationMode mode) {
    switch (mode) {
        case AblationMode::full: return "full";
        case AblationMode::no_clustering: return "no_clustering";
        case AblationMode::random_clustering: return "random_clustering";
        case AblationMode::kmeans_only: return "kmeans_only";
    }
    return "full";
}

inline std::string kmeans_init_name(KmeansMode mode) {
    switch (mode) {
        case KmeansMode::plusplus: return "plusplus";
        case KmeansMode::forgy: return "forgy";
        case KmeansMode::random_assign: return "random_assign";
    }
    return "plusplus";
}

inline std::string schedule_text(const RLConfig& rl) {
    std::string out;
    for (std::size_t i = 0; i < rl.schedule.size(); ++i) {
        if (i > 0) out.push_back(',');
        out += format_double(rl.schedule[i].alpha) + "@" + std::to_string(rl.schedule[i].start);
    }
    return out;
}

namespace detail {

inline std::size_t parse_size(const std::string& key, const std::string& value) {
    std::size_t out = 0;
    std::stringstream ss(value);
    ss >> out;
    if (ss.fail() || !ss.eof()) throw usage_error("InvalidConfigValue", key + " = " + value);
    return out;
}

inline double parse_config_double(const std::string& key, const std::string& value) {
    double out = 0.0;
    if (!parse_double(value, out)) throw usage_error("InvalidConfigValue", key + " = " + value);
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw usage_error("InvalidConfigValue", key + " must be true or false");
}

inline std::vector<ScheduleSegment> parse_schedule(const std::string& value) {
    std::vector<ScheduleSegment> schedule;
    std::stringstream ss(value);
    std::string token;
    while (std::getline(ss, token, ',')) {
        const std::size_t at = token.find('@');
        if (at == std::string::npos) {
            throw usage_error("InvalidConfigValue", "rl.schedule entries must look like alpha@start");
        }
        ScheduleSegment segment;
        if (!parse_double(token.substr(0, at), segment.alpha)) {
            throw usage_error("InvalidConfigValue", "bad rl.schedule rate '" + token + "'");
        }
        segment.start = parse_size("rl.schedule", token.substr(at + 1));
        schedule.push_back(segment);
    }
    if (schedule.empty()) throw usage_error("InvalidConfigValue", "rl.schedule is empty");
    return schedule;
}

}  // namespace detail

// Applies one `key = value` setting; unknown keys and bad values are usage
// errors that name the offending key.
inline void apply_config_entry(PipelineConfig& config, const std::string& key, const std::string& value) {
    if (key == "k_clusters") {
        config.k_clusters = detail::parse_size(key, value);
        if (config.k_clusters < 1) throw usage_error("InvalidConfigValue", "k_clusters must be >= 1");
    } else if (key == "mapper_epochs") {
        config.mapper_epochs = detail::parse_size(key, value);
    } else if (key == "classifier_epochs") {
        config.classifier_epochs = detail::parse_size(key, value);
    } else if (key == "batch_size") {
        config.batch_size = detail::parse_size(key, value);
        if (config.batch_size < 1) throw usage_error("InvalidConfigValue", "batch_size must be >= 1");
    } else if (key == "adam.lr") {
        config.adam.lr = detail::parse_config_double(key, value);
        if (config.adam.lr <= 0.0) throw usage_error("InvalidConfigValue", "adam.lr must be positive");
    } else if (key == "adam.weight_decay") {
        config.adam.weight_decay = detail::parse_config_double(key, value);
        if (config.adam.weight_decay < 0.0) throw usage_error("InvalidConfigValue", "adam.weight_decay must be >= 0");
    } else if (key == "lambda") {
        config.lambda = detail::parse_config_double(key, value);
        if (config.lambda < 0.0) throw usage_error("InvalidConfigValue", "lambda must be >= 0");
    } else if (key == "rl.total_iterations") {
        config.rl.total_iterations = detail::parse_size(key, value);
        if (config.rl.total_iterations < 1) throw usage_error("InvalidConfigValue", "rl.total_iterations must be >= 1");
    } else if (key == "rl.schedule") {
        config.rl.schedule = detail::parse_schedule(value);
        validate_schedule(config.rl);
    } else if (key == "rectify_k") {
        config.rectify_k = detail::parse_size(key, value);
        if (config.rectify_k < 1) throw usage_error("InvalidConfigValue", "rectify_k must be >= 1");
    } else if (key == "gate.tau") {
        config.gate_tau = detail::parse_config_double(key, value);
        if (!(config.gate_tau > 0.0 && config.gate_tau < 1.0)) {
            throw usage_error("InvalidConfigValue", "gate.tau must lie in (0,1)");
        }
    } else if (key == "seed") {
        std::stringstream ss(value);
        ss >> config.seed;
        if (ss.fail() || !ss.eof()) throw usage_error("InvalidConfigValue", "seed = " + value);
    } else if (key == "ablation_mode") {
        if (value == "full") config.ablation_mode = AblationMode::full;
        else if (value == "no_clustering") config.ablation_mode = AblationMode::no_clustering;
        else if (value == "random_clustering") config.ablation_mode = AblationMode::random_clustering;
        else if (value == "kmeans_only") config.ablation_mode = AblationMode::kmeans_only;
        else throw usage_error("InvalidConfigValue", "unknown ablation_mode '" + value + "'");
    } else if (key == "dims") {
        config.hidden = detail::parse_size(key, value);
        if (config.hidden < 1) throw usage_error("InvalidConfigValue", "dims must be >= 1");
    } else if (key == "classifier.kernel_size") {
        config.classifier_kernel_size = detail::parse_size(key, value);
        if (config.classifier_kernel_size % 2 == 0 || config.classifier_kernel_size < 1) {
            throw usage_error("InvalidConfigValue", "classifier.kernel_size must be odd");
        }
    } else if (key == "classifier.hidden_channels") {
        config.classifier_hidden_channels = detail::parse_size(key, value);
        if (config.classifier_hidden_channels < 1) {
            throw usage_error("InvalidConfigValue", "classifier.hidden_channels must be >= 1");
        }
    } else if (key == "alternations") {
        config.alternations = detail::parse_size(key, value);
        if (config.alternations < 1) throw usage_error("InvalidConfigValue", "alternations must be >= 1");
    } else if (key == "soft_query") {
        config.soft_query = detail::parse_bool(key, value);
    } else if (key == "kmeans_init") {
        if (value == "plusplus") config.kmeans_init = KmeansMode::plusplus;
        else if (value == "forgy") config.kmeans_init = KmeansMode::forgy;
        else throw usage_error("InvalidConfigValue", "kmeans_init must be plusplus or forgy");
    } else if (key == "standardize_clustering") {
        config.standardize_clustering = detail::parse_bool(key, value);
    } else if (key == "normalize_embeddings") {
        config.normalize_embeddings = detail::parse_bool(key, value);
    } else {
        throw usage_error("UnknownConfigKey", "unknown config key '" + key + "'");
    }
}

// Config file: `key = value` lines; # comments and blank lines are ignored.
inline PipelineConfig load_config(std::istream& in) {
    PipelineConfig config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        const std::size_t begin = trimmed.find_first_not_of(" \t");
        if (begin == std::string::npos) continue;
        trimmed = trimmed.substr(begin);
        if (trimmed[0] == '#') continue;
        const std::size_t eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw usage_error("InvalidConfigValue", "line " + std::to_string(line_no) + ": expected key = value");
        }
        auto strip = [](std::string s) {
            const std::size_t a = s.find_first_not_of(" \t");
            const std::size_t b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        apply_config_entry(config, strip(trimmed.substr(0, eq)), strip(trimmed.substr(eq + 1)));
    }
    return config;
}

// Canonical ordered echo of every key; parsing this list back reproduces the
// exact configuration.
inline std::vector<std::pair<std::string, std::string>> config_entries(const PipelineConfig& config) {
    return {
        {"k_clusters", std::to_string(config.k_clusters)},
        {"mapper_epochs", std::to_string(config.mapper_epochs)},
        {"classifier_epochs", std::to_string(config.classifier_epochs)},
        {"batch_size", std::to_string(config.batch_size)},
        {"adam.lr", format_double(config.adam.lr)},
        {"adam.weight_decay", format_double(config.adam.weight_decay)},
        {"lambda", format_double(config.lambda)},
        {"rl.total_iterations", std::to_string(config.rl.total_iterations)},
        {"rl.schedule", schedule_text(config.rl)},
        {"rectify_k", std::to_string(config.rectify_k)},
        {"gate.tau", format_double(config.gate_tau)},
        {"seed", std::to_string(config.seed)},
        {"ablation_mode", ablation_mode_name(config.ablation_mode)},
        {"dims", std::to_string(config.hidden)},
        {"classifier.kernel_size", std::to_string(config.classifier_kernel_size)},
        {"classifier.hidden_channels", std::to_string(config.classifier_hidden_channels)},
        {"alternations", std::to_string(config.alternations)},
        {"soft_query", config.soft_query ? "true" : "false"},
        {"kmeans_init", kmeans_init_name(config.kmeans_init)},
        {"standardize_clustering", config.standardize_clustering ? "true" : "false"},
        {"normalize_embeddings", config.normalize_embeddings ? "true" : "false"},
    };
}

}  // namespace claster
