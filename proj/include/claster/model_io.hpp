#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "claster/checkpoint.hpp"
#include "claster/common.hpp"
#include "claster/config.hpp"
#include "claster/pipeline.hpp"

namespace claster {

inline constexpr const char* kCheckpointHeader = "claster-checkpoint v1";

inline void save_model(std::ostream& out, const TrainedModel& model) {
    out << kCheckpointHeader << '\n';
    out << "[config]\n";
    for (const auto& [key, value] : config_entries(model.config)) out << key << " = " << value << '\n';
    out << "[classes]\n";
    auto join = [](const std::vector<std::string>& labels) {
        std::string s;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (i > 0) s.push_back(',');
            s += labels[i];
        }
        return s;
    };
    out << "seen = " << join(model.seen_labels) << '\n';
    out << "unseen = " << join(model.unseen_labels) << '\n';
    if (model.purity_before >= 0.0 || model.purity_after >= 0.0) {
        out << "[stats]\n";
        if (model.purity_before >= 0.0) out << "purity.before = " << format_double(model.purity_before) << '\n';
        if (model.purity_after >= 0.0) out << "purity.after = " << format_double(model.purity_after) << '\n';
    }
    out << "[tensors]\n";
    std::vector<NamedTensor> tensors;
    for (const auto& view : tensor_views(model.mapper, "mapper")) tensors.push_back(to_named_tensor(view));
    for (const auto& view : tensor_views(model.psi_mapper, "psi_mapper")) tensors.push_back(to_named_tensor(view));
    for (const auto& view : tensor_views(model.classifier, "classifier")) tensors.push_back(to_named_tensor(view));
    for (const auto& centroid : model.clusters.centroids) {
        tensors.push_back({"centroid." + std::to_string(centroid.index), {centroid.vector.size()}, centroid.vector});
    }
    for (const auto& rectified : model.unseen_rectified) {
        tensors.push_back({"rectified." + rectified.class_label, {rectified.vector.size()}, rectified.vector});
    }
    if (model.standardizer.enabled) {
        tensors.push_back({"standardizer.mean", {model.standardizer.mean.size()}, model.standardizer.mean});
        tensors.push_back({"standardizer.stddev", {model.standardizer.stddev.size()}, model.standardizer.stddev});
    }
    write_tensors(out, std::move(tensors));
}

namespace detail {

inline std::vector<std::string> split_labels(const std::string& text) {
    std::vector<std::string> labels;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, ',')) labels.push_back(token);
    return labels;
}

inline DenseLayer dense_from(const std::map<std::string, NamedTensor>& tensors, const std::string& prefix) {
    const NamedTensor& w = require_tensor(tensors, prefix + ".weights");
    const NamedTensor& b = require_tensor(tensors, prefix + ".bias");
    if (w.shape.size() != 2 || b.shape.size() != 1 || w.shape[0] != b.shape[0]) {
        throw data_error("DimensionMismatch", "bad shapes for '" + prefix + "'");
    }
    DenseLayer layer;
    layer.weights = Matrix(w.shape[0], w.shape[1]);
    layer.weights.data = w.values;
    layer.bias = b.values;
    return layer;
}

inline Conv1dLayer conv_from(const std::map<std::string, NamedTensor>& tensors, const std::string& prefix) {
    const NamedTensor& w = require_tensor(tensors, prefix + ".weights");
    const NamedTensor& b = require_tensor(tensors, prefix + ".bias");
    if (w.shape.size() != 3 || b.shape.size() != 1 || w.shape[0] != b.shape[0]) {
        throw data_error("DimensionMismatch", "bad shapes for '" + prefix + "'");
    }
    Conv1dLayer layer;
    layer.out_channels = w.shape[0];
    layer.in_channels = w.shape[1];
    layer.kernel_size = w.shape[2];
    layer.weights = w.values;
    layer.bias = b.values;
    return layer;
}

}  // namespace detail

inline TrainedModel load_model(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCheckpointHeader) {
        throw data_error("MalformedRecord", "not a claster checkpoint (bad header)");
    }
    if (!std::getline(in, line) || line != "[config]") {
        throw data_error("MalformedRecord", "expected [config] section");
    }
    TrainedModel model;
    bool saw_classes = false;
    while (std::getline(in, line)) {
        if (line == "[classes]") {
            saw_classes = true;
            break;
        }
        const std::size_t eq = line.find(" = ");
        if (eq == std::string::npos) throw data_error("MalformedRecord", "bad config line '" + line + "'");
        apply_config_entry(model.config, line.substr(0, eq), line.substr(eq + 3));
    }
    if (!saw_classes) throw data_error("MalformedRecord", "expected [classes] section");
    std::string seen_line, unseen_line;
    if (!std::getline(in, seen_line) || seen_line.rfind("seen = ", 0) != 0 || !std::getline(in, unseen_line) ||
        unseen_line.rfind("unseen = ", 0) != 0) {
        throw data_error("MalformedRecord", "expected seen/unseen class lists");
    }
    model.seen_labels = detail::split_labels(seen_line.substr(7));
    model.unseen_labels = detail::split_labels(unseen_line.substr(9));
    if (model.seen_labels.empty() || model.unseen_labels.empty()) {
        throw data_error("EmptySide", "checkpoint has an empty class list");
    }

    if (!std::getline(in, line)) throw data_error("MalformedRecord", "truncated checkpoint");
    if (line == "[stats]") {
        while (std::getline(in, line) && line != "[tensors]") {
            const std::size_t eq = line.find(" = ");
            if (eq == std::string::npos) throw data_error("MalformedRecord", "bad stats line '" + line + "'");
            double value = 0.0;
            if (!parse_double(line.substr(eq + 3), value)) {
                throw data_error("MalformedRecord", "bad stats value in '" + line + "'");
            }
            const std::string key = line.substr(0, eq);
            if (key == "purity.before") model.purity_before = value;
            else if (key == "purity.after") model.purity_after = value;
            else throw data_error("MalformedRecord", "unknown stats key '" + key + "'");
        }
    }
    if (line != "[tensors]") throw data_error("MalformedRecord", "expected [tensors] section");

    const auto tensors = read_tensors(in);
    model.mapper.layer1 = detail::dense_from(tensors, "mapper.layer1");
    model.mapper.layer2 = detail::dense_from(tensors, "mapper.layer2");
    model.psi_mapper.layer1 = detail::dense_from(tensors, "psi_mapper.layer1");
    model.psi_mapper.layer2 = detail::dense_from(tensors, "psi_mapper.layer2");
    model.classifier.conv1 = detail::conv_from(tensors, "classifier.conv1");
    model.classifier.conv2 = detail::conv_from(tensors, "classifier.conv2");
    model.classifier.fc1 = detail::dense_from(tensors, "classifier.fc1");
    model.classifier.fc2 = detail::dense_from(tensors, "classifier.fc2");
    model.d_v = model.psi_mapper.layer1.weights.cols;
    model.d_s = model.mapper.layer1.weights.cols;

    for (std::size_t j = 0;; ++j) {
        auto it = tensors.find("centroid." + std::to_string(j));
        if (it == tensors.end()) break;
        model.clusters.centroids.push_back({j, it->second.values});
    }
    model.clusters.k = model.clusters.centroids.size();
    if (model.clusters.k == 0) throw data_error("MalformedRecord", "checkpoint has no centroids");

    for (const auto& label : model.unseen_labels) {
        const NamedTensor& tensor = require_tensor(tensors, "rectified." + label);
        model.unseen_rectified.push_back({label, tensor.values, EmbeddingSource::unseen});
    }
    if (tensors.count("standardizer.mean")) {
        model.standardizer.enabled = true;
        model.standardizer.mean = require_tensor(tensors, "standardizer.mean").values;
        model.standardizer.stddev = require_tensor(tensors, "standardizer.stddev").values;
    }
    return model;
}

}  // namespace claster
