#pragma once

#include <algorithm>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "claster/common.hpp"
#include "claster/dataset.hpp"
#include "claster/evaluation.hpp"
#include "claster/inference.hpp"
#include "claster/model_io.hpp"
#include "claster/pipeline.hpp"

namespace claster {

enum class EvalMode { zsl, gzsl };

struct PredictionRecord {
    std::string instance_id;
    Route route = Route::unseen;
    std::string predicted;
    std::string truth;
};

struct EvaluationResult {
    EvalReport report;
    std::vector<PredictionRecord> predictions;
};

namespace detail {

inline VisualSemanticPoint model_point(const TrainedModel& model, const Vector& x) {
    VisualSemanticPoint psi = build_psi(model.psi_mapper, x);
    if (!model.standardizer.enabled) return psi;
    Vector joined = model.standardizer.apply(psi.joined);
    Vector visual(joined.begin(), joined.begin() + static_cast<long>(model.d_v));
    Vector semantic(joined.begin() + static_cast<long>(model.d_v), joined.end());
    return make_visual_semantic_point(std::move(visual), std::move(semantic));
}

inline ClassEmbeddingTable eval_embeddings(const TrainedModel& model, const LabeledDataset& data) {
    if (data.d_v != model.d_v) {
        throw data_error("DimensionMismatch", "checkpoint expects d_v=" + std::to_string(model.d_v) +
                                                  ", data has d_v=" + std::to_string(data.d_v));
    }
    if (data.embeddings.dim != model.d_s) {
        throw data_error("DimensionMismatch", "checkpoint expects d_s=" + std::to_string(model.d_s) +
                                                  ", data has d_s=" + std::to_string(data.embeddings.dim));
    }
    auto same = [](const std::set<std::string>& side, const std::vector<std::string>& labels) {
        return side.size() == labels.size() && std::all_of(labels.begin(), labels.end(), [&](const auto& l) {
                   return side.count(l) > 0;
               });
    };
    if (!same(data.split.seen, model.seen_labels) || !same(data.split.unseen, model.unseen_labels)) {
        throw data_error("SplitMismatch", "data split does not match the checkpoint's class sets");
    }
    ClassEmbeddingTable table = data.embeddings;
    if (model.config.normalize_embeddings) {
        for (auto& [label, values] : table.entries) {
            (void)label;
            const double n = norm(values);
            for (double& x : values) x /= n;
        }
    }
    return table;
}

inline Matrix seen_matrix(const TrainedModel& model, const ClassEmbeddingTable& table) {
    Matrix m(model.seen_labels.size(), model.d_s);
    for (std::size_t j = 0; j < model.seen_labels.size(); ++j) {
        const Vector& a = table.at(model.seen_labels[j]);
        for (std::size_t d = 0; d < model.d_s; ++d) m(j, d) = a[d];
    }
    return m;
}

}  // namespace detail

inline Vector seen_probabilities(const TrainedModel& model, const Matrix& seen_embeddings, const Vector& x) {
    const VisualSemanticPoint psi = detail::model_point(model, x);
    const ClasterRepresentation rep = claster_representation(model.clusters, psi);
    const Vector projected = classifier_forward(model.classifier, rep.omega);
    return semantic_softmax(seen_embeddings, projected);
}

// ZSL scores only the instances carrying unseen labels; GZSL scores every
// instance through the bias gate.
inline EvaluationResult evaluate_model(const TrainedModel& model, const LabeledDataset& data, EvalMode mode) {
    const ClassEmbeddingTable table = detail::eval_embeddings(model, data);
    const Matrix seen_embeddings = detail::seen_matrix(model, table);
    const GateConfig gate{model.config.gate_tau};
    const std::set<std::string> unseen_set(model.unseen_labels.begin(), model.unseen_labels.end());
    const std::set<std::string> seen_set(model.seen_labels.begin(), model.seen_labels.end());

    EvaluationResult result;
    std::vector<std::string> zsl_preds, zsl_truths;
    std::vector<std::string> seen_preds, seen_truths;
    std::vector<std::string> unseen_preds, unseen_truths;

    for (const auto& inst : data.instances) {
        const bool truth_unseen = unseen_set.count(inst.class_label) > 0;
        if (mode == EvalMode::zsl) {
            if (!truth_unseen) continue;
            const Vector probs = seen_probabilities(model, seen_embeddings, inst.features);
            const std::string predicted = zsl_predict(probs, model.seen_labels, table, model.mapper,
                                                      model.unseen_rectified, model.config.soft_query);
            zsl_preds.push_back(predicted);
            zsl_truths.push_back(inst.class_label);
            result.predictions.push_back({inst.id, Route::unseen, predicted, inst.class_label});
        } else {
            const Vector probs = seen_probabilities(model, seen_embeddings, inst.features);
            const GzslPrediction prediction = gzsl_predict(probs, gate, model.seen_labels, table, model.mapper,
                                                           model.unseen_rectified, model.config.soft_query);
            result.predictions.push_back({inst.id, prediction.route, prediction.label, inst.class_label});
            if (truth_unseen) {
                unseen_preds.push_back(prediction.label);
                unseen_truths.push_back(inst.class_label);
            } else {
                seen_preds.push_back(prediction.label);
                seen_truths.push_back(inst.class_label);
            }
        }
    }

    result.report.config_echo = config_entries(model.config);
    if (model.purity_before >= 0.0) result.report.purity_before = model.purity_before;
    if (model.purity_after >= 0.0) result.report.purity_after = model.purity_after;

    if (mode == EvalMode::zsl) {
        if (zsl_truths.empty()) throw data_error("EmptyInput", "no unseen-class instances to evaluate");
        result.report.zsl = per_class_accuracy(zsl_preds, zsl_truths, unseen_set);
        result.report.per_class = result.report.zsl->per_class;
    } else {
        if (unseen_truths.empty() || seen_truths.empty()) {
            throw data_error("EmptyInput", "gzsl evaluation needs both seen- and unseen-class instances");
        }
        const AccuracyReport unseen_report = per_class_accuracy(unseen_preds, unseen_truths, unseen_set);
        const AccuracyReport seen_report = per_class_accuracy(seen_preds, seen_truths, seen_set);
        GzslReport gzsl;
        gzsl.u = unseen_report.mean_class_accuracy;
        gzsl.s = seen_report.mean_class_accuracy;
        gzsl.H = harmonic_mean(gzsl.u, gzsl.s);
        result.report.gzsl = gzsl;
        result.report.per_class = seen_report.per_class;
        for (const auto& [label, acc] : unseen_report.per_class) result.report.per_class[label] = acc;
    }
    return result;
}

// Cluster quality of a checkpoint against labeled data: assignments of the
// inference-path points, their purity, and the per-class histogram.
inline EvalReport cluster_stats(const TrainedModel& model, const LabeledDataset& data) {
    if (data.d_v != model.d_v) {
        throw data_error("DimensionMismatch", "checkpoint and data d_v disagree");
    }
    std::vector<std::size_t> assignments;
    std::vector<std::string> labels;
    for (const auto& inst : data.instances) {
        assignments.push_back(assign(model.clusters, detail::model_point(model, inst.features).joined).first);
        labels.push_back(inst.class_label);
    }
    EvalReport report;
    report.config_echo = config_entries(model.config);
    report.purity_value = purity(assignments, labels, model.clusters.k).purity;
    if (model.purity_before >= 0.0) report.purity_before = model.purity_before;
    if (model.purity_after >= 0.0) report.purity_after = model.purity_after;
    report.histogram = cluster_histogram(assignments, labels, model.clusters.k);
    return report;
}

// Prediction dump: one line per instance, `id route predicted truth`.
inline void write_predictions(std::ostream& out, const std::vector<PredictionRecord>& predictions) {
    for (const auto& p : predictions) {
        out << p.instance_id << '\t' << (p.route == Route::seen ? "seen" : "unseen") << '\t' << p.predicted
            << '\t' << p.truth << '\n';
    }
}

}  // namespace claster
