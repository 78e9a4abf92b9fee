#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "claster/clustering.hpp"
#include "claster/common.hpp"
#include "claster/config.hpp"
#include "claster/dataset.hpp"
#include "claster/inference.hpp"
#include "claster/neural.hpp"
#include "claster/reinforce.hpp"
#include "claster/representation.hpp"

namespace claster {

// Optional z-scoring of the joint visual-semantic space. Fit on the training
// points; every later point passes through the same transform.
struct Standardizer {
    bool enabled = false;
    Vector mean;
    Vector stddev;

    Vector apply(const Vector& v) const {
        if (!enabled) return v;
        Vector out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean[i]) / stddev[i];
        return out;
    }
};

struct TrainedModel {
    PipelineConfig config;
    std::size_t d_v = 0;
    std::size_t d_s = 0;
    std::vector<std::string> seen_labels;    // sorted; row order of the softmax
    std::vector<std::string> unseen_labels;  // sorted
    MlpParams mapper;      // semantic -> visual
    MlpParams psi_mapper;  // visual -> semantic half of psi
    ClassifierParams classifier;
    ClusterModel clusters;
    Standardizer standardizer;
    std::vector<RectifiedEmbedding> unseen_rectified;  // sorted by label
    double purity_before = -1.0;  // negative when the RL phase did not run
    double purity_after = -1.0;
};

struct RLTraceEntry {
    std::size_t iteration = 0;
    double alpha = 0.0;
    double reward_mean = 0.0;  // mean reward since the previous entry
    double purity = 0.0;
};

namespace detail {

inline DenseLayer glorot_dense(std::size_t out, std::size_t in, SeededRng& rng) {
    DenseLayer layer;
    layer.weights = Matrix(out, in);
    layer.bias.assign(out, 0.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& w : layer.weights.data) w = rng.uniform(-limit, limit);
    return layer;
}

inline Conv1dLayer glorot_conv(std::size_t out_ch, std::size_t in_ch, std::size_t kernel, SeededRng& rng) {
    Conv1dLayer layer;
    layer.in_channels = in_ch;
    layer.out_channels = out_ch;
    layer.kernel_size = kernel;
    layer.weights.assign(out_ch * in_ch * kernel, 0.0);
    layer.bias.assign(out_ch, 0.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(in_ch * kernel + out_ch * kernel));
    for (double& w : layer.weights) w = rng.uniform(-limit, limit);
    return layer;
}

template <class Params>
inline void scale_tensors(Params& grads, double factor) {
    for (auto& view : tensor_views(grads, "g")) {
        for (double& x : *view.values) x *= factor;
    }
}

template <class Params>
inline void accumulate_tensors(Params& total, const Params& part) {
    auto dst = tensor_views(total, "t");
    auto src = tensor_views(part, "t");
    for (std::size_t i = 0; i < dst.size(); ++i) {
        for (std::size_t j = 0; j < dst[i].values->size(); ++j) {
            (*dst[i].values)[j] += (*src[i].values)[j];
        }
    }
}

// Gradient of lambda * ||W||_F^2 over the weight matrices (biases excluded).
inline void add_frobenius_gradient(MlpParams& grads, const MlpParams& params, double lambda) {
    for (std::size_t i = 0; i < grads.layer1.weights.data.size(); ++i) {
        grads.layer1.weights.data[i] += 2.0 * lambda * params.layer1.weights.data[i];
    }
    for (std::size_t i = 0; i < grads.layer2.weights.data.size(); ++i) {
        grads.layer2.weights.data[i] += 2.0 * lambda * params.layer2.weights.data[i];
    }
}

inline void add_frobenius_gradient(ClassifierParams& grads, const ClassifierParams& params, double lambda) {
    for (std::size_t i = 0; i < grads.conv1.weights.size(); ++i) {
        grads.conv1.weights[i] += 2.0 * lambda * params.conv1.weights[i];
    }
    for (std::size_t i = 0; i < grads.conv2.weights.size(); ++i) {
        grads.conv2.weights[i] += 2.0 * lambda * params.conv2.weights[i];
    }
    for (std::size_t i = 0; i < grads.fc1.weights.data.size(); ++i) {
        grads.fc1.weights.data[i] += 2.0 * lambda * params.fc1.weights.data[i];
    }
    for (std::size_t i = 0; i < grads.fc2.weights.data.size(); ++i) {
        grads.fc2.weights.data[i] += 2.0 * lambda * params.fc2.weights.data[i];
    }
}

template <class Params>
inline Params zero_like(const Params& params) {
    Params zero = params;
    for (auto& view : tensor_views(zero, "z")) {
        for (double& x : *view.values) x = 0.0;
    }
    return zero;
}

}  // namespace detail

// Training orchestration. Phases must run in order: mapper, clusters,
// classifier, centroid optimization (full mode only), finalize. The classifier
// and RL phases may alternate when config.alternations > 1.
class Pipeline {
public:
    Pipeline(LabeledDataset dataset, PipelineConfig config)
        : dataset_(std::move(dataset)), config_(std::move(config)) {
        if (config_.normalize_embeddings) {
            for (auto& [label, values] : dataset_.embeddings.entries) {
                (void)label;
                const double n = norm(values);
                for (double& x : values) x /= n;
            }
        }
        for (const auto& label : dataset_.split.seen) seen_labels_.push_back(label);
        for (const auto& label : dataset_.split.unseen) unseen_labels_.push_back(label);
        for (std::size_t j = 0; j < seen_labels_.size(); ++j) seen_index_[seen_labels_[j]] = j;
        for (std::size_t i = 0; i < dataset_.instances.size(); ++i) {
            if (dataset_.split.seen.count(dataset_.instances[i].class_label)) train_indices_.push_back(i);
        }
        if (train_indices_.empty()) throw data_error("NoSeenInstances", "no seen-class instances to train on");
        d_v_ = dataset_.d_v;
        d_s_ = dataset_.embeddings.dim;

        seen_embeddings_ = Matrix(seen_labels_.size(), d_s_);
        for (std::size_t j = 0; j < seen_labels_.size(); ++j) {
            const Vector& a = dataset_.embeddings.at(seen_labels_[j]);
            for (std::size_t d = 0; d < d_s_; ++d) seen_embeddings_(j, d) = a[d];
        }

        SeededRng mapper_rng(derive_seed(config_.seed, 10));
        mapper_.layer1 = detail::glorot_dense(config_.hidden, d_s_, mapper_rng);
        mapper_.layer2 = detail::glorot_dense(d_v_, config_.hidden, mapper_rng);
        SeededRng psi_rng(derive_seed(config_.seed, 11));
        psi_mapper_.layer1 = detail::glorot_dense(config_.hidden, d_v_, psi_rng);
        psi_mapper_.layer2 = detail::glorot_dense(d_v_, config_.hidden, psi_rng);
        SeededRng cls_rng(derive_seed(config_.seed, 12));
        const std::size_t channels = config_.classifier_hidden_channels;
        classifier_.conv1 = detail::glorot_conv(channels, 1, config_.classifier_kernel_size, cls_rng);
        classifier_.conv2 = detail::glorot_conv(channels, channels, config_.classifier_kernel_size, cls_rng);
        classifier_.fc1 = detail::glorot_dense(config_.hidden, channels * 2 * d_v_, cls_rng);
        classifier_.fc2 = detail::glorot_dense(d_s_, config_.hidden, cls_rng);

        mapper_adam_.config = config_.adam;
        psi_adam_.config = config_.adam;
        classifier_adam_.config = config_.adam;
    }

    // Fits the semantic-to-visual mapper with the least-squares embedding
    // loss; the mapper stays frozen afterwards. Returns the per-epoch loss.
    std::vector<double> train_mapper() {
        require_phase(Phase::constructed, "train_mapper");
        SeededRng order_rng(derive_seed(config_.seed, 20));
        std::vector<double> epoch_losses;
        for (std::size_t epoch = 0; epoch < config_.mapper_epochs; ++epoch) {
            std::vector<std::size_t> order = train_indices_;
            order_rng.shuffle(order);
            double loss_sum = 0.0;
            for (std::size_t begin = 0; begin < order.size(); begin += config_.batch_size) {
                const std::size_t end = std::min(order.size(), begin + config_.batch_size);
                MlpParams grads = detail::zero_like(mapper_);
                for (std::size_t pos = begin; pos < end; ++pos) {
                    const Instance& inst = dataset_.instances[order[pos]];
                    const Vector& a = dataset_.embeddings.at(inst.class_label);
                    const Vector predicted = mlp_forward(mapper_, a);
                    auto [loss, grad] = least_squares_loss(predicted, inst.features);
                    loss_sum += loss;
                    detail::accumulate_tensors(grads, mlp_gradient(mapper_, a, grad).grads);
                }
                detail::scale_tensors(grads, 1.0 / static_cast<double>(end - begin));
                adam_step(mapper_adam_, mapper_, grads);
            }
            epoch_losses.push_back(loss_sum / static_cast<double>(order.size()));
        }
        phase_ = Phase::mapper_trained;
        return epoch_losses;
    }

    // Clusters the joint points x ++ a'(y) built from ground-truth class
    // embeddings. no_clustering forces k = 1; random_clustering averages a
    // random partition.
    void init_clusters() {
        require_phase(Phase::mapper_trained, "init_clusters");
        std::vector<Vector> points;
        points.reserve(train_indices_.size());
        for (std::size_t idx : train_indices_) {
            const Instance& inst = dataset_.instances[idx];
            Vector joined = inst.features;
            const Vector projected = mlp_forward(mapper_, dataset_.embeddings.at(inst.class_label));
            joined.insert(joined.end(), projected.begin(), projected.end());
            points.push_back(std::move(joined));
        }
        if (config_.standardize_clustering) {
            standardizer_.enabled = true;
            standardizer_.mean.assign(2 * d_v_, 0.0);
            standardizer_.stddev.assign(2 * d_v_, 0.0);
            for (const auto& p : points) {
                for (std::size_t d = 0; d < p.size(); ++d) standardizer_.mean[d] += p[d];
            }
            for (double& m : standardizer_.mean) m /= static_cast<double>(points.size());
            for (const auto& p : points) {
                for (std::size_t d = 0; d < p.size(); ++d) {
                    const double c = p[d] - standardizer_.mean[d];
                    standardizer_.stddev[d] += c * c;
                }
            }
            for (double& s : standardizer_.stddev) {
                s = std::sqrt(s / static_cast<double>(points.size()));
                if (s < 1e-12) s = 1.0;
            }
            for (auto& p : points) p = standardizer_.apply(p);
        }

        std::size_t k = config_.k_clusters;
        KmeansMode mode = config_.kmeans_init;
        if (config_.ablation_mode == AblationMode::no_clustering) {
            k = 1;
        } else if (config_.ablation_mode == AblationMode::random_clustering) {
            mode = KmeansMode::random_assign;
        }
        clusters_ = kmeans_fit(points, k, derive_seed(config_.seed, 21), mode);
        phase_ = Phase::clusters_ready;
    }

    // Minibatch training of the psi mapper and classifier head against the
    // semantic softmax loss. Centroids and the cluster weights are held
    // constant here; only the RL phase moves centroids.
    std::vector<double> train_classifier() {
        if (phase_ != Phase::clusters_ready && phase_ != Phase::rl_done) {
            throw usage_error("PhaseOrder", "train_classifier requires init_clusters (or a completed RL phase)");
        }
        SeededRng order_rng(derive_seed(config_.seed, 30 + 100 * classifier_rounds_));
        std::vector<double> epoch_losses;
        for (std::size_t epoch = 0; epoch < config_.classifier_epochs; ++epoch) {
            std::vector<std::size_t> order = train_indices_;
            order_rng.shuffle(order);
            double loss_sum = 0.0;
            for (std::size_t begin = 0; begin < order.size(); begin += config_.batch_size) {
                const std::size_t end = std::min(order.size(), begin + config_.batch_size);
                MlpParams psi_grads = detail::zero_like(psi_mapper_);
                ClassifierParams cls_grads = detail::zero_like(classifier_);
                for (std::size_t pos = begin; pos < end; ++pos) {
                    const Instance& inst = dataset_.instances[order[pos]];
                    const VisualSemanticPoint psi = model_point(inst.features);
                    const ClasterRepresentation rep = claster_representation(clusters_, psi);
                    const Vector projected = classifier_forward(classifier_, rep.omega);
                    const Vector probs = semantic_softmax(seen_embeddings_, projected);
                    std::vector<const Vector*> weights = weight_tensors(psi_mapper_);
                    for (const Vector* w : weight_tensors(classifier_)) weights.push_back(w);
                    const Eq3Loss loss =
                        loss_eq3(probs, seen_index_.at(inst.class_label), seen_embeddings_, weights, config_.lambda);
                    if (!std::isfinite(loss.loss)) {
                        throw numeric_error("NonFiniteLoss", "epoch " + std::to_string(epoch) + ", instance '" +
                                                                 inst.id + "'");
                    }
                    loss_sum += loss.loss;

                    ClassifierBackward cls_back = classifier_gradient(classifier_, rep.omega, loss.projected_grad);
                    detail::accumulate_tensors(cls_grads, cls_back.grads);
                    // omega = psi + sum eta_j c_j with the weights treated as
                    // constants, so d omega / d psi is the identity; only the
                    // semantic half reaches the psi mapper.
                    Vector phi_grad(cls_back.input_grad.begin() + static_cast<long>(d_v_),
                                    cls_back.input_grad.end());
                    if (standardizer_.enabled) {
                        for (std::size_t d = 0; d < phi_grad.size(); ++d) {
                            phi_grad[d] /= standardizer_.stddev[d_v_ + d];
                        }
                    }
                    detail::accumulate_tensors(psi_grads, mlp_gradient(psi_mapper_, inst.features, phi_grad).grads);
                }
                detail::scale_tensors(psi_grads, 1.0 / static_cast<double>(end - begin));
                detail::scale_tensors(cls_grads, 1.0 / static_cast<double>(end - begin));
                detail::add_frobenius_gradient(psi_grads, psi_mapper_, config_.lambda);
                detail::add_frobenius_gradient(cls_grads, classifier_, config_.lambda);
                adam_step(psi_adam_, psi_mapper_, psi_grads);
                adam_step(classifier_adam_, classifier_, cls_grads);
            }
            epoch_losses.push_back(loss_sum / static_cast<double>(order.size()));
        }
        classifier_rounds_ += 1;
        phase_ = Phase::classifier_trained;
        return epoch_losses;
    }

    // Single-sample REINFORCE updates of the centroids. Training samples are
    // visited in seeded random order, reshuffled each time the set is
    // exhausted. Purity over the training points is recorded at iteration 0
    // and every 100 iterations; each trace line is `iter alpha reward purity`.
    std::vector<RLTraceEntry> optimize_centroids(std::ostream* progress = nullptr) {
        require_phase(Phase::classifier_trained, "optimize_centroids");
        validate_schedule(config_.rl);
        SeededRng order_rng(derive_seed(config_.seed, 40 + 100 * rl_rounds_));
        std::vector<std::size_t> order = train_indices_;
        order_rng.shuffle(order);
        std::size_t cursor = 0;

        std::vector<RLTraceEntry> trace;
        double window_reward = 0.0;
        std::size_t window_count = 0;
        auto record = [&](std::size_t iteration) {
            RLTraceEntry entry;
            entry.iteration = iteration;
            entry.alpha = schedule_alpha(config_.rl, iteration < config_.rl.total_iterations
                                                         ? iteration
                                                         : config_.rl.total_iterations - 1);
            entry.reward_mean = window_count > 0 ? window_reward / static_cast<double>(window_count) : 0.0;
            entry.purity = training_purity();
            trace.push_back(entry);
            if (progress) {
                char line[128];
                std::snprintf(line, sizeof(line), "%zu\t%s\t%.4f\t%.4f\n", entry.iteration,
                              format_double(entry.alpha).c_str(), entry.reward_mean, entry.purity);
                (*progress) << line;
            }
            window_reward = 0.0;
            window_count = 0;
        };

        record(0);
        for (std::size_t iteration = 0; iteration < config_.rl.total_iterations; ++iteration) {
            const double alpha = schedule_alpha(config_.rl, iteration);
            if (cursor == order.size()) {
                order_rng.shuffle(order);
                cursor = 0;
            }
            const Instance& inst = dataset_.instances[order[cursor++]];

            const VisualSemanticPoint psi = model_point(inst.features);
            const ClasterRepresentation rep = claster_representation(clusters_, psi);
            const Vector projected = classifier_forward(classifier_, rep.omega);
            const Vector probs = semantic_softmax(seen_embeddings_, projected);
            const std::size_t true_index = seen_index_.at(inst.class_label);

            const int r = reward(probs, true_index);
            const double z = classification_score(probs, true_index);
            const auto [closest, distance] = assign(clusters_, psi.joined);
            (void)distance;
            const double p = match_probability(rep.weights.weights[closest]);
            const Vector delta = centroid_update(alpha, r, z, p, psi.joined, clusters_.centroids[closest].vector);
            for (std::size_t d = 0; d < delta.size(); ++d) clusters_.centroids[closest].vector[d] += delta[d];

            window_reward += r;
            window_count += 1;
            if ((iteration + 1) % 100 == 0 || iteration + 1 == config_.rl.total_iterations) {
                record(iteration + 1);
            }
        }
        if (purity_before_ < 0.0) purity_before_ = trace.front().purity;
        purity_after_ = trace.back().purity;
        rl_rounds_ += 1;
        phase_ = Phase::rl_done;
        return trace;
    }

    // Precomputes the rectified unseen embeddings and snapshots the model.
    TrainedModel finalize() {
        if (phase_ != Phase::classifier_trained && phase_ != Phase::rl_done) {
            throw usage_error("PhaseOrder", "finalize requires a trained classifier");
        }
        std::vector<std::pair<std::string, Vector>> seen_projected;
        for (const auto& label : seen_labels_) {
            seen_projected.emplace_back(label, mlp_forward(mapper_, dataset_.embeddings.at(label)));
        }
        TrainedModel model;
        model.config = config_;
        model.d_v = d_v_;
        model.d_s = d_s_;
        model.seen_labels = seen_labels_;
        model.unseen_labels = unseen_labels_;
        model.mapper = mapper_;
        model.psi_mapper = psi_mapper_;
        model.classifier = classifier_;
        model.clusters = clusters_;
        model.standardizer = standardizer_;
        for (const auto& label : unseen_labels_) {
            const Vector projected = mlp_forward(mapper_, dataset_.embeddings.at(label));
            model.unseen_rectified.push_back(
                rectify_class(label, projected, seen_projected, config_.rectify_k, EmbeddingSource::unseen));
        }
        model.purity_before = purity_before_;
        model.purity_after = purity_after_;
        phase_ = Phase::finalized;
        return model;
    }

    // All phases in order; the classifier/RL pair repeats config.alternations
    // times in full mode.
    TrainedModel run(std::ostream* progress = nullptr, std::vector<RLTraceEntry>* trace_out = nullptr) {
        train_mapper();
        init_clusters();
        for (std::size_t round = 0; round < config_.alternations; ++round) {
            train_classifier();
            if (config_.ablation_mode == AblationMode::full) {
                auto trace = optimize_centroids(progress);
                if (trace_out) {
                    trace_out->insert(trace_out->end(), trace.begin(), trace.end());
                }
            }
        }
        return finalize();
    }

    const MlpParams& mapper() const { return mapper_; }
    const MlpParams& psi_mapper() const { return psi_mapper_; }
    const ClassifierParams& classifier() const { return classifier_; }
    const ClusterModel& clusters() const { return clusters_; }

    // Inference-path point: psi built from the visual feature alone, passed
    // through the standardizer when one is fitted.
    VisualSemanticPoint model_point(const Vector& x) const {
        VisualSemanticPoint psi = build_psi(psi_mapper_, x);
        if (!standardizer_.enabled) return psi;
        Vector joined = standardizer_.apply(psi.joined);
        Vector visual(joined.begin(), joined.begin() + static_cast<long>(d_v_));
        Vector semantic(joined.begin() + static_cast<long>(d_v_), joined.end());
        return make_visual_semantic_point(std::move(visual), std::move(semantic));
    }

    double training_purity() const {
        std::vector<std::size_t> assignments;
        std::vector<std::string> labels;
        for (std::size_t idx : train_indices_) {
            const Instance& inst = dataset_.instances[idx];
            assignments.push_back(assign(clusters_, model_point(inst.features).joined).first);
            labels.push_back(inst.class_label);
        }
        return purity(assignments, labels, clusters_.k).purity;
    }

private:
    enum class Phase { constructed, mapper_trained, clusters_ready, classifier_trained, rl_done, finalized };

    void require_phase(Phase expected, const char* what) const {
        if (phase_ != expected) {
            throw usage_error("PhaseOrder", std::string(what) + " called out of order");
        }
    }

    LabeledDataset dataset_;
    PipelineConfig config_;
    std::vector<std::string> seen_labels_, unseen_labels_;
    std::map<std::string, std::size_t> seen_index_;
    std::vector<std::size_t> train_indices_;
    std::size_t d_v_ = 0, d_s_ = 0;
    Matrix seen_embeddings_;
    MlpParams mapper_, psi_mapper_;
    ClassifierParams classifier_;
    ClusterModel clusters_;
    Standardizer standardizer_;
    AdamState mapper_adam_, psi_adam_, classifier_adam_;
    double purity_before_ = -1.0, purity_after_ = -1.0;
    std::size_t classifier_rounds_ = 0, rl_rounds_ = 0;
    Phase phase_ = Phase::constructed;
};

}  // namespace claster
