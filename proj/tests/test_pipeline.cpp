#include <sstream>

#include "claster/claster.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace claster;

namespace {

SyntheticSpec small_spec(std::uint64_t seed = 5) {
    SyntheticSpec spec;
    spec.num_classes = 6;
    spec.per_class = 12;
    spec.d_v = 8;
    spec.d_s = 4;
    spec.noise_scale = 0.05;
    spec.seed = seed;
    spec.unseen_fraction = 0.34;  // 2 unseen, 4 seen
    return spec;
}

PipelineConfig quick_config(std::uint64_t seed = 1) {
    PipelineConfig config;
    config.seed = seed;
    config.k_clusters = 4;
    config.mapper_epochs = 40;
    config.classifier_epochs = 10;
    config.batch_size = 16;
    config.adam.lr = 0.01;
    config.lambda = 1e-5;
    config.hidden = 16;
    config.rectify_k = 2;
    config.rl.total_iterations = 300;
    config.rl.schedule = {{0, 0.05}, {200, 0.01}};
    return config;
}

std::string model_text(const TrainedModel& model) {
    std::ostringstream out;
    save_model(out, model);
    return out.str();
}

}  // namespace

TEST_CASE("mapper training drives the embedding loss down on a noiseless instance") {
    auto spec = small_spec();
    spec.noise_scale = 0.0;
    auto dataset = generate_synthetic(spec);
    auto config = quick_config();
    config.mapper_epochs = 300;
    config.adam.lr = 0.02;
    config.adam.weight_decay = 0.0;
    Pipeline pipeline(dataset, config);
    const auto losses = pipeline.train_mapper();
    REQUIRE(losses.size() == 300);
    CHECK(losses.back() < 1e-3 * losses.front());
}

TEST_CASE("zero mapper epochs leave the initialization untouched") {
    auto dataset = generate_synthetic(small_spec());
    auto config = quick_config();
    Pipeline reference(dataset, config);
    config.mapper_epochs = 0;
    Pipeline fresh(dataset, config);
    const auto losses = fresh.train_mapper();
    CHECK(losses.empty());
    CHECK(fresh.mapper().layer1.weights.data == reference.mapper().layer1.weights.data);
    CHECK(fresh.mapper().layer2.weights.data == reference.mapper().layer2.weights.data);
}

TEST_CASE("phase ordering is enforced") {
    auto dataset = generate_synthetic(small_spec());
    Pipeline pipeline(dataset, quick_config());
    CHECK_THROWS_WITH_AS(pipeline.init_clusters(), doctest::Contains("PhaseOrder"), Error);
    CHECK_THROWS_WITH_AS(pipeline.train_classifier(), doctest::Contains("PhaseOrder"), Error);
    CHECK_THROWS_WITH_AS(pipeline.optimize_centroids(), doctest::Contains("PhaseOrder"), Error);
    CHECK_THROWS_WITH_AS(pipeline.finalize(), doctest::Contains("PhaseOrder"), Error);
    pipeline.train_mapper();
    CHECK_THROWS_WITH_AS(pipeline.train_mapper(), doctest::Contains("PhaseOrder"), Error);
    pipeline.init_clusters();
    CHECK_THROWS_WITH_AS(pipeline.optimize_centroids(), doctest::Contains("PhaseOrder"), Error);
    pipeline.train_classifier();
    CHECK_NOTHROW(pipeline.optimize_centroids());
    CHECK_NOTHROW(pipeline.finalize());
}

TEST_CASE("ablation modes shape the cluster model") {
    auto dataset = generate_synthetic(small_spec());

    auto config = quick_config();
    config.ablation_mode = AblationMode::no_clustering;
    Pipeline single(dataset, config);
    single.train_mapper();
    single.init_clusters();
    CHECK(single.clusters().k == 1);

    // Separable synthetic data clusters cleanly under k-means with k equal
    // to the seen class count.
    auto kmeans_config = quick_config();
    kmeans_config.k_clusters = 4;
    Pipeline km(dataset, kmeans_config);
    km.train_mapper();
    km.init_clusters();
    const double km_purity = km.training_purity();
    CHECK(km_purity >= 0.9);

    // Random clustering sits near the largest-class share, far below k-means.
    auto random_config = quick_config();
    random_config.ablation_mode = AblationMode::random_clustering;
    Pipeline rnd(dataset, random_config);
    rnd.train_mapper();
    rnd.init_clusters();
    const double random_purity = rnd.training_purity();
    CHECK(random_purity < km_purity);
    CHECK(random_purity >= 0.25 - 1e-12);  // largest-class share: 4 even seen classes
    CHECK(random_purity <= 0.65);          // well under clean clustering, allowing max-statistics slack
}

TEST_CASE("classifier training reduces the loss over epochs") {
    std::vector<double> first_epoch, fifth_epoch;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto dataset = generate_synthetic(small_spec(seed));
        auto config = quick_config(seed);
        config.classifier_epochs = 5;
        Pipeline pipeline(dataset, config);
        pipeline.train_mapper();
        pipeline.init_clusters();
        const auto losses = pipeline.train_classifier();
        REQUIRE(losses.size() == 5);
        first_epoch.push_back(losses.front());
        fifth_epoch.push_back(losses.back());
    }
    std::sort(first_epoch.begin(), first_epoch.end());
    std::sort(fifth_epoch.begin(), fifth_epoch.end());
    CHECK(fifth_epoch[1] < first_epoch[1]);  // median over the three seeds
}

TEST_CASE("RL phase moves exactly one centroid per sample step") {
    auto dataset = generate_synthetic(small_spec());
    auto config = quick_config();
    config.rl.total_iterations = 1;
    config.rl.schedule = {{0, 0.1}};
    Pipeline pipeline(dataset, config);
    pipeline.train_mapper();
    pipeline.init_clusters();
    pipeline.train_classifier();
    const auto before = pipeline.clusters();
    pipeline.optimize_centroids();
    const auto& after = pipeline.clusters();
    std::size_t changed = 0;
    for (std::size_t j = 0; j < before.centroids.size(); ++j) {
        if (before.centroids[j].vector != after.centroids[j].vector) changed += 1;
    }
    CHECK(changed == 1);
}

TEST_CASE("vanishing RL rate leaves centroids bit-identical") {
    auto dataset = generate_synthetic(small_spec());
    auto config = quick_config();
    config.rl.total_iterations = 50;
    config.rl.schedule = {{0, 1e-30}};
    Pipeline pipeline(dataset, config);
    pipeline.train_mapper();
    pipeline.init_clusters();
    pipeline.train_classifier();
    const auto before = pipeline.clusters();
    pipeline.optimize_centroids();
    for (std::size_t j = 0; j < before.centroids.size(); ++j) {
        CHECK(before.centroids[j].vector == pipeline.clusters().centroids[j].vector);
    }
}

TEST_CASE("RL trace is logged every hundred iterations") {
    auto dataset = generate_synthetic(small_spec());
    auto config = quick_config();
    config.rl.total_iterations = 250;
    Pipeline pipeline(dataset, config);
    pipeline.train_mapper();
    pipeline.init_clusters();
    pipeline.train_classifier();
    std::ostringstream log;
    const auto trace = pipeline.optimize_centroids(&log);
    REQUIRE(trace.size() == 4);  // iterations 0, 100, 200, 250
    CHECK(trace[0].iteration == 0);
    CHECK(trace[1].iteration == 100);
    CHECK(trace[2].iteration == 200);
    CHECK(trace[3].iteration == 250);
    CHECK(trace[0].alpha == doctest::Approx(0.05));
    CHECK(trace[3].alpha == doctest::Approx(0.01));
    for (const auto& entry : trace) {
        CHECK(entry.purity > 0.0);
        CHECK(entry.purity <= 1.0);
        CHECK(std::abs(entry.reward_mean) <= 1.0);
    }
    std::size_t lines = 0;
    std::string line;
    std::istringstream parsed(log.str());
    while (std::getline(parsed, line)) {
        CHECK(std::count(line.begin(), line.end(), '\t') == 3);
        ++lines;
    }
    CHECK(lines == trace.size());
}

TEST_CASE("training end to end is deterministic per seed") {
    auto dataset = generate_synthetic(small_spec());
    auto config = quick_config(3);
    Pipeline a(dataset, config);
    Pipeline b(dataset, config);
    const std::string text_a = model_text(a.run());
    const std::string text_b = model_text(b.run());
    CHECK(text_a == text_b);

    auto other = quick_config(4);
    Pipeline c(dataset, other);
    CHECK(model_text(c.run()) != text_a);
}

TEST_CASE("checkpoints round-trip to identical predictions and bytes") {
    auto dataset = generate_synthetic(small_spec());
    auto config = quick_config();
    Pipeline pipeline(dataset, config);
    const TrainedModel model = pipeline.run();
    const std::string serialized = model_text(model);

    std::istringstream in(serialized);
    const TrainedModel reloaded = load_model(in);
    CHECK(model_text(reloaded) == serialized);

    const auto original = evaluate_model(model, dataset, EvalMode::gzsl);
    const auto restored = evaluate_model(reloaded, dataset, EvalMode::gzsl);
    REQUIRE(original.predictions.size() == restored.predictions.size());
    for (std::size_t i = 0; i < original.predictions.size(); ++i) {
        CHECK(original.predictions[i].predicted == restored.predictions[i].predicted);
        CHECK(original.predictions[i].route == restored.predictions[i].route);
    }
}

TEST_CASE("finalize caches exactly the on-the-fly rectified embeddings") {
    auto dataset = generate_synthetic(small_spec());
    Pipeline pipeline(dataset, quick_config());
    const TrainedModel model = pipeline.run();

    std::vector<std::pair<std::string, Vector>> seen_projected;
    for (const auto& label : model.seen_labels) {
        seen_projected.emplace_back(label, mlp_forward(model.mapper, dataset.embeddings.at(label)));
    }
    for (const auto& cached : model.unseen_rectified) {
        const Vector projected = mlp_forward(model.mapper, dataset.embeddings.at(cached.class_label));
        const auto fresh = rectify_class(cached.class_label, projected, seen_projected, model.config.rectify_k,
                                         EmbeddingSource::unseen);
        REQUIRE(fresh.vector.size() == cached.vector.size());
        for (std::size_t d = 0; d < fresh.vector.size(); ++d) {
            CHECK(fresh.vector[d] == doctest::Approx(cached.vector[d]).epsilon(1e-12));
        }
    }
}

TEST_CASE("rectify_k beyond the seen class count surfaces an error") {
    auto dataset = generate_synthetic(small_spec());
    auto config = quick_config();
    config.rectify_k = 10;  // only 4 seen classes
    Pipeline pipeline(dataset, config);
    pipeline.train_mapper();
    pipeline.init_clusters();
    pipeline.train_classifier();
    CHECK_THROWS_WITH_AS(pipeline.finalize(), doctest::Contains("EmptyNeighborSet"), Error);
}

TEST_CASE("evaluation restricts label spaces per mode") {
    auto dataset = generate_synthetic(small_spec());
    Pipeline pipeline(dataset, quick_config());
    const TrainedModel model = pipeline.run();

    const auto zsl = evaluate_model(model, dataset, EvalMode::zsl);
    REQUIRE(zsl.report.zsl.has_value());
    CHECK_FALSE(zsl.report.gzsl.has_value());
    const std::set<std::string> unseen(model.unseen_labels.begin(), model.unseen_labels.end());
    for (const auto& [label, acc] : zsl.report.per_class) {
        (void)acc;
        CHECK(unseen.count(label) == 1);
    }
    for (const auto& p : zsl.predictions) {
        CHECK(unseen.count(p.predicted) == 1);
        CHECK(p.route == Route::unseen);
    }

    const auto gzsl = evaluate_model(model, dataset, EvalMode::gzsl);
    REQUIRE(gzsl.report.gzsl.has_value());
    CHECK(gzsl.report.gzsl->H ==
          doctest::Approx(harmonic_mean(gzsl.report.gzsl->u, gzsl.report.gzsl->s)).epsilon(1e-12));
    CHECK(gzsl.report.per_class.size() == 6);
    CHECK(gzsl.predictions.size() == dataset.instances.size());
}

TEST_CASE("evaluation rejects dimension mismatches between checkpoint and data") {
    auto dataset = generate_synthetic(small_spec());
    Pipeline pipeline(dataset, quick_config());
    const TrainedModel model = pipeline.run();

    auto wide_spec = small_spec();
    wide_spec.d_v = 16;
    auto wide = generate_synthetic(wide_spec);
    CHECK_THROWS_WITH_AS(evaluate_model(model, wide, EvalMode::zsl), doctest::Contains("DimensionMismatch"), Error);
}

TEST_CASE("alternations rerun the classifier and RL phases") {
    auto dataset = generate_synthetic(small_spec());
    auto config = quick_config();
    config.alternations = 2;
    config.classifier_epochs = 3;
    config.rl.total_iterations = 120;
    config.rl.schedule = {{0, 0.02}};
    Pipeline pipeline(dataset, config);
    std::vector<RLTraceEntry> trace;
    pipeline.run(nullptr, &trace);
    // Two RL rounds, each logging at 0, 100, and 120 iterations.
    CHECK(trace.size() == 6);
}

TEST_CASE("standardized clustering keeps the whole pipeline consistent") {
    auto dataset = generate_synthetic(small_spec());
    auto config = quick_config();
    config.standardize_clustering = true;
    Pipeline pipeline(dataset, config);
    const TrainedModel model = pipeline.run();
    CHECK(model.standardizer.enabled);

    const std::string serialized = model_text(model);
    std::istringstream in(serialized);
    const TrainedModel reloaded = load_model(in);
    CHECK(reloaded.standardizer.enabled);
    CHECK(model_text(reloaded) == serialized);

    const auto result = evaluate_model(reloaded, dataset, EvalMode::zsl);
    CHECK(result.report.zsl->mean_class_accuracy >= 0.0);
}
