#include <sstream>

#include "claster/config.hpp"
#include "doctest.h"

using namespace claster;

TEST_CASE("defaults follow the published hyperparameters") {
    PipelineConfig config;
    CHECK(config.k_clusters == 6);
    CHECK(config.adam.lr == doctest::Approx(1e-4));
    CHECK(config.adam.weight_decay == doctest::Approx(5e-4));
    CHECK(config.rl.total_iterations == 10000);
    CHECK(config.rl.schedule.size() == 3);
    CHECK(config.gate_tau == doctest::Approx(0.5));
    CHECK(config.rectify_k == 5);
    CHECK_FALSE(config.soft_query);
    CHECK(config.ablation_mode == AblationMode::full);
}

TEST_CASE("config files parse with comments and whitespace") {
    std::istringstream in(
        "# synthetic quickstart\n"
        "k_clusters = 4\n"
        "\n"
        "adam.lr = 0.01\n"
        "rl.schedule = 0.2@0,0.05@50\n"
        "rl.total_iterations = 200\n"
        "ablation_mode = kmeans_only\n"
        "soft_query = true\n"
        "  seed   =   99  \n");
    const auto config = load_config(in);
    CHECK(config.k_clusters == 4);
    CHECK(config.adam.lr == doctest::Approx(0.01));
    CHECK(config.rl.schedule.size() == 2);
    CHECK(config.rl.schedule[1].start == 50);
    CHECK(config.rl.schedule[1].alpha == doctest::Approx(0.05));
    CHECK(config.ablation_mode == AblationMode::kmeans_only);
    CHECK(config.soft_query);
    CHECK(config.seed == 99);
}

TEST_CASE("unknown keys and bad values are usage errors naming the key") {
    PipelineConfig config;
    CHECK_THROWS_WITH_AS(apply_config_entry(config, "bogus_key", "1"), doctest::Contains("bogus_key"), Error);
    try {
        apply_config_entry(config, "bogus_key", "1");
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::usage);
        CHECK(e.code() == "UnknownConfigKey");
    }
    CHECK_THROWS_WITH_AS(apply_config_entry(config, "k_clusters", "zero"), doctest::Contains("InvalidConfigValue"),
                         Error);
    CHECK_THROWS_WITH_AS(apply_config_entry(config, "gate.tau", "1.5"), doctest::Contains("InvalidConfigValue"),
                         Error);
    CHECK_THROWS_WITH_AS(apply_config_entry(config, "classifier.kernel_size", "4"),
                         doctest::Contains("InvalidConfigValue"), Error);
    CHECK_THROWS_WITH_AS(apply_config_entry(config, "rl.schedule", "0.1@5"), doctest::Contains("InvalidConfigValue"),
                         Error);
    CHECK_THROWS_WITH_AS(apply_config_entry(config, "ablation_mode", "mystery"),
                         doctest::Contains("InvalidConfigValue"), Error);
    std::istringstream in("this is not a config\n");
    CHECK_THROWS_WITH_AS(load_config(in), doctest::Contains("InvalidConfigValue"), Error);
}

TEST_CASE("config echo round-trips every key") {
    PipelineConfig config;
    config.k_clusters = 9;
    config.mapper_epochs = 3;
    config.classifier_epochs = 4;
    config.batch_size = 16;
    config.adam.lr = 0.02;
    config.adam.weight_decay = 0.001;
    config.lambda = 0.5;
    config.rl.total_iterations = 123;
    config.rl.schedule = {{0, 0.3}, {10, 0.07}};
    config.rectify_k = 2;
    config.gate_tau = 0.7;
    config.seed = 424242;
    config.ablation_mode = AblationMode::random_clustering;
    config.hidden = 12;
    config.classifier_kernel_size = 5;
    config.classifier_hidden_channels = 2;
    config.alternations = 2;
    config.soft_query = true;
    config.kmeans_init = KmeansMode::forgy;
    config.standardize_clustering = true;
    config.normalize_embeddings = true;

    PipelineConfig rebuilt;
    for (const auto& [key, value] : config_entries(config)) apply_config_entry(rebuilt, key, value);
    CHECK(config_entries(rebuilt) == config_entries(config));
    CHECK(rebuilt.seed == config.seed);
    CHECK(rebuilt.rl.schedule.size() == config.rl.schedule.size());
    CHECK(rebuilt.kmeans_init == KmeansMode::forgy);
}
