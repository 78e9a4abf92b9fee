// Command-line front end: synthetic data generation, training, evaluation,
// prediction dumps, cluster statistics, and paired t-tests over result files.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "claster/claster.hpp"

namespace {

int verbosity() {
    const char* env = std::getenv("CLASTER_VERBOSE");
    return env ? std::atoi(env) : 0;
}

void info(const std::string& message) {
    if (verbosity() > 0) std::cerr << "claster: " << message << '\n';
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw claster::io_error("IoError", "cannot open '" + path + "' for writing");
    return out;
}

struct DataPaths {
    std::string instances;
    std::string embeddings;
    std::string split;
};

claster::LabeledDataset load_data(const DataPaths& paths, const std::vector<std::string>& embedding_paths,
                                  bool require_seen) {
    std::vector<claster::ClassEmbeddingTable> tables;
    for (const auto& path : embedding_paths) tables.push_back(claster::load_embeddings(path));
    claster::ClassEmbeddingTable table = claster::combine_embeddings(tables);
    claster::ClassSplit split = claster::load_split(paths.split, table);
    const std::size_t probe_dim = [&] {
        std::ifstream in(paths.instances);
        if (!in) throw claster::io_error("IoError", "cannot open '" + paths.instances + "' for reading");
        std::string line;
        if (!std::getline(in, line)) throw claster::data_error("EmptyDataset", "no instance records");
        const std::size_t tab = line.rfind('\t');
        if (tab == std::string::npos) throw claster::data_error("MalformedRecord", "line 1: expected tabs");
        return claster::detail::split_fields(line.substr(tab + 1), ',').size();
    }();
    auto instances = claster::load_instances(paths.instances, probe_dim);
    return claster::validate_dataset(std::move(instances), std::move(table), std::move(split), require_seen);
}

claster::TrainedModel load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw claster::io_error("IoError", "cannot open '" + path + "' for reading");
    return claster::load_model(in);
}

int run_gen_synth(const claster::SyntheticSpec& spec, const std::string& out_dir) {
    claster::LabeledDataset dataset = claster::generate_synthetic(spec);
    namespace fs = std::filesystem;
    const fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    const std::string instances_path = (dir / "instances.tsv").string();
    const std::string embeddings_path = (dir / "embeddings.tsv").string();
    const std::string split_path = (dir / "split.tsv").string();
    std::vector<std::string> written;
    try {
        for (const auto& [path, writer] :
             std::vector<std::pair<std::string, void (*)(std::ostream&, const claster::LabeledDataset&)>>{
                 {instances_path,
                  [](std::ostream& out, const claster::LabeledDataset& d) { claster::save_instances(out, d.instances); }},
                 {embeddings_path,
                  [](std::ostream& out, const claster::LabeledDataset& d) { claster::save_embeddings(out, d.embeddings); }},
                 {split_path,
                  [](std::ostream& out, const claster::LabeledDataset& d) { claster::save_split(out, d.split); }}}) {
            auto out = open_output(path);
            writer(out, dataset);
            if (!out) throw claster::io_error("IoError", "failed writing '" + path + "'");
            written.push_back(path);
        }
    } catch (...) {
        for (const auto& path : written) fs::remove(path, ec);
        fs::remove(instances_path, ec);
        fs::remove(embeddings_path, ec);
        fs::remove(split_path, ec);
        throw;
    }
    info("wrote " + instances_path + ", " + embeddings_path + ", " + split_path);
    return 0;
}

std::map<std::string, double> load_split_metrics(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw claster::io_error("IoError", "cannot open '" + path + "' for reading");
    std::map<std::string, double> metrics;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        double value = 0.0;
        if (tab == std::string::npos || !claster::parse_double(line.substr(tab + 1), value)) {
            throw claster::data_error("MalformedRecord",
                                      "line " + std::to_string(line_no) + ": expected split_id<TAB>value");
        }
        const std::string id = line.substr(0, tab);
        if (!metrics.emplace(id, value).second) {
            throw claster::data_error("SplitMismatch", "split id '" + id + "' repeated");
        }
    }
    if (metrics.empty()) throw claster::data_error("EmptyDataset", "no metric lines in '" + path + "'");
    return metrics;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Zero-shot recognition on precomputed features: joint visual-semantic clustering with "
                 "policy-gradient centroid refinement"};
    app.require_subcommand(1);

    // gen-synth
    claster::SyntheticSpec spec;
    spec.num_classes = 20;
    spec.per_class = 50;
    spec.d_v = 32;
    spec.d_s = 8;
    spec.noise_scale = 0.1;
    std::string out_dir;
    auto* gen = app.add_subcommand("gen-synth", "Generate a seeded synthetic dataset");
    gen->add_option("--classes", spec.num_classes, "Number of classes (>= 2)")->capture_default_str();
    gen->add_option("--per-class", spec.per_class, "Instances per class")->capture_default_str();
    gen->add_option("--dv", spec.d_v, "Visual feature dimension")->capture_default_str();
    gen->add_option("--ds", spec.d_s, "Semantic embedding dimension")->capture_default_str();
    gen->add_option("--noise", spec.noise_scale, "Noise scale relative to class separation")->capture_default_str();
    gen->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
    gen->add_option("--unseen-fraction", spec.unseen_fraction, "Fraction of classes held out as unseen")
        ->capture_default_str();
    gen->add_option("--out-dir", out_dir, "Directory for instances.tsv, embeddings.tsv, split.tsv")->required();

    // shared data options
    DataPaths train_paths, eval_paths, stats_paths, predict_paths;
    std::vector<std::string> train_embeds, eval_embeds, stats_embeds, predict_embeds;

    std::string config_path, checkpoint_out, train_log;
    std::vector<std::string> overrides;
    auto* train = app.add_subcommand("train", "Run the full training pipeline");
    train->add_option("--config", config_path, "Config file of key = value lines");
    train->add_option("--instances", train_paths.instances, "Training instances file")->required();
    train->add_option("--embeddings", train_embeds, "Class embeddings file (repeat to average several sources)")
        ->required();
    train->add_option("--split", train_paths.split, "Seen/unseen split file")->required();
    train->add_option("--out", checkpoint_out, "Checkpoint output path")->required();
    train->add_option("--log", train_log, "Progress log path (default: <out>.log)");
    train->add_option("--set", overrides, "Config override key=value (wins over --config)");

    std::string checkpoint_path, report_out, mode_name = "zsl";
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint and emit a report");
    evaluate->add_option("--checkpoint", checkpoint_path, "Trained checkpoint")->required();
    evaluate->add_option("--instances", eval_paths.instances, "Test instances file")->required();
    evaluate->add_option("--embeddings", eval_embeds, "Class embeddings file (repeatable)")->required();
    evaluate->add_option("--split", eval_paths.split, "Seen/unseen split file")->required();
    evaluate->add_option("--mode", mode_name, "zsl or gzsl")->capture_default_str();
    evaluate->add_option("--out", report_out, "Report output path")->required();

    std::string predict_checkpoint, predictions_out, predict_mode = "gzsl";
    auto* predict = app.add_subcommand("predict", "Dump per-instance predictions");
    predict->add_option("--checkpoint", predict_checkpoint, "Trained checkpoint")->required();
    predict->add_option("--instances", predict_paths.instances, "Instances file")->required();
    predict->add_option("--embeddings", predict_embeds, "Class embeddings file (repeatable)")->required();
    predict->add_option("--split", predict_paths.split, "Seen/unseen split file")->required();
    predict->add_option("--mode", predict_mode, "zsl or gzsl")->capture_default_str();
    predict->add_option("--out", predictions_out, "Predictions output path")->required();

    std::string stats_checkpoint, stats_out;
    auto* stats = app.add_subcommand("cluster-stats", "Purity and per-class cluster histogram");
    stats->add_option("--checkpoint", stats_checkpoint, "Trained checkpoint")->required();
    stats->add_option("--instances", stats_paths.instances, "Labeled instances file")->required();
    stats->add_option("--embeddings", stats_embeds, "Class embeddings file (repeatable)")->required();
    stats->add_option("--split", stats_paths.split, "Seen/unseen split file")->required();
    stats->add_option("--out", stats_out, "Report output path")->required();

    std::string ttest_first, ttest_second, ttest_out;
    auto* ttest = app.add_subcommand("ttest", "Paired t-test over two per-split result files");
    ttest->add_option("--first", ttest_first, "First result file (split_id<TAB>value lines)")->required();
    ttest->add_option("--second", ttest_second, "Second result file with the same split ids")->required();
    ttest->add_option("--out", ttest_out, "Optional report output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (gen->parsed()) return run_gen_synth(spec, out_dir);

    if (train->parsed()) {
        claster::PipelineConfig config;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw claster::io_error("IoError", "cannot open '" + config_path + "' for reading");
            config = claster::load_config(in);
        }
        for (const auto& entry : overrides) {
            const std::size_t eq = entry.find('=');
            if (eq == std::string::npos) {
                throw claster::usage_error("InvalidConfigValue", "--set expects key=value, got '" + entry + "'");
            }
            claster::apply_config_entry(config, entry.substr(0, eq), entry.substr(eq + 1));
        }
        auto dataset = load_data(train_paths, train_embeds, true);
        info("training on " + std::to_string(dataset.instances.size()) + " instances");
        claster::Pipeline pipeline(std::move(dataset), config);
        const std::string log_path = train_log.empty() ? checkpoint_out + ".log" : train_log;
        auto log = open_output(log_path);
        const claster::TrainedModel model = pipeline.run(&log);
        auto out = open_output(checkpoint_out);
        claster::save_model(out, model);
        info("checkpoint written to " + checkpoint_out);
        return 0;
    }

    if (evaluate->parsed() || predict->parsed()) {
        const bool predicting = predict->parsed();
        const std::string& mode_text = predicting ? predict_mode : mode_name;
        claster::EvalMode mode;
        if (mode_text == "zsl") mode = claster::EvalMode::zsl;
        else if (mode_text == "gzsl") mode = claster::EvalMode::gzsl;
        else throw claster::usage_error("InvalidConfigValue", "--mode must be zsl or gzsl");
        const auto model = load_checkpoint(predicting ? predict_checkpoint : checkpoint_path);
        auto dataset = load_data(predicting ? predict_paths : eval_paths,
                                 predicting ? predict_embeds : eval_embeds, false);
        const auto result = claster::evaluate_model(model, dataset, mode);
        auto out = open_output(predicting ? predictions_out : report_out);
        if (predicting) {
            claster::write_predictions(out, result.predictions);
        } else {
            claster::emit_report(result.report, out);
        }
        return 0;
    }

    if (stats->parsed()) {
        const auto model = load_checkpoint(stats_checkpoint);
        auto dataset = load_data(stats_paths, stats_embeds, false);
        const auto report = claster::cluster_stats(model, dataset);
        auto out = open_output(stats_out);
        claster::emit_report(report, out);
        return 0;
    }

    if (ttest->parsed()) {
        const auto first = load_split_metrics(ttest_first);
        const auto second = load_split_metrics(ttest_second);
        if (first.size() != second.size()) {
            throw claster::data_error("SplitMismatch", "result files list different split counts");
        }
        claster::Vector diffs, first_values, second_values;
        for (const auto& [id, value] : first) {
            auto it = second.find(id);
            if (it == second.end()) {
                throw claster::data_error("SplitMismatch", "split id '" + id + "' missing from second file");
            }
            diffs.push_back(value - it->second);
            first_values.push_back(value);
            second_values.push_back(it->second);
        }
        const auto result = claster::paired_ttest(diffs);
        auto mean_std = [](const claster::Vector& values) {
            double mean = 0.0;
            for (double v : values) mean += v;
            mean /= static_cast<double>(values.size());
            double ss = 0.0;
            for (double v : values) ss += (v - mean) * (v - mean);
            return std::make_pair(mean, std::sqrt(ss / static_cast<double>(values.size() - 1)));
        };
        const auto [mean_a, std_a] = mean_std(first_values);
        const auto [mean_b, std_b] = mean_std(second_values);
        claster::EvalReport report;
        report.ttest = result;
        std::ostringstream text;
        claster::emit_report(report, text);
        text << "runs.first_mean = " << claster::detail::fixed4(mean_a) << '\n';
        text << "runs.first_std = " << claster::detail::fixed4(std_a) << '\n';
        text << "runs.second_mean = " << claster::detail::fixed4(mean_b) << '\n';
        text << "runs.second_std = " << claster::detail::fixed4(std_b) << '\n';
        std::cout << text.str();
        if (!ttest_out.empty()) {
            auto out = open_output(ttest_out);
            out << text.str();
        }
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const claster::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        switch (e.category()) {
            case claster::ErrorCategory::usage: return 2;
            case claster::ErrorCategory::data: return 3;
            case claster::ErrorCategory::io: return 3;
            case claster::ErrorCategory::numeric: return 4;
        }
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}
