#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "claster/common.hpp"

namespace claster {

struct Instance {
    std::string id;
    std::string class_label;
    Vector features;
};

struct ClassEmbeddingTable {
    std::size_t dim = 0;
    std::map<std::string, Vector> entries;

    const Vector& at(const std::string& label) const {
        auto it = entries.find(label);
        if (it == entries.end()) throw data_error("UnknownClass", "no embedding for class '" + label + "'");
        return it->second;
    }
};

struct ClassSplit {
    std::set<std::string> seen;
    std::set<std::string> unseen;
};

struct LabeledDataset {
    std::size_t d_v = 0;
    std::vector<Instance> instances;
    ClassEmbeddingTable embeddings;
    ClassSplit split;
};

struct SyntheticSpec {
    std::size_t num_classes = 0;
    std::size_t per_class = 0;
    std::size_t d_v = 0;
    std::size_t d_s = 0;
    double noise_scale = 0.0;
    std::uint64_t seed = 0;
    double unseen_fraction = 0.5;
};

// Exposed so tests can check generated features against the intended class means.
struct SyntheticDetails {
    Matrix semantic_to_visual;                 // d_v x d_s
    std::map<std::string, Vector> class_means;
    double noise_sigma = 0.0;
};

namespace detail {

inline bool valid_token(const std::string& token) {
    if (token.empty()) return false;
    for (char c : token) {
        if (c == '\t' || c == ',' || c == '\n' || c == '\r' || c == ' ') return false;
    }
    return true;
}

inline Vector parse_csv_doubles(const std::string& text, std::size_t line_no, const char* what) {
    Vector values;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = text.find(',', start);
        std::string_view token(text.data() + start, (comma == std::string::npos ? text.size() : comma) - start);
        double v = 0.0;
        if (!parse_double(token, v)) {
            throw data_error("MalformedRecord",
                             std::string("line ") + std::to_string(line_no) + ": cannot parse " + what +
                                 " value '" + std::string(token) + "'");
        }
        if (!std::isfinite(v)) {
            throw data_error("NonFiniteValue",
                             std::string("line ") + std::to_string(line_no) + ": non-finite " + what + " value");
        }
        values.push_back(v);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return values;
}

inline std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        fields.push_back(line.substr(start, (pos == std::string::npos ? line.size() : pos) - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return fields;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("IoError", "cannot open '" + path + "' for reading");
    return in;
}

inline std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace detail

// Instances file: one record per line, `id<TAB>class_label<TAB>v1,v2,...,vd`.
inline std::vector<Instance> load_instances(std::istream& in, std::size_t d_v) {
    std::vector<Instance> instances;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::strip_cr(line);
        auto fields = detail::split_fields(line, '\t');
        if (fields.size() != 3 || !detail::valid_token(fields[0]) || !detail::valid_token(fields[1])) {
            throw data_error("MalformedRecord",
                             "line " + std::to_string(line_no) + ": expected id<TAB>class<TAB>values");
        }
        Instance inst;
        inst.id = fields[0];
        inst.class_label = fields[1];
        inst.features = detail::parse_csv_doubles(fields[2], line_no, "feature");
        if (inst.features.size() != d_v) {
            throw data_error("DimensionMismatch",
                             "line " + std::to_string(line_no) + ": record has " +
                                 std::to_string(inst.features.size()) + " values, expected " + std::to_string(d_v));
        }
        if (!ids.insert(inst.id).second) {
            throw data_error("DuplicateId", "line " + std::to_string(line_no) + ": duplicate id '" + inst.id + "'");
        }
        instances.push_back(std::move(inst));
    }
    if (instances.empty()) throw data_error("EmptyDataset", "no instance records");
    return instances;
}

inline std::vector<Instance> load_instances(const std::string& path, std::size_t d_v) {
    auto in = detail::open_input(path);
    return load_instances(in, d_v);
}

// Embeddings file: `class_label<TAB>v1,...,vd`; dimension inferred from the first entry.
inline ClassEmbeddingTable load_embeddings(std::istream& in) {
    ClassEmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::strip_cr(line);
        auto fields = detail::split_fields(line, '\t');
        if (fields.size() != 2 || !detail::valid_token(fields[0])) {
            throw data_error("MalformedRecord",
                             "line " + std::to_string(line_no) + ": expected class<TAB>values");
        }
        Vector values = detail::parse_csv_doubles(fields[1], line_no, "embedding");
        if (table.entries.empty()) {
            table.dim = values.size();
        } else if (values.size() != table.dim) {
            throw data_error("DimensionMismatch",
                             "line " + std::to_string(line_no) + ": embedding has " +
                                 std::to_string(values.size()) + " values, expected " + std::to_string(table.dim));
        }
        if (norm(values) == 0.0) {
            throw data_error("ZeroEmbedding",
                             "line " + std::to_string(line_no) + ": class '" + fields[0] + "' has a zero vector");
        }
        if (!table.entries.emplace(fields[0], std::move(values)).second) {
            throw data_error("DuplicateClass",
                             "line " + std::to_string(line_no) + ": class '" + fields[0] + "' listed twice");
        }
    }
    if (table.entries.empty()) throw data_error("EmptyDataset", "no embedding records");
    return table;
}

inline ClassEmbeddingTable load_embeddings(const std::string& path) {
    auto in = detail::open_input(path);
    return load_embeddings(in);
}

// Split file: exactly two lines, `seen:<TAB>a,b,...` then `unseen:<TAB>c,...`.
inline ClassSplit load_split(std::istream& in, const ClassEmbeddingTable& table) {
    std::string seen_line, unseen_line, extra;
    if (!std::getline(in, seen_line) || !std::getline(in, unseen_line)) {
        throw data_error("MalformedRecord", "split file must have a seen: line and an unseen: line");
    }
    if (std::getline(in, extra) && !detail::strip_cr(extra).empty()) {
        throw data_error("MalformedRecord", "split file has trailing content");
    }
    seen_line = detail::strip_cr(seen_line);
    unseen_line = detail::strip_cr(unseen_line);

    auto parse_side = [&](const std::string& line, const std::string& prefix) {
        if (line.rfind(prefix, 0) != 0) {
            throw data_error("MalformedRecord", "expected line starting with '" + prefix + "'");
        }
        std::set<std::string> labels;
        for (const auto& label : detail::split_fields(line.substr(prefix.size()), ',')) {
            if (!detail::valid_token(label)) {
                throw data_error("MalformedRecord", "bad class label '" + label + "' in split file");
            }
            if (table.entries.find(label) == table.entries.end()) {
                throw data_error("UnknownClass", "split references class '" + label + "' absent from embeddings");
            }
            labels.insert(label);
        }
        return labels;
    };

    ClassSplit split;
    split.seen = parse_side(seen_line, "seen:\t");
    split.unseen = parse_side(unseen_line, "unseen:\t");
    if (split.seen.empty() || split.unseen.empty()) {
        throw data_error("EmptySide", "both seen and unseen sides must be non-empty");
    }
    for (const auto& label : split.seen) {
        if (split.unseen.count(label)) {
            throw data_error("OverlappingSplit", "class '" + label + "' appears in both sides");
        }
    }
    return split;
}

inline ClassSplit load_split(const std::string& path, const ClassEmbeddingTable& table) {
    auto in = detail::open_input(path);
    return load_split(in, table);
}

// Cross-checks the three components and assembles the dataset. When
// require_seen_instances is false (evaluation-only data) a dataset holding
// nothing but unseen-class instances is accepted.
inline LabeledDataset validate_dataset(std::vector<Instance> instances, ClassEmbeddingTable table,
                                       ClassSplit split, bool require_seen_instances = true) {
    if (instances.empty()) throw data_error("EmptyDataset", "no instances");
    const std::size_t d_v = instances.front().features.size();
    bool any_seen = false;
    std::set<std::string> ids;
    for (const auto& inst : instances) {
        if (inst.features.size() != d_v) {
            throw data_error("DimensionMismatch", "instance '" + inst.id + "' has inconsistent dimension");
        }
        if (!ids.insert(inst.id).second) {
            throw data_error("DuplicateId", "duplicate instance id '" + inst.id + "'");
        }
        if (table.entries.find(inst.class_label) == table.entries.end()) {
            throw data_error("UnknownClass",
                             "instance '" + inst.id + "' labeled with class '" + inst.class_label +
                                 "' absent from embeddings");
        }
        const bool seen = split.seen.count(inst.class_label) > 0;
        if (!seen && split.unseen.count(inst.class_label) == 0) {
            throw data_error("UnknownClass",
                             "instance '" + inst.id + "' labeled with class '" + inst.class_label +
                                 "' absent from split");
        }
        any_seen = any_seen || seen;
    }
    if (require_seen_instances && !any_seen) {
        throw data_error("NoSeenInstances", "every instance carries an unseen label; nothing to train on");
    }
    LabeledDataset dataset;
    dataset.d_v = d_v;
    dataset.instances = std::move(instances);
    dataset.embeddings = std::move(table);
    dataset.split = std::move(split);
    return dataset;
}

// Averages several embedding sources per class: each table's vectors are
// L2-normalized, zero-padded to the largest dimension, then averaged.
// A single table is passed through untouched.
inline ClassEmbeddingTable combine_embeddings(const std::vector<ClassEmbeddingTable>& tables) {
    if (tables.empty()) throw data_error("EmptyDataset", "no embedding tables to combine");
    if (tables.size() == 1) return tables.front();

    const auto& reference = tables.front();
    std::size_t max_dim = 0;
    for (const auto& table : tables) {
        max_dim = std::max(max_dim, table.dim);
        if (table.entries.size() != reference.entries.size()) {
            throw data_error("ClassSetMismatch", "embedding tables cover different class sets");
        }
        for (const auto& [label, values] : table.entries) {
            (void)values;
            if (reference.entries.find(label) == reference.entries.end()) {
                throw data_error("ClassSetMismatch", "class '" + label + "' missing from another table");
            }
        }
    }

    ClassEmbeddingTable combined;
    combined.dim = max_dim;
    for (const auto& [label, values] : reference.entries) {
        (void)values;
        Vector sum(max_dim, 0.0);
        for (const auto& table : tables) {
            const Vector& v = table.at(label);
            const double n = norm(v);
            if (n == 0.0) throw data_error("ZeroEmbedding", "class '" + label + "' has a zero vector");
            for (std::size_t i = 0; i < v.size(); ++i) sum[i] += v[i] / n;
        }
        for (double& x : sum) x /= static_cast<double>(tables.size());
        combined.entries.emplace(label, std::move(sum));
    }
    return combined;
}

// Seeded synthetic dataset: class embeddings are standard normal in d_s, a
// fixed random linear map places class means in visual space, and features
// are those means plus Gaussian noise scaled relative to the mean pairwise
// class-mean distance (so difficulty does not depend on the dimensions).
inline LabeledDataset generate_synthetic(const SyntheticSpec& spec, SyntheticDetails* details = nullptr) {
    if (spec.num_classes < 2) throw data_error("InvalidSpec", "num_classes must be >= 2");
    if (spec.per_class < 1) throw data_error("InvalidSpec", "per_class must be >= 1");
    if (spec.d_s < 1 || spec.d_v < spec.d_s) throw data_error("InvalidSpec", "need d_v >= d_s >= 1");
    if (spec.noise_scale < 0.0 || !std::isfinite(spec.noise_scale)) {
        throw data_error("InvalidSpec", "noise_scale must be finite and non-negative");
    }
    if (!(spec.unseen_fraction > 0.0 && spec.unseen_fraction < 1.0)) {
        throw data_error("InvalidSpec", "unseen_fraction must lie in (0,1)");
    }
    const std::size_t n_unseen =
        static_cast<std::size_t>(std::ceil(static_cast<double>(spec.num_classes) * spec.unseen_fraction));
    if (n_unseen < 1 || n_unseen >= spec.num_classes) {
        throw data_error("InvalidSpec", "unseen_fraction leaves an empty side of the split");
    }

    std::size_t label_width = 1;
    for (std::size_t v = spec.num_classes - 1; v >= 10; v /= 10) ++label_width;
    auto pad = [](std::size_t value, std::size_t width) {
        std::string s = std::to_string(value);
        return std::string(width > s.size() ? width - s.size() : 0, '0') + s;
    };
    std::vector<std::string> labels;
    for (std::size_t c = 0; c < spec.num_classes; ++c) labels.push_back("class_" + pad(c, label_width));

    SeededRng embed_rng(derive_seed(spec.seed, 1));
    ClassEmbeddingTable table;
    table.dim = spec.d_s;
    for (const auto& label : labels) {
        Vector a(spec.d_s);
        for (double& x : a) x = embed_rng.normal();
        if (norm(a) == 0.0) a[0] = 1.0;  // vanishing draw is astronomically unlikely; keep the invariant anyway
        table.entries.emplace(label, std::move(a));
    }

    SeededRng map_rng(derive_seed(spec.seed, 2));
    Matrix semantic_to_visual(spec.d_v, spec.d_s);
    for (double& x : semantic_to_visual.data) x = map_rng.normal();

    std::map<std::string, Vector> class_means;
    for (const auto& label : labels) {
        const Vector& a = table.at(label);
        Vector mean(spec.d_v, 0.0);
        for (std::size_t r = 0; r < spec.d_v; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < spec.d_s; ++c) s += semantic_to_visual(r, c) * a[c];
            mean[r] = s;
        }
        class_means.emplace(label, std::move(mean));
    }

    double pair_sum = 0.0;
    std::size_t pair_count = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (std::size_t j = i + 1; j < labels.size(); ++j) {
            pair_sum += euclidean_distance(class_means.at(labels[i]), class_means.at(labels[j]));
            ++pair_count;
        }
    }
    const double sigma = spec.noise_scale * pair_sum / static_cast<double>(pair_count);

    SeededRng split_rng(derive_seed(spec.seed, 3));
    std::vector<std::string> shuffled = labels;
    split_rng.shuffle(shuffled);
    ClassSplit split;
    for (std::size_t i = 0; i < shuffled.size(); ++i) {
        (i < n_unseen ? split.unseen : split.seen).insert(shuffled[i]);
    }

    std::size_t id_width = 1;
    for (std::size_t v = spec.per_class - 1; v >= 10; v /= 10) ++id_width;
    SeededRng noise_rng(derive_seed(spec.seed, 4));
    std::vector<Instance> instances;
    instances.reserve(spec.num_classes * spec.per_class);
    for (const auto& label : labels) {
        const Vector& mean = class_means.at(label);
        for (std::size_t i = 0; i < spec.per_class; ++i) {
            Instance inst;
            inst.id = label + "_" + pad(i, id_width);
            inst.class_label = label;
            inst.features.resize(spec.d_v);
            for (std::size_t d = 0; d < spec.d_v; ++d) inst.features[d] = mean[d] + sigma * noise_rng.normal();
            instances.push_back(std::move(inst));
        }
    }

    if (details) {
        details->semantic_to_visual = semantic_to_visual;
        details->class_means = class_means;
        details->noise_sigma = sigma;
    }
    return validate_dataset(std::move(instances), std::move(table), std::move(split));
}

inline void save_instances(std::ostream& out, const std::vector<Instance>& instances) {
    for (const auto& inst : instances) {
        out << inst.id << '\t' << inst.class_label << '\t' << join_doubles(inst.features) << '\n';
    }
}

inline void save_embeddings(std::ostream& out, const ClassEmbeddingTable& table) {
    for (const auto& [label, values] : table.entries) {
        out << label << '\t' << join_doubles(values) << '\n';
    }
}

inline void save_split(std::ostream& out, const ClassSplit& split) {
    auto write_side = [&](const char* prefix, const std::set<std::string>& labels) {
        out << prefix << '\t';
        bool first = true;
        for (const auto& label : labels) {
            if (!first) out << ',';
            out << label;
            first = false;
        }
        out << '\n';
    };
    write_side("seen:", split.seen);
    write_side("unseen:", split.unseen);
}

}  // namespace claster
