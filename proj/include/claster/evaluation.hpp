#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "claster/common.hpp"

namespace claster {

struct AccuracyReport {
    std::map<std::string, double> per_class;                       // label -> accuracy
    std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // label -> (correct, total)
    std::vector<std::string> missing_classes;                      // listed classes with no instances
    double mean_class_accuracy = 0.0;
    std::size_t n_instances = 0;
};

// Macro accuracy: per-class correct/total, averaged with equal class weight.
// Classes without instances are excluded from the mean and listed.
inline AccuracyReport per_class_accuracy(const std::vector<std::string>& predictions,
                                         const std::vector<std::string>& truths,
                                         const std::set<std::string>& class_set) {
    if (predictions.empty() || predictions.size() != truths.size()) {
        throw data_error("EmptyInput", "predictions and truths must be equal-length and non-empty");
    }
    AccuracyReport report;
    report.n_instances = truths.size();
    std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
    for (const auto& label : class_set) counts[label] = {0, 0};
    for (std::size_t i = 0; i < truths.size(); ++i) {
        auto it = counts.find(truths[i]);
        if (it == counts.end()) throw data_error("UnknownClass", "truth label '" + truths[i] + "' not in class set");
        it->second.second += 1;
        if (predictions[i] == truths[i]) it->second.first += 1;
    }
    double sum = 0.0;
    std::size_t present = 0;
    for (const auto& [label, count] : counts) {
        if (count.second == 0) {
            report.missing_classes.push_back(label);
            continue;
        }
        const double acc = static_cast<double>(count.first) / static_cast<double>(count.second);
        report.per_class[label] = acc;
        report.counts[label] = count;
        sum += acc;
        present += 1;
    }
    report.mean_class_accuracy = present > 0 ? sum / static_cast<double>(present) : 0.0;
    return report;
}

// 2us/(u+s), or 0 when both are 0. Accepts fractions or percentages since the
// formula is scale-equivariant; rejects negative values and anything over 100.
inline double harmonic_mean(double u, double s) {
    if (!std::isfinite(u) || !std::isfinite(s) || u < 0.0 || s < 0.0 || u > 100.0 || s > 100.0) {
        throw data_error("OutOfRange", "harmonic_mean arguments must lie in [0,100]");
    }
    if (u + s == 0.0) return 0.0;
    return 2.0 * u * s / (u + s);
}

struct GzslReport {
    double u = 0.0;
    double s = 0.0;
    double H = 0.0;
};

struct PairedTTestResult {
    double mean_diff = 0.0;
    double std_diff = 0.0;
    std::size_t n = 0;
    double t_value = 0.0;
    bool significant_at_0_05 = false;
};

// Two-tailed critical value at 0.05. Exact for df <= 30; above that the value
// of the largest tabulated df not exceeding the actual df is used.
inline double t_critical_0_05(std::size_t df) {
    static const double table_1_30[30] = {
        12.706205, 4.302653, 3.182446, 2.776445, 2.570582, 2.446912, 2.364624, 2.306004, 2.262157, 2.228139,
        2.200985,  2.178813, 2.160369, 2.144787, 2.131450, 2.119905, 2.109816, 2.100922, 2.093024, 2.085963,
        2.079614,  2.073873, 2.068658, 2.063899, 2.059539, 2.055529, 2.051831, 2.048407, 2.045230, 2.042272};
    if (df == 0) throw data_error("TooFewSamples", "t critical value needs df >= 1");
    if (df <= 30) return table_1_30[df - 1];
    if (df < 60) return 2.021075;   // df 40
    if (df < 80) return 2.000298;   // df 60
    if (df < 100) return 1.990063;  // df 80
    if (df < 120) return 1.983972;  // df 100
    if (df < 1000) return 1.979930; // df 120
    return 1.960;
}

// Dependent t-test for paired samples against mu0 = 0, with the n-1
// denominator in the standard deviation.
inline PairedTTestResult paired_ttest(const Vector& diffs) {
    if (diffs.size() < 2) throw data_error("TooFewSamples", "paired t-test needs n >= 2");
    PairedTTestResult result;
    result.n = diffs.size();
    double mean = 0.0;
    for (double d : diffs) mean += d;
    mean /= static_cast<double>(diffs.size());
    double ss = 0.0;
    for (double d : diffs) ss += (d - mean) * (d - mean);
    const double variance = ss / static_cast<double>(diffs.size() - 1);
    result.mean_diff = mean;
    result.std_diff = std::sqrt(variance);
    if (result.std_diff == 0.0) {
        throw data_error("ZeroVariance", "all paired differences are equal; t is undefined");
    }
    result.t_value = mean / (result.std_diff / std::sqrt(static_cast<double>(diffs.size())));
    result.significant_at_0_05 = std::abs(result.t_value) > t_critical_0_05(diffs.size() - 1);
    return result;
}

struct EvalReport {
    std::vector<std::pair<std::string, std::string>> config_echo;
    std::optional<AccuracyReport> zsl;
    std::optional<GzslReport> gzsl;
    std::optional<double> purity_before;
    std::optional<double> purity_after;
    std::optional<double> purity_value;
    std::optional<std::map<std::string, std::vector<double>>> histogram;
    std::optional<PairedTTestResult> ttest;
    std::map<std::string, double> per_class;  // trailing raw per-class block
};

namespace detail {

inline std::string fixed4(double v) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.4f", v);
    return buffer;
}

inline std::string join_fixed4(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out.push_back(',');
        out += fixed4(values[i]);
    }
    return out;
}

}  // namespace detail

// Machine-parseable `section.key = value` lines; sections that were not
// computed are omitted.
inline void emit_report(const EvalReport& report, std::ostream& out) {
    for (const auto& [key, value] : report.config_echo) out << "config." << key << " = " << value << '\n';
    if (report.zsl) {
        out << "zsl.mean_class_accuracy = " << detail::fixed4(report.zsl->mean_class_accuracy) << '\n';
        out << "zsl.n_instances = " << report.zsl->n_instances << '\n';
        if (!report.zsl->missing_classes.empty()) {
            out << "zsl.excluded_classes = ";
            for (std::size_t i = 0; i < report.zsl->missing_classes.size(); ++i) {
                if (i > 0) out << ',';
                out << report.zsl->missing_classes[i];
            }
            out << '\n';
        }
    }
    if (report.gzsl) {
        out << "gzsl.u = " << detail::fixed4(report.gzsl->u) << '\n';
        out << "gzsl.s = " << detail::fixed4(report.gzsl->s) << '\n';
        out << "gzsl.H = " << detail::fixed4(report.gzsl->H) << '\n';
    }
    if (report.purity_before) out << "purity.before = " << detail::fixed4(*report.purity_before) << '\n';
    if (report.purity_after) out << "purity.after = " << detail::fixed4(*report.purity_after) << '\n';
    if (report.purity_value) out << "purity.value = " << detail::fixed4(*report.purity_value) << '\n';
    if (report.histogram) {
        for (const auto& [label, row] : *report.histogram) {
            out << "histogram." << label << " = " << detail::join_fixed4(row) << '\n';
        }
    }
    if (report.ttest) {
        out << "ttest.n = " << report.ttest->n << '\n';
        out << "ttest.mean_diff = " << detail::fixed4(report.ttest->mean_diff) << '\n';
        out << "ttest.std_diff = " << detail::fixed4(report.ttest->std_diff) << '\n';
        out << "ttest.t_value = " << detail::fixed4(report.ttest->t_value) << '\n';
        out << "ttest.significant_at_0.05 = " << (report.ttest->significant_at_0_05 ? "true" : "false") << '\n';
    }
    for (const auto& [label, acc] : report.per_class) {
        out << "per_class." << label << " = " << detail::fixed4(acc) << '\n';
    }
}

inline EvalReport parse_report(std::istream& in) {
    EvalReport report;
    std::string line;
    std::size_t line_no = 0;
    auto need_double = [&](const std::string& value) {
        double v = 0.0;
        if (!parse_double(value, v)) {
            throw data_error("MalformedRecord", "line " + std::to_string(line_no) + ": bad number '" + value + "'");
        }
        return v;
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::size_t eq = line.find(" = ");
        if (eq == std::string::npos) {
            throw data_error("MalformedRecord", "line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 3);
        if (key.rfind("config.", 0) == 0) {
            report.config_echo.emplace_back(key.substr(7), value);
        } else if (key == "zsl.mean_class_accuracy") {
            if (!report.zsl) report.zsl.emplace();
            report.zsl->mean_class_accuracy = need_double(value);
        } else if (key == "zsl.n_instances") {
            if (!report.zsl) report.zsl.emplace();
            report.zsl->n_instances = static_cast<std::size_t>(need_double(value));
        } else if (key == "zsl.excluded_classes") {
            if (!report.zsl) report.zsl.emplace();
            std::stringstream ss(value);
            std::string token;
            while (std::getline(ss, token, ',')) report.zsl->missing_classes.push_back(token);
        } else if (key == "gzsl.u" || key == "gzsl.s" || key == "gzsl.H") {
            if (!report.gzsl) report.gzsl.emplace();
            if (key == "gzsl.u") report.gzsl->u = need_double(value);
            if (key == "gzsl.s") report.gzsl->s = need_double(value);
            if (key == "gzsl.H") report.gzsl->H = need_double(value);
        } else if (key == "purity.before") {
            report.purity_before = need_double(value);
        } else if (key == "purity.after") {
            report.purity_after = need_double(value);
        } else if (key == "purity.value") {
            report.purity_value = need_double(value);
        } else if (key.rfind("histogram.", 0) == 0) {
            if (!report.histogram) report.histogram.emplace();
            std::vector<double> row;
            std::stringstream ss(value);
            std::string token;
            while (std::getline(ss, token, ',')) row.push_back(need_double(token));
            (*report.histogram)[key.substr(10)] = std::move(row);
        } else if (key == "ttest.n") {
            if (!report.ttest) report.ttest.emplace();
            report.ttest->n = static_cast<std::size_t>(need_double(value));
        } else if (key == "ttest.mean_diff") {
            if (!report.ttest) report.ttest.emplace();
            report.ttest->mean_diff = need_double(value);
        } else if (key == "ttest.std_diff") {
            if (!report.ttest) report.ttest.emplace();
            report.ttest->std_diff = need_double(value);
        } else if (key == "ttest.t_value") {
            if (!report.ttest) report.ttest.emplace();
            report.ttest->t_value = need_double(value);
        } else if (key == "ttest.significant_at_0.05") {
            if (!report.ttest) report.ttest.emplace();
            report.ttest->significant_at_0_05 = value == "true";
        } else if (key.rfind("per_class.", 0) == 0) {
            report.per_class[key.substr(10)] = need_double(value);
        } else {
            throw data_error("MalformedRecord", "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    return report;
}

}  // namespace claster
