#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "claster/common.hpp"
#include "claster/neural.hpp"

namespace claster {

struct NamedTensor {
    std::string name;
    std::vector<std::size_t> shape;
    Vector values;
};

namespace detail {

inline std::string shape_text(const std::vector<std::size_t>& shape) {
    std::string out;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out.push_back('x');
        out += std::to_string(shape[i]);
    }
    return out;
}

inline std::vector<std::size_t> parse_shape(const std::string& text) {
    std::vector<std::size_t> shape;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, 'x')) {
        std::size_t dim = 0;
        std::stringstream ts(token);
        ts >> dim;
        if (ts.fail() || !ts.eof() || dim == 0) {
            throw data_error("MalformedRecord", "bad tensor shape '" + text + "'");
        }
        shape.push_back(dim);
    }
    if (shape.empty()) throw data_error("MalformedRecord", "empty tensor shape");
    return shape;
}

inline std::size_t shape_volume(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

}  // namespace detail

// One line per tensor: `name<TAB>shape<TAB>comma-separated values` with
// shortest round-trip decimals; emitted in lexicographic name order.
inline void write_tensors(std::ostream& out, std::vector<NamedTensor> tensors) {
    std::sort(tensors.begin(), tensors.end(),
              [](const NamedTensor& a, const NamedTensor& b) { return a.name < b.name; });
    for (const auto& tensor : tensors) {
        out << tensor.name << '\t' << detail::shape_text(tensor.shape) << '\t' << join_doubles(tensor.values)
            << '\n';
    }
}

inline std::map<std::string, NamedTensor> read_tensors(std::istream& in) {
    std::map<std::string, NamedTensor> tensors;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream fields(line);
        NamedTensor tensor;
        std::string shape_field, values_field;
        if (!std::getline(fields, tensor.name, '\t') || !std::getline(fields, shape_field, '\t') ||
            !std::getline(fields, values_field)) {
            throw data_error("MalformedRecord", "tensor line " + std::to_string(line_no) + " is malformed");
        }
        tensor.shape = detail::parse_shape(shape_field);
        std::stringstream values(values_field);
        std::string token;
        while (std::getline(values, token, ',')) {
            double v = 0.0;
            if (!parse_double(token, v) || !std::isfinite(v)) {
                throw data_error("NonFiniteValue", "tensor '" + tensor.name + "' has an unparseable value");
            }
            tensor.values.push_back(v);
        }
        if (tensor.values.size() != detail::shape_volume(tensor.shape)) {
            throw data_error("DimensionMismatch", "tensor '" + tensor.name + "' value count does not match shape");
        }
        if (!tensors.emplace(tensor.name, std::move(tensor)).second) {
            throw data_error("DuplicateClass", "tensor line " + std::to_string(line_no) + " repeats a name");
        }
    }
    return tensors;
}

inline NamedTensor to_named_tensor(const ConstTensorView& view) {
    return {view.name, view.shape, *view.values};
}

inline const NamedTensor& require_tensor(const std::map<std::string, NamedTensor>& tensors,
                                         const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw data_error("MalformedRecord", "checkpoint is missing tensor '" + name + "'");
    return it->second;
}

}  // namespace claster
