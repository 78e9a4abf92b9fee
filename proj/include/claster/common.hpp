#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace claster {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vector data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

enum class ErrorCategory { usage, data, numeric, io };

// All library errors carry a stable code string (e.g. "DimensionMismatch")
// plus a category that the CLI maps onto exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), category_(category), code_(std::move(code)) {}

    ErrorCategory category() const { return category_; }
    const std::string& code() const { return code_; }

private:
    ErrorCategory category_;
    std::string code_;
};

inline Error usage_error(std::string code, const std::string& message) {
    return Error(ErrorCategory::usage, std::move(code), message);
}
inline Error data_error(std::string code, const std::string& message) {
    return Error(ErrorCategory::data, std::move(code), message);
}
inline Error numeric_error(std::string code, const std::string& message) {
    return Error(ErrorCategory::numeric, std::move(code), message);
}
inline Error io_error(std::string code, const std::string& message) {
    return Error(ErrorCategory::io, std::move(code), message);
}

// Shortest decimal string that parses back to exactly the same double.
inline std::string format_double(double value) {
    char buffer[64];
    auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

inline bool parse_double(std::string_view token, double& out) {
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto result = std::from_chars(first, last, out);
    return result.ec == std::errc() && result.ptr == last;
}

inline std::string join_doubles(const Vector& values, char sep = ',') {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out.push_back(sep);
        out += format_double(values[i]);
    }
    return out;
}

inline bool all_finite(const Vector& values) {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

inline double dot(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vector& a) { return std::sqrt(dot(a, a)); }

inline double squared_distance(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double euclidean_distance(const Vector& a, const Vector& b) {
    return std::sqrt(squared_distance(a, b));
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Decorrelated seed for a named sub-stream of a base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(base ^ splitmix64(stream + 0x51'7c'c1'b7'27'22'0a'95ULL));
}

// Deterministic RNG with hand-rolled draws so that generated fixtures do not
// depend on the standard library's distribution implementations.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x2545f4914f6cdd1dULL)) {}

    std::uint64_t next_u64() {
        state_ = splitmix64(state_);
        return state_;
    }

    // Uniform in [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        // Box-Muller; u1 in (0, 1] so the log is finite.
        const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        cached_ = radius * std::sin(angle);
        has_cached_ = true;
        return radius * std::cos(angle);
    }

    template <class T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[index(i)]);
        }
    }

private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace claster
