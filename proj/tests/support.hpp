#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "claster/common.hpp"
#include "claster/neural.hpp"

namespace test_support {

// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        const auto base = std::filesystem::temp_directory_path();
        path_ = base / ("claster_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// MLP computing the identity map: hidden layer splits positive and negative
// parts so the rectifier never clips.
inline claster::MlpParams identity_mlp(std::size_t dim) {
    claster::MlpParams mlp;
    mlp.layer1.weights = claster::Matrix(2 * dim, dim);
    mlp.layer1.bias.assign(2 * dim, 0.0);
    mlp.layer2.weights = claster::Matrix(dim, 2 * dim);
    mlp.layer2.bias.assign(dim, 0.0);
    for (std::size_t d = 0; d < dim; ++d) {
        mlp.layer1.weights(d, d) = 1.0;
        mlp.layer1.weights(dim + d, d) = -1.0;
        mlp.layer2.weights(d, d) = 1.0;
        mlp.layer2.weights(d, dim + d) = -1.0;
    }
    return mlp;
}

inline claster::MlpParams random_mlp(std::size_t in, std::size_t hidden, std::size_t out, std::uint64_t seed,
                                     double scale = 0.7) {
    claster::SeededRng rng(seed);
    claster::MlpParams mlp;
    mlp.layer1.weights = claster::Matrix(hidden, in);
    mlp.layer1.bias.resize(hidden);
    mlp.layer2.weights = claster::Matrix(out, hidden);
    mlp.layer2.bias.resize(out);
    for (double& w : mlp.layer1.weights.data) w = scale * rng.normal();
    for (double& b : mlp.layer1.bias) b = scale * rng.normal();
    for (double& w : mlp.layer2.weights.data) w = scale * rng.normal();
    for (double& b : mlp.layer2.bias) b = scale * rng.normal();
    return mlp;
}

inline claster::ClassifierParams random_classifier(std::size_t length, std::size_t channels, std::size_t hidden,
                                                   std::size_t out, std::uint64_t seed, std::size_t kernel = 3) {
    claster::SeededRng rng(seed);
    claster::ClassifierParams params;
    params.conv1.in_channels = 1;
    params.conv1.out_channels = channels;
    params.conv1.kernel_size = kernel;
    params.conv1.weights.resize(channels * kernel);
    params.conv1.bias.resize(channels);
    params.conv2.in_channels = channels;
    params.conv2.out_channels = channels;
    params.conv2.kernel_size = kernel;
    params.conv2.weights.resize(channels * channels * kernel);
    params.conv2.bias.resize(channels);
    params.fc1.weights = claster::Matrix(hidden, channels * length);
    params.fc1.bias.resize(hidden);
    params.fc2.weights = claster::Matrix(out, hidden);
    params.fc2.bias.resize(out);
    for (auto& view : claster::tensor_views(params, "r")) {
        for (double& x : *view.values) x = 0.5 * rng.normal();
    }
    return params;
}

inline claster::Vector random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    claster::SeededRng rng(seed);
    claster::Vector v(n);
    for (double& x : v) x = scale * rng.normal();
    return v;
}

// Central finite difference of a scalar function at x.
template <class F>
inline double central_difference(F&& f, double& x, double h = 1e-6) {
    const double saved = x;
    x = saved + h;
    const double up = f();
    x = saved - h;
    const double down = f();
    x = saved;
    return (up - down) / (2.0 * h);
}

inline double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
    return std::abs(analytic - numeric) / denom;
}

}  // namespace test_support
