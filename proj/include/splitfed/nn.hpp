#pragma once

// A small dense feed-forward network with exact reverse-mode gradients.
//
// Parameters are stored flat, layer-major, weights (row-major, out x in)
// then biases for each layer. Hidden layers share one activation; the
// output layer is linear and the loss is mean squared error over every
// output element of the batch.

#include "splitfed/cost_model.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace splitfed::nn {

enum class Activation { Identity, ReLU, Sigmoid };

Activation parse_activation(std::string_view text);

struct ModelSpec {
    std::vector<std::size_t> layer_widths;   // input first, output last
    Activation activation = Activation::Identity;

    /// Throws ShapeMismatch unless there are >= 2 positive widths.
    void validate() const;
    std::size_t layer_count() const { return layer_widths.size() - 1; }
    std::size_t input_width() const { return layer_widths.front(); }
    std::size_t output_width() const { return layer_widths.back(); }
};

using ParamVector = std::vector<double>;

std::uint64_t param_count(const ModelSpec& spec);

/// Offset of the first parameter of weight layer `layer` (0-based); for
/// layer == layer_count() this is the total parameter count.
std::size_t layer_offset(const ModelSpec& spec, std::size_t layer);

/// Client holds weight layers 1..index, the server the rest.
struct CutPoint {
    std::size_t index = 1;
};

struct CutStats {
    std::size_t smashed_size = 0;       // q
    std::uint64_t client_params = 0;    // eta * N, exact
    std::uint64_t total_params = 0;     // N

    cost::ClientFraction client_fraction() const
    {
        return cost::ClientFraction::exact(client_params, total_params);
    }
};

/// Throws CutOutOfRange unless 1 <= cut.index <= layer_count() - 1.
CutStats cut_stats(const ModelSpec& spec, CutPoint cut);

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next()
    {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform in [-bound, bound).
    double next_symmetric(double bound) { return (2.0 * next_unit() - 1.0) * bound; }

private:
    std::uint64_t state_;
};

/// Every scalar uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], drawn in
/// parameter order from a splitmix64 stream.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Activations of every layer boundary: post[0] is the input, post[i] the
/// output of weight layer i. pre[i - 1] holds the matching affine values.
struct ForwardTrace {
    std::vector<Matrix> pre;
    std::vector<Matrix> post;

    const Matrix& output() const { return post.back(); }
};

ForwardTrace forward(const ModelSpec& spec, std::span<const double> params, const Matrix& batch);

/// Client part of forward; returns the smashed activations (batch x q).
Matrix forward_front(const ModelSpec& spec, CutPoint cut, std::span<const double> client_params,
                     const Matrix& batch);

/// Server part of forward, from smashed activations to outputs.
Matrix forward_back(const ModelSpec& spec, CutPoint cut, std::span<const double> server_params,
                    const Matrix& smashed);

double mse(const Matrix& outputs, const Matrix& labels);

struct Gradient {
    ParamVector params;
    std::vector<Matrix> activation_grads;   // d loss / d post[i], i = 0..layer_count()
    double loss = 0.0;
};

Gradient backward(const ModelSpec& spec, std::span<const double> params, const Matrix& batch,
                  const Matrix& labels);

struct ServerGradient {
    ParamVector params;     // server-side parameter gradient
    Matrix smashed_grad;    // gradient sent back across the cut (batch x q)
    double loss = 0.0;
};

ServerGradient backward_back(const ModelSpec& spec, CutPoint cut,
                             std::span<const double> server_params, const Matrix& smashed,
                             const Matrix& labels);

/// Client-side parameter gradient given the gradient at the cut.
ParamVector backward_front(const ModelSpec& spec, CutPoint cut,
                           std::span<const double> client_params, const Matrix& batch,
                           const Matrix& smashed_grad);

ParamVector sgd_step(std::span<const double> params, std::span<const double> grads, double lr);

/// Elementwise mean. Computed as first + mean(v - first), which keeps the
/// mean of identical vectors bit-identical to the input.
ParamVector average_params(std::span<const ParamVector> vectors);

/// (client part, server part) of a full parameter vector.
std::pair<ParamVector, ParamVector> split_params(const ModelSpec& spec, CutPoint cut,
                                                 std::span<const double> params);
ParamVector join_params(std::span<const double> client, std::span<const double> server);

struct Record {
    std::vector<double> input;
    std::vector<double> label;
};

/// Stacks records into (inputs, labels) matrices.
std::pair<Matrix, Matrix> make_batch(const ModelSpec& spec, std::span<const Record> records);

/// One pass of minibatch SGD over `records` in order. Returns the
/// record-weighted mean loss (0 for an empty span).
double sgd_epoch(const ModelSpec& spec, ParamVector& params, std::span<const Record> records,
                 double lr, std::size_t batch_size);

} // namespace splitfed::nn
