#include "splitfed/nn.hpp"

#include "splitfed/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace splitfed::nn {

namespace {

double activate(Activation act, double z)
{
    switch (act) {
    case Activation::Identity: return z;
    case Activation::ReLU: return z > 0.0 ? z : 0.0;
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
    }
    return z;
}

// Derivative given both the affine input and the activated output.
double activation_slope(Activation act, double z, double a)
{
    switch (act) {
    case Activation::Identity: return 1.0;
    case Activation::ReLU: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid: return a * (1.0 - a);
    }
    return 1.0;
}

void check_cut(const ModelSpec& spec, CutPoint cut)
{
    spec.validate();
    if (cut.index < 1 || cut.index + 1 > spec.layer_count())
        throw CutOutOfRange("cut index " + std::to_string(cut.index) + " outside [1, " +
                            std::to_string(spec.layer_count()) + " - 1]");
}

void check_input(const Matrix& batch, std::size_t width, const char* what)
{
    if (batch.cols != width || batch.data.size() != batch.rows * batch.cols)
        throw ShapeMismatch(std::string(what) + " has width " + std::to_string(batch.cols) +
                            ", expected " + std::to_string(width));
}

// Runs weight layers [first, last). `params` starts at layer_offset(first).
ForwardTrace forward_layers(const ModelSpec& spec, std::size_t first, std::size_t last,
                            std::span<const double> params, const Matrix& input)
{
    if (params.size() != layer_offset(spec, last) - layer_offset(spec, first))
        throw ShapeMismatch("parameter vector has length " + std::to_string(params.size()) +
                            ", expected " +
                            std::to_string(layer_offset(spec, last) - layer_offset(spec, first)));
    check_input(input, spec.layer_widths[first], "input batch");

    ForwardTrace trace;
    trace.post.push_back(input);
    std::size_t offset = 0;
    for (std::size_t layer = first; layer < last; ++layer) {
        const std::size_t in = spec.layer_widths[layer];
        const std::size_t out = spec.layer_widths[layer + 1];
        const bool hidden = layer + 1 < spec.layer_count();
        const double* weights = params.data() + offset;
        const double* bias = weights + in * out;
        const Matrix& prev = trace.post.back();

        Matrix z(prev.rows, out);
        Matrix a(prev.rows, out);
        for (std::size_t b = 0; b < prev.rows; ++b) {
            for (std::size_t j = 0; j < out; ++j) {
                double sum = bias[j];
                for (std::size_t i = 0; i < in; ++i)
                    sum += weights[j * in + i] * prev(b, i);
                z(b, j) = sum;
                a(b, j) = hidden ? activate(spec.activation, sum) : sum;
            }
        }
        trace.pre.push_back(std::move(z));
        trace.post.push_back(std::move(a));
        offset += in * out + out;
    }
    return trace;
}

// Reverse pass over weight layers [first, last) given d loss / d output.
// Fills `grads` (same layout as `params`) and returns d loss / d input.
Matrix backprop_layers(const ModelSpec& spec, std::size_t first, std::size_t last,
                       std::span<const double> params, const ForwardTrace& trace,
                       Matrix output_grad, ParamVector& grads, std::vector<Matrix>* boundary_grads)
{
    grads.assign(params.size(), 0.0);
    if (boundary_grads)
        boundary_grads->assign(last - first + 1, Matrix{});

    Matrix upstream = std::move(output_grad);
    for (std::size_t layer = last; layer-- > first;) {
        const std::size_t local = layer - first;
        const std::size_t in = spec.layer_widths[layer];
        const std::size_t out = spec.layer_widths[layer + 1];
        const bool hidden = layer + 1 < spec.layer_count();
        const std::size_t offset = layer_offset(spec, layer) - layer_offset(spec, first);
        const double* weights = params.data() + offset;
        double* weight_grad = grads.data() + offset;
        double* bias_grad = weight_grad + in * out;

        const Matrix& prev = trace.post[local];
        const Matrix& z = trace.pre[local];
        const Matrix& a = trace.post[local + 1];

        Matrix delta = upstream;
        if (hidden)
            for (std::size_t idx = 0; idx < delta.data.size(); ++idx)
                delta.data[idx] *= activation_slope(spec.activation, z.data[idx], a.data[idx]);

        Matrix downstream(prev.rows, in);
        for (std::size_t b = 0; b < prev.rows; ++b) {
            for (std::size_t j = 0; j < out; ++j) {
                const double d = delta(b, j);
                bias_grad[j] += d;
                for (std::size_t i = 0; i < in; ++i) {
                    weight_grad[j * in + i] += d * prev(b, i);
                    downstream(b, i) += weights[j * in + i] * d;
                }
            }
        }
        if (boundary_grads)
            (*boundary_grads)[local + 1] = std::move(upstream);
        upstream = std::move(downstream);
    }
    if (boundary_grads)
        (*boundary_grads)[0] = upstream;
    return upstream;
}

Matrix loss_grad(const Matrix& outputs, const Matrix& labels)
{
    if (outputs.rows != labels.rows || outputs.cols != labels.cols)
        throw ShapeMismatch("labels shape does not match the network output");
    Matrix grad(outputs.rows, outputs.cols);
    const double scale = outputs.data.empty() ? 0.0 : 2.0 / static_cast<double>(outputs.data.size());
    for (std::size_t i = 0; i < grad.data.size(); ++i)
        grad.data[i] = scale * (outputs.data[i] - labels.data[i]);
    return grad;
}

} // namespace

Activation parse_activation(std::string_view text)
{
    if (text == "identity" || text == "Identity")
        return Activation::Identity;
    if (text == "relu" || text == "ReLU")
        return Activation::ReLU;
    if (text == "sigmoid" || text == "Sigmoid")
        return Activation::Sigmoid;
    throw ConfigError("unknown activation '" + std::string(text) + "'");
}

void ModelSpec::validate() const
{
    if (layer_widths.size() < 2)
        throw ShapeMismatch("a model needs at least an input and an output width");
    for (const std::size_t w : layer_widths)
        if (w == 0)
            throw ShapeMismatch("layer widths must be positive");
}

std::uint64_t param_count(const ModelSpec& spec)
{
    spec.validate();
    return layer_offset(spec, spec.layer_count());
}

std::size_t layer_offset(const ModelSpec& spec, std::size_t layer)
{
    std::size_t offset = 0;
    for (std::size_t l = 0; l < layer; ++l)
        offset += spec.layer_widths[l] * spec.layer_widths[l + 1] + spec.layer_widths[l + 1];
    return offset;
}

CutStats cut_stats(const ModelSpec& spec, CutPoint cut)
{
    check_cut(spec, cut);
    return CutStats{spec.layer_widths[cut.index], layer_offset(spec, cut.index), param_count(spec)};
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed)
{
    spec.validate();
    SplitMix64 rng(seed);
    ParamVector params;
    params.reserve(param_count(spec));
    for (std::size_t layer = 0; layer < spec.layer_count(); ++layer) {
        const std::size_t in = spec.layer_widths[layer];
        const std::size_t out = spec.layer_widths[layer + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        for (std::size_t i = 0; i < in * out + out; ++i)
            params.push_back(rng.next_symmetric(bound));
    }
    return params;
}

ForwardTrace forward(const ModelSpec& spec, std::span<const double> params, const Matrix& batch)
{
    spec.validate();
    return forward_layers(spec, 0, spec.layer_count(), params, batch);
}

Matrix forward_front(const ModelSpec& spec, CutPoint cut, std::span<const double> client_params,
                     const Matrix& batch)
{
    check_cut(spec, cut);
    return forward_layers(spec, 0, cut.index, client_params, batch).post.back();
}

Matrix forward_back(const ModelSpec& spec, CutPoint cut, std::span<const double> server_params,
                    const Matrix& smashed)
{
    check_cut(spec, cut);
    return forward_layers(spec, cut.index, spec.layer_count(), server_params, smashed).post.back();
}

double mse(const Matrix& outputs, const Matrix& labels)
{
    if (outputs.rows != labels.rows || outputs.cols != labels.cols)
        throw ShapeMismatch("labels shape does not match the network output");
    if (outputs.data.empty())
        return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < outputs.data.size(); ++i) {
        const double diff = outputs.data[i] - labels.data[i];
        sum += diff * diff;
    }
    return sum / static_cast<double>(outputs.data.size());
}

Gradient backward(const ModelSpec& spec, std::span<const double> params, const Matrix& batch,
                  const Matrix& labels)
{
    spec.validate();
    check_input(labels, spec.output_width(), "label batch");
    const ForwardTrace trace = forward_layers(spec, 0, spec.layer_count(), params, batch);
    Gradient out;
    out.loss = mse(trace.output(), labels);
    backprop_layers(spec, 0, spec.layer_count(), params, trace, loss_grad(trace.output(), labels),
                    out.params, &out.activation_grads);
    return out;
}

ServerGradient backward_back(const ModelSpec& spec, CutPoint cut,
                             std::span<const double> server_params, const Matrix& smashed,
                             const Matrix& labels)
{
    check_cut(spec, cut);
    check_input(labels, spec.output_width(), "label batch");
    const std::size_t last = spec.layer_count();
    const ForwardTrace trace = forward_layers(spec, cut.index, last, server_params, smashed);
    ServerGradient out;
    out.loss = mse(trace.output(), labels);
    out.smashed_grad = backprop_layers(spec, cut.index, last, server_params, trace,
                                       loss_grad(trace.output(), labels), out.params, nullptr);
    return out;
}

ParamVector backward_front(const ModelSpec& spec, CutPoint cut,
                           std::span<const double> client_params, const Matrix& batch,
                           const Matrix& smashed_grad)
{
    check_cut(spec, cut);
    const ForwardTrace trace = forward_layers(spec, 0, cut.index, client_params, batch);
    if (smashed_grad.rows != batch.rows || smashed_grad.cols != spec.layer_widths[cut.index])
        throw ShapeMismatch("gradient at the cut does not match the smashed activations");
    ParamVector grads;
    backprop_layers(spec, 0, cut.index, client_params, trace, smashed_grad, grads, nullptr);
    return grads;
}

ParamVector sgd_step(std::span<const double> params, std::span<const double> grads, double lr)
{
    if (params.size() != grads.size())
        throw LengthMismatch("parameter and gradient lengths differ");
    ParamVector out(params.size());
    for (std::size_t i = 0; i < params.size(); ++i)
        out[i] = params[i] - lr * grads[i];
    return out;
}

ParamVector average_params(std::span<const ParamVector> vectors)
{
    if (vectors.empty())
        throw EmptyList("cannot average an empty list of parameter vectors");
    const ParamVector& first = vectors.front();
    for (const ParamVector& v : vectors)
        if (v.size() != first.size())
            throw LengthMismatch("parameter vectors have different lengths");

    const auto count = static_cast<double>(vectors.size());
    ParamVector out(first.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        double shift = 0.0;
        for (std::size_t k = 1; k < vectors.size(); ++k)
            shift += vectors[k][i] - first[i];
        out[i] = first[i] + shift / count;
    }
    return out;
}

std::pair<ParamVector, ParamVector> split_params(const ModelSpec& spec, CutPoint cut,
                                                 std::span<const double> params)
{
    const CutStats stats = cut_stats(spec, cut);
    if (params.size() != stats.total_params)
        throw LengthMismatch("parameter vector length does not match the model");
    const auto boundary = params.begin() + static_cast<std::ptrdiff_t>(stats.client_params);
    return {ParamVector(params.begin(), boundary), ParamVector(boundary, params.end())};
}

ParamVector join_params(std::span<const double> client, std::span<const double> server)
{
    ParamVector out(client.begin(), client.end());
    out.insert(out.end(), server.begin(), server.end());
    return out;
}

std::pair<Matrix, Matrix> make_batch(const ModelSpec& spec, std::span<const Record> records)
{
    Matrix inputs(records.size(), spec.input_width());
    Matrix labels(records.size(), spec.output_width());
    for (std::size_t r = 0; r < records.size(); ++r) {
        const Record& rec = records[r];
        if (rec.input.size() != spec.input_width() || rec.label.size() != spec.output_width())
            throw ShapeMismatch("record " + std::to_string(r) + " does not match the model widths");
        std::copy(rec.input.begin(), rec.input.end(), inputs.data.begin() + r * inputs.cols);
        std::copy(rec.label.begin(), rec.label.end(), labels.data.begin() + r * labels.cols);
    }
    return {std::move(inputs), std::move(labels)};
}

double sgd_epoch(const ModelSpec& spec, ParamVector& params, std::span<const Record> records,
                 double lr, std::size_t batch_size)
{
    if (batch_size == 0)
        throw InvalidParam("batch size must be at least 1");
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < records.size(); start += batch_size) {
        const auto chunk = records.subspan(start, std::min(batch_size, records.size() - start));
        const auto [inputs, labels] = make_batch(spec, chunk);
        const Gradient grad = backward(spec, params, inputs, labels);
        params = sgd_step(params, grad.params, lr);
        loss_sum += grad.loss * static_cast<double>(chunk.size());
    }
    return records.empty() ? 0.0 : loss_sum / static_cast<double>(records.size());
}

} // namespace splitfed::nn
