#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace gfm::nn {

enum class Activation { identity, relu, elu };
enum class InitScheme { std_normal, xavier_uniform, xavier_normal };

std::string_view to_string(Activation a);
std::string_view to_string(InitScheme s);
Activation parse_activation(std::string_view name);
InitScheme parse_init_scheme(std::string_view name);

/// Shape of a dense network. `hidden_sizes` lists hidden layers only; a final
/// linear layer (last hidden -> output_dim) is always appended, and the
/// activation is applied after every layer except that one.
struct NetSpec {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden_sizes;
    std::size_t output_dim = 1;
    Activation activation = Activation::relu;

    /// input_dim, hidden_sizes..., output_dim
    std::vector<std::size_t> layer_sizes() const;
    std::size_t layer_count() const { return hidden_sizes.size() + 1; }
    void validate() const;

    friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

/// Offsets of one layer inside the flat parameter vector. Weights are stored
/// input-major: weight(i, o) = values[weight_offset + i * fan_out + o],
/// followed by fan_out biases.
struct LayerSlot {
    std::size_t fan_in;
    std::size_t fan_out;
    std::size_t weight_offset;
    std::size_t bias_offset;
};

std::size_t param_count(const NetSpec& spec);
std::vector<LayerSlot> param_layout(const NetSpec& spec);

struct DenseLayer {
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    std::vector<double> weight;  // fan_in x fan_out, input-major
    std::vector<double> bias;    // fan_out
};

std::vector<DenseLayer> unflatten(const NetSpec& spec, std::span<const double> params);
std::vector<double> flatten(const NetSpec& spec, const std::vector<DenseLayer>& layers);

/// std_normal: every entry (biases included) ~ N(0, 1).
/// xavier_uniform: weights ~ U(+-sqrt(6 / (fan_in + fan_out))), biases 0.
/// xavier_normal: weights ~ N(0, 2 / (fan_in + fan_out)), biases 0.
std::vector<double> init_params(const NetSpec& spec, InitScheme scheme, std::uint64_t seed);

/// Row-major batch of vectors: rows() samples, cols() features each.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

/// Intermediate values kept by a recording forward pass for the reverse sweep.
struct Tape {
    std::vector<Matrix> inputs;          // input to each layer
    std::vector<Matrix> pre_activation;  // affine output of each layer
};

std::vector<double> forward(const NetSpec& spec, std::span<const double> params,
                            std::span<const double> x);
Matrix forward(const NetSpec& spec, std::span<const double> params, const Matrix& xs);
Matrix forward(const NetSpec& spec, std::span<const double> params, const Matrix& xs, Tape& tape);

/// Reverse sweep for a recorded batch. Adds dL/dparams into `grad` (length
/// param_count) and returns dL/dinput for every row.
Matrix backward(const NetSpec& spec, std::span<const double> params, const Tape& tape,
                const Matrix& d_output, std::span<double> grad);

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

/// Mean over the batch of the squared output error, summed across output
/// coordinates (for the scalar-output task models this is the usual MSE).
double mse_loss(const NetSpec& spec, std::span<const double> params, const Matrix& xs,
                const Matrix& ys);
LossGrad loss_and_grad(const NetSpec& spec, std::span<const double> params, const Matrix& xs,
                       const Matrix& ys);

}  // namespace gfm::nn
