#include "gfm/smallnet.hpp"

#include <cmath>
#include <string>

#include "gfm/errors.hpp"
#include "gfm/rng.hpp"

namespace gfm::nn {

namespace {

constexpr double kEluAlpha = 1.0;

double activate(Activation a, double z) {
    switch (a) {
        case Activation::identity: return z;
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::elu: return z > 0.0 ? z : kEluAlpha * std::expm1(z);
    }
    return z;
}

double activate_derivative(Activation a, double z) {
    switch (a) {
        case Activation::identity: return 1.0;
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::elu: return z > 0.0 ? 1.0 : kEluAlpha * std::exp(z);
    }
    return 1.0;
}

void affine(const LayerSlot& slot, std::span<const double> params, const Matrix& in, Matrix& out) {
    const double* w = params.data() + slot.weight_offset;
    const double* b = params.data() + slot.bias_offset;
    out = Matrix(in.rows(), slot.fan_out);
    for (std::size_t r = 0; r < in.rows(); ++r) {
        double* o = out.row(r).data();
        for (std::size_t j = 0; j < slot.fan_out; ++j) o[j] = b[j];
        const double* x = in.row(r).data();
        for (std::size_t i = 0; i < slot.fan_in; ++i) {
            const double xi = x[i];
            const double* wi = w + i * slot.fan_out;
            for (std::size_t j = 0; j < slot.fan_out; ++j) o[j] += wi[j] * xi;
        }
    }
}

void check_params(const NetSpec& spec, std::span<const double> params) {
    if (params.size() != param_count(spec)) {
        throw ShapeError("parameter vector has length " + std::to_string(params.size()) +
                         ", network expects " + std::to_string(param_count(spec)));
    }
}

}  // namespace

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::elu: return "elu";
    }
    return "unknown";
}

std::string_view to_string(InitScheme s) {
    switch (s) {
        case InitScheme::std_normal: return "std_normal";
        case InitScheme::xavier_uniform: return "xavier_uniform";
        case InitScheme::xavier_normal: return "xavier_normal";
    }
    return "unknown";
}

Activation parse_activation(std::string_view name) {
    if (name == "identity") return Activation::identity;
    if (name == "relu") return Activation::relu;
    if (name == "elu") return Activation::elu;
    throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

InitScheme parse_init_scheme(std::string_view name) {
    if (name == "std_normal" || name == "normal") return InitScheme::std_normal;
    if (name == "xavier_uniform") return InitScheme::xavier_uniform;
    if (name == "xavier_normal") return InitScheme::xavier_normal;
    throw std::invalid_argument("unknown init scheme '" + std::string(name) + "'");
}

std::vector<std::size_t> NetSpec::layer_sizes() const {
    std::vector<std::size_t> sizes;
    sizes.reserve(hidden_sizes.size() + 2);
    sizes.push_back(input_dim);
    sizes.insert(sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
    sizes.push_back(output_dim);
    return sizes;
}

void NetSpec::validate() const {
    if (input_dim == 0 || output_dim == 0) throw ShapeError("network dimensions must be positive");
    for (auto h : hidden_sizes) {
        if (h == 0) throw ShapeError("hidden layer sizes must be positive");
    }
}

std::size_t param_count(const NetSpec& spec) {
    const auto sizes = spec.layer_sizes();
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) total += sizes[l] * sizes[l + 1] + sizes[l + 1];
    return total;
}

std::vector<LayerSlot> param_layout(const NetSpec& spec) {
    const auto sizes = spec.layer_sizes();
    std::vector<LayerSlot> slots;
    slots.reserve(sizes.size() - 1);
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        LayerSlot s{sizes[l], sizes[l + 1], offset, offset + sizes[l] * sizes[l + 1]};
        offset = s.bias_offset + s.fan_out;
        slots.push_back(s);
    }
    return slots;
}

std::vector<DenseLayer> unflatten(const NetSpec& spec, std::span<const double> params) {
    check_params(spec, params);
    std::vector<DenseLayer> layers;
    for (const auto& s : param_layout(spec)) {
        DenseLayer layer;
        layer.fan_in = s.fan_in;
        layer.fan_out = s.fan_out;
        const auto w = params.subspan(s.weight_offset, s.fan_in * s.fan_out);
        const auto b = params.subspan(s.bias_offset, s.fan_out);
        layer.weight.assign(w.begin(), w.end());
        layer.bias.assign(b.begin(), b.end());
        layers.push_back(std::move(layer));
    }
    return layers;
}

std::vector<double> flatten(const NetSpec& spec, const std::vector<DenseLayer>& layers) {
    const auto slots = param_layout(spec);
    if (layers.size() != slots.size()) throw ShapeError("layer count does not match network spec");
    std::vector<double> params(param_count(spec));
    for (std::size_t l = 0; l < slots.size(); ++l) {
        const auto& s = slots[l];
        const auto& layer = layers[l];
        if (layer.weight.size() != s.fan_in * s.fan_out || layer.bias.size() != s.fan_out) {
            throw ShapeError("layer " + std::to_string(l) + " has the wrong shape");
        }
        std::copy(layer.weight.begin(), layer.weight.end(), params.begin() + s.weight_offset);
        std::copy(layer.bias.begin(), layer.bias.end(), params.begin() + s.bias_offset);
    }
    return params;
}

std::vector<double> init_params(const NetSpec& spec, InitScheme scheme, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    std::vector<double> params(param_count(spec), 0.0);
    for (const auto& s : param_layout(spec)) {
        const double fan_sum = static_cast<double>(s.fan_in + s.fan_out);
        for (std::size_t k = 0; k < s.fan_in * s.fan_out; ++k) {
            double& w = params[s.weight_offset + k];
            switch (scheme) {
                case InitScheme::std_normal: w = rng.normal(); break;
                case InitScheme::xavier_uniform: {
                    const double bound = std::sqrt(6.0 / fan_sum);
                    w = rng.uniform(-bound, bound);
                    break;
                }
                case InitScheme::xavier_normal: w = rng.normal(0.0, std::sqrt(2.0 / fan_sum)); break;
            }
        }
        if (scheme == InitScheme::std_normal) {
            for (std::size_t j = 0; j < s.fan_out; ++j) params[s.bias_offset + j] = rng.normal();
        }
    }
    return params;
}

std::vector<double> forward(const NetSpec& spec, std::span<const double> params,
                            std::span<const double> x) {
    if (x.size() != spec.input_dim) {
        throw ShapeError("input has dimension " + std::to_string(x.size()) + ", network expects " +
                         std::to_string(spec.input_dim));
    }
    Matrix xs(1, x.size());
    std::copy(x.begin(), x.end(), xs.values().begin());
    return forward(spec, params, xs).values();
}

Matrix forward(const NetSpec& spec, std::span<const double> params, const Matrix& xs) {
    check_params(spec, params);
    if (xs.cols() != spec.input_dim) throw ShapeError("batch width does not match input_dim");
    const auto slots = param_layout(spec);
    Matrix current = xs;
    Matrix next;
    for (std::size_t l = 0; l < slots.size(); ++l) {
        affine(slots[l], params, current, next);
        if (l + 1 < slots.size()) {
            for (double& v : next.values()) v = activate(spec.activation, v);
        }
        std::swap(current, next);
    }
    return current;
}

Matrix forward(const NetSpec& spec, std::span<const double> params, const Matrix& xs, Tape& tape) {
    check_params(spec, params);
    if (xs.cols() != spec.input_dim) throw ShapeError("batch width does not match input_dim");
    const auto slots = param_layout(spec);
    tape.inputs.resize(slots.size());
    tape.pre_activation.resize(slots.size());
    tape.inputs[0] = xs;
    for (std::size_t l = 0; l < slots.size(); ++l) {
        affine(slots[l], params, tape.inputs[l], tape.pre_activation[l]);
        if (l + 1 < slots.size()) {
            Matrix& act = tape.inputs[l + 1];
            act = tape.pre_activation[l];
            for (double& v : act.values()) v = activate(spec.activation, v);
        }
    }
    return tape.pre_activation.back();
}

Matrix backward(const NetSpec& spec, std::span<const double> params, const Tape& tape,
                const Matrix& d_output, std::span<double> grad) {
    check_params(spec, params);
    if (grad.size() != params.size()) throw ShapeError("gradient buffer has the wrong length");
    const auto slots = param_layout(spec);
    if (tape.pre_activation.size() != slots.size()) throw ShapeError("tape does not match network");
    Matrix delta = d_output;  // dL / d(pre-activation) of the current layer
    for (std::size_t l = slots.size(); l-- > 0;) {
        const auto& s = slots[l];
        const Matrix& in = tape.inputs[l];
        if (l + 1 < slots.size()) {
            const Matrix& z = tape.pre_activation[l];
            for (std::size_t k = 0; k < delta.values().size(); ++k) {
                delta.values()[k] *= activate_derivative(spec.activation, z.values()[k]);
            }
        }
        double* gw = grad.data() + s.weight_offset;
        double* gb = grad.data() + s.bias_offset;
        const double* w = params.data() + s.weight_offset;
        Matrix d_in(in.rows(), s.fan_in);
        for (std::size_t r = 0; r < in.rows(); ++r) {
            const double* d = delta.row(r).data();
            const double* x = in.row(r).data();
            double* dx = d_in.row(r).data();
            for (std::size_t j = 0; j < s.fan_out; ++j) gb[j] += d[j];
            for (std::size_t i = 0; i < s.fan_in; ++i) {
                const double xi = x[i];
                double* gwi = gw + i * s.fan_out;
                const double* wi = w + i * s.fan_out;
                double acc = 0.0;
                for (std::size_t j = 0; j < s.fan_out; ++j) {
                    gwi[j] += xi * d[j];
                    acc += wi[j] * d[j];
                }
                dx[i] = acc;
            }
        }
        delta = std::move(d_in);
    }
    return delta;
}

double mse_loss(const NetSpec& spec, std::span<const double> params, const Matrix& xs,
                const Matrix& ys) {
    if (xs.rows() == 0) throw ShapeError("loss needs a non-empty batch");
    if (ys.rows() != xs.rows() || ys.cols() != spec.output_dim) throw ShapeError("targets do not match batch");
    const Matrix out = forward(spec, params, xs);
    double total = 0.0;
    for (std::size_t k = 0; k < out.values().size(); ++k) {
        const double e = out.values()[k] - ys.values()[k];
        total += e * e;
    }
    return total / static_cast<double>(xs.rows());
}

LossGrad loss_and_grad(const NetSpec& spec, std::span<const double> params, const Matrix& xs,
                       const Matrix& ys) {
    if (xs.rows() == 0) throw ShapeError("loss needs a non-empty batch");
    if (ys.rows() != xs.rows() || ys.cols() != spec.output_dim) throw ShapeError("targets do not match batch");
    Tape tape;
    const Matrix out = forward(spec, params, xs, tape);
    const double inv_n = 1.0 / static_cast<double>(xs.rows());
    LossGrad result;
    Matrix d_out(out.rows(), out.cols());
    for (std::size_t k = 0; k < out.values().size(); ++k) {
        const double e = out.values()[k] - ys.values()[k];
        result.loss += e * e;
        d_out.values()[k] = 2.0 * e * inv_n;
    }
    result.loss *= inv_n;
    result.grad.assign(params.size(), 0.0);
    backward(spec, params, tape, d_out, result.grad);
    return result;
}

}  // namespace gfm::nn
