#pragma once

// Fully connected tanh network with hand-written reverse mode.
//
// Layer l maps R^{n_l} to R^{n_{l+1}} by x -> W_l x + b_l. Every layer except the
// last is followed by tanh; the final layer is affine with a single output.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "errors.hpp"
#include "sampling.hpp"

namespace mcfpinn {

struct MlpParams {
    std::vector<int> layer_sizes;
    std::vector<Eigen::MatrixXd> weights;  // weights[l] is layer_sizes[l+1] x layer_sizes[l]
    std::vector<Eigen::VectorXd> biases;   // biases[l] has length layer_sizes[l+1]

    int input_dim() const { return layer_sizes.front(); }
    std::size_t num_layers() const { return weights.size(); }
};

/// Gradient of a scalar objective with respect to every coefficient of an MlpParams.
struct GradBuffer {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    GradBuffer& operator+=(const GradBuffer& other) {
        for (std::size_t l = 0; l < weights.size(); ++l) {
            weights[l] += other.weights[l];
            biases[l] += other.biases[l];
        }
        return *this;
    }

    GradBuffer& operator*=(double s) {
        for (std::size_t l = 0; l < weights.size(); ++l) {
            weights[l] *= s;
            biases[l] *= s;
        }
        return *this;
    }

    bool all_finite() const {
        for (std::size_t l = 0; l < weights.size(); ++l)
            if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
        return true;
    }
};

inline void check_layer_sizes(const std::vector<int>& sizes) {
    if (sizes.size() < 2) throw InvalidShape("network needs at least an input and an output layer");
    for (int s : sizes)
        if (s <= 0) throw InvalidShape("layer sizes must be positive");
    if (sizes.back() != 1) throw InvalidShape("network output width must be 1");
}

/// Throws InvalidShape unless every matrix matches layer_sizes.
inline void validate(const MlpParams& p) {
    check_layer_sizes(p.layer_sizes);
    const std::size_t layers = p.layer_sizes.size() - 1;
    if (p.weights.size() != layers || p.biases.size() != layers) throw InvalidShape("layer count mismatch");
    for (std::size_t l = 0; l < layers; ++l) {
        if (p.weights[l].rows() != p.layer_sizes[l + 1] || p.weights[l].cols() != p.layer_sizes[l])
            throw InvalidShape("weight matrix shape mismatch");
        if (p.biases[l].size() != p.layer_sizes[l + 1]) throw InvalidShape("bias length mismatch");
    }
}

inline bool all_finite(const MlpParams& p) {
    for (std::size_t l = 0; l < p.weights.size(); ++l)
        if (!p.weights[l].allFinite() || !p.biases[l].allFinite()) return false;
    return true;
}

inline GradBuffer zeros_like(const MlpParams& p) {
    GradBuffer g;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        g.weights.push_back(Eigen::MatrixXd::Zero(p.weights[l].rows(), p.weights[l].cols()));
        g.biases.push_back(Eigen::VectorXd::Zero(p.biases[l].size()));
    }
    return g;
}

inline bool same_shape(const MlpParams& p, const GradBuffer& g) {
    if (g.weights.size() != p.weights.size() || g.biases.size() != p.biases.size()) return false;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        if (g.weights[l].rows() != p.weights[l].rows() || g.weights[l].cols() != p.weights[l].cols()) return false;
        if (g.biases[l].size() != p.biases[l].size()) return false;
    }
    return true;
}

inline std::size_t parameter_count(const MlpParams& p) {
    std::size_t n = 0;
    for (std::size_t l = 0; l < p.weights.size(); ++l) n += p.weights[l].size() + p.biases[l].size();
    return n;
}

/// Visits every coefficient in storage order: layer by layer, weights row-major, then bias.
template <class Layers, class Fn>
void for_each_coefficient(Layers& layers, Fn&& fn) {
    for (std::size_t l = 0; l < layers.weights.size(); ++l) {
        auto& w = layers.weights[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) fn(w(r, c));
        auto& b = layers.biases[l];
        for (Eigen::Index r = 0; r < b.size(); ++r) fn(b[r]);
    }
}

/// Glorot-uniform weights, zero biases. Deterministic in (seed, stream).
inline MlpParams mlp_init(const std::vector<int>& layer_sizes, std::uint64_t seed, std::uint64_t stream = 0) {
    check_layer_sizes(layer_sizes);
    MlpParams p;
    p.layer_sizes = layer_sizes;
    RngStream rng(seed, stream);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const int fan_in = layer_sizes[l];
        const int fan_out = layer_sizes[l + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = limit * (2.0 * rng.uniform() - 1.0);
        p.weights.push_back(std::move(w));
        p.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return p;
}

namespace detail {

// tanh through the vectorized exp: tanh(z) = 1 - 2 / (exp(2z) + 1).
template <class Derived>
void tanh_inplace(Eigen::ArrayBase<Derived>& z) {
    z = 1.0 - 2.0 / ((2.0 * z).exp() + 1.0);
}

}  // namespace detail

/// The activation used by every hidden layer.
inline double activation(double z) {
    Eigen::Array<double, 1, 1> a;
    a(0) = z;
    detail::tanh_inplace(a);
    return a(0);
}

inline double mlp_forward(const MlpParams& p, std::span<const double> x) {
    if (static_cast<int>(x.size()) != p.input_dim()) throw InvalidShape("mlp_forward: point dimension mismatch");
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    const std::size_t last = p.num_layers() - 1;
    for (std::size_t l = 0; l < last; ++l) {
        Eigen::VectorXd z = p.weights[l] * a + p.biases[l];
        auto za = z.array();
        detail::tanh_inplace(za);
        a = std::move(z);
    }
    return (p.weights[last] * a)(0) + p.biases[last](0);
}

inline double mlp_forward(const MlpParams& p, const Point& x) {
    return mlp_forward(p, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

/// Hidden activations retained by a batched forward pass for the backward sweep.
struct ForwardCache {
    // inputs[l] is the input to layer l: inputs[0] = X, inputs[l] = tanh output of layer l-1.
    std::vector<Eigen::MatrixXd> inputs;
    Eigen::RowVectorXd output;
};

inline void mlp_forward_cached(const MlpParams& p, const Eigen::Ref<const PointSet>& xs, ForwardCache& cache) {
    if (xs.rows() != p.input_dim()) throw InvalidShape("mlp_forward_batch: point dimension mismatch");
    const std::size_t layers = p.num_layers();
    cache.inputs.resize(layers);
    cache.inputs[0] = xs;
    for (std::size_t l = 0; l + 1 < layers; ++l) {
        Eigen::MatrixXd& z = cache.inputs[l + 1];
        z.resize(p.weights[l].rows(), xs.cols());
        z.noalias() = p.weights[l] * cache.inputs[l];
        z.colwise() += p.biases[l];
        auto za = z.array();
        detail::tanh_inplace(za);
    }
    cache.output.resize(xs.cols());
    cache.output.noalias() = p.weights[layers - 1] * cache.inputs[layers - 1];
    cache.output.array() += p.biases[layers - 1](0);
}

/// Network values at every column of xs.
inline Eigen::VectorXd mlp_forward_batch(const MlpParams& p, const Eigen::Ref<const PointSet>& xs) {
    ForwardCache cache;
    mlp_forward_cached(p, xs, cache);
    return cache.output.transpose();
}

/// Adds sum_i upstream[i] * d(output_i)/d(params) into `grad`.
inline void mlp_backward_cached(const MlpParams& p, const ForwardCache& cache,
                                const Eigen::Ref<const Eigen::RowVectorXd>& upstream, GradBuffer& grad) {
    if (upstream.size() != cache.output.size()) throw InvalidShape("mlp_backward: upstream length mismatch");
    if (!same_shape(p, grad)) throw InvalidShape("mlp_backward: gradient buffer shape mismatch");
    const std::size_t layers = p.num_layers();
    Eigen::MatrixXd delta = upstream;
    for (std::size_t l = layers; l-- > 0;) {
        grad.weights[l].noalias() += delta * cache.inputs[l].transpose();
        grad.biases[l] += delta.rowwise().sum();
        if (l == 0) break;
        Eigen::MatrixXd next(p.weights[l].cols(), delta.cols());
        next.noalias() = p.weights[l].transpose() * delta;
        next.array() *= 1.0 - cache.inputs[l].array().square();
        delta = std::move(next);
    }
}

/// Gradient of sum_i upstream[i] * mlp_forward(p, xs_i) with respect to p.
inline GradBuffer mlp_backward(const MlpParams& p, const Eigen::Ref<const PointSet>& xs,
                               std::span<const double> upstream) {
    if (static_cast<Eigen::Index>(upstream.size()) != xs.cols())
        throw InvalidShape("mlp_backward: |xs| != |upstream|");
    GradBuffer g = zeros_like(p);
    if (xs.cols() == 0) return g;
    ForwardCache cache;
    mlp_forward_cached(p, xs, cache);
    mlp_backward_cached(p, cache,
                        Eigen::Map<const Eigen::RowVectorXd>(upstream.data(), static_cast<Eigen::Index>(upstream.size())),
                        g);
    return g;
}

}  // namespace mcfpinn
