#pragma once

#include "latim/config.hpp"
#include "latim/tensor.hpp"
#include "latim/weights.hpp"

#include <cmath>
#include <span>
#include <variant>
#include <vector>

namespace latim {

inline constexpr double group_norm_eps = 1e-5;
inline constexpr double rms_norm_eps = 1e-5;

template <class T>
T silu(T x) {
    return x / (T(1) + std::exp(-x));
}

template <class T>
T softplus(T x) {
    // log1p(exp(x)) without overflow for large x.
    return x > T(20) ? x : std::log1p(std::exp(x));
}

template <class T>
T activate(conv_activation a, T x) {
    switch (a) {
    case conv_activation::silu: return silu(x);
    case conv_activation::relu: return x > T(0) ? x : T(0);
    case conv_activation::identity: return x;
    }
    return x;
}

// Discretized Mamba-1 SSM parameters for one layer. Per step i and channel e the
// state row H[:, e] evolves as H = decay[i,e,:] * H + input_scale[i,e,:] * phi[i,e],
// and is read out through readout[i,:].
template <class T>
struct mamba1_params {
    tensor3<T> decay;        // N x E x R, exp(-exp(a_log) * dt)
    tensor3<T> input_scale;  // N x E x R, dt[i,e] * B[i,r]
    matrix<T> readout;       // N x R, c_i
    matrix<T> delta;         // N x E, dt after softplus
};

// Mamba-2: one scalar decay per head and step, shared by the head's channels.
template <class T>
struct mamba2_params {
    matrix<T> decay;         // N x H
    tensor3<T> input_scale;  // N x H x R, dt[i,h] * B[i,h,:]
    tensor3<T> readout;      // N x H x R
    matrix<T> delta;         // N x H
};

template <class T>
using ssm_params = std::variant<mamba1_params<T>, mamba2_params<T>>;

// Intermediates of one block evaluated on a length-N sequence.
template <class T>
struct layer_trace {
    matrix<T> x_in;      // N x D residual stream entering the layer
    matrix<T> x_norm;    // N x D pre-normed block input
    matrix<T> x_proj;    // N x E, x_norm * in_x
    matrix<T> psi;       // N x E conv output
    matrix<T> phi;       // N x E activated conv output
    ssm_params<T> ssm;
    matrix<T> upsilon;   // N x E scan output, skip term included
    matrix<T> gate;      // N x E, silu(x_norm * in_z)
    matrix<T> u;         // N x E, upsilon * gate
    matrix<T> gn_std;    // Mamba-2: N x H, sqrt(var + eps) per token and group
    matrix<T> y_block;   // N x D
    matrix<T> x_out;     // N x D, x_in + y_block
};

template <class T>
struct forward_result {
    matrix<T> logits;                   // N x V
    std::vector<layer_trace<T>> traces; // one per layer
    std::vector<matrix<T>> residuals;   // L + 1 snapshots x^(0..L)
};

// Depthwise causal convolution with w - 1 implicit leading zeros:
// out[j,e] = sum_k kernel[k,e] * x[j - w + 1 + k, e] + bias[e].
template <class T>
matrix<T> causal_conv(const matrix<T>& x_proj, const matrix<T>& kernel, const vector<T>& bias);

// Sequential scans from a zero state. Throw numeric_error on non-finite parameters.
template <class T>
matrix<T> mamba1_scan(const matrix<T>& phi, const mamba1_params<T>& p, const vector<T>& d_skip);
template <class T>
matrix<T> mamba2_scan(const matrix<T>& phi, const mamba2_params<T>& p, const vector<T>& d_skip);

template <class T>
matrix<T> ssm_scan(const matrix<T>& phi, const ssm_params<T>& p, const vector<T>& d_skip);

// Per-token GroupNorm over `groups` contiguous channel blocks. Writes the
// per-group sqrt(var + eps) into std_out (N x groups) when given.
template <class T>
matrix<T> group_norm(const matrix<T>& u, int groups, const vector<T>& gamma, const vector<T>& beta,
                     matrix<T>* std_out = nullptr);

template <class T>
matrix<T> rms_norm(const matrix<T>& x, const vector<T>& scale);

// Derives discretized SSM parameters from the block's inputs (phi for Mamba-1,
// x_norm for Mamba-2).
template <class T>
ssm_params<T> compute_ssm_params(const matrix<T>& x_norm, const matrix<T>& phi, const layer_weights<T>& layer,
                                 const model_config& config);

// One residual block on an already pre-normed input. Fills every trace field
// except x_in / x_out, which belong to the residual stack.
template <class T>
layer_trace<T> block_forward(const matrix<T>& x_norm, const layer_weights<T>& layer, const model_config& config);

// x0 = embed[tokens]; x_l = x_{l-1} + block(rmsnorm(x_{l-1})); logits = rmsnorm(x_L) U^T.
// Throws data_error on token ids outside [0, V).
template <class T>
forward_result<T> model_forward(std::span<const int> tokens, const model_weights<T>& weights,
                                const model_config& config);

// Row-wise argmax of logits, lowest index on ties.
template <class T>
std::vector<int> greedy_tokens(const matrix<T>& logits);

} // namespace latim
