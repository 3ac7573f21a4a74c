#pragma once

#include "latim/config.hpp"
#include "latim/forward.hpp"
#include "latim/hidden_attention.hpp"

#include <span>
#include <vector>

namespace latim {

// Additive surrogate f for the conv activation. All kinds satisfy f(0) = 0.
//   taylor1(x) = x/2, taylor2(x) = x/2 + x^2/4 (expansions of SiLU at zero).
template <class T>
T apply_strategy(activation_strategy s, T x) {
    switch (s) {
    case activation_strategy::silu: return silu(x);
    case activation_strategy::relu: return x > T(0) ? x : T(0);
    case activation_strategy::identity: return x;
    case activation_strategy::taylor1: return x / T(2);
    case activation_strategy::taylor2: return x / T(2) + x * x / T(4);
    }
    return x;
}

// taps(p, k, :) = f(kernel[k] * x_proj[p - w + 1 + k] + [k == w-1] * bias).
// Tap w-1 reads the current token and carries the bias; taps reaching before
// the sequence start are f(0) = 0.
template <class T>
tensor3<T> conv_tap_contributions(const matrix<T>& x_proj, const matrix<T>& kernel, const vector<T>& bias,
                                  activation_strategy strategy);

// upsilon_{i<-j}: the part of the scan output at i that token j feeds through
// the conv window, sum over p in [j, min(i, j+w-1)] of
// (m(i, p, :) + [p == i] d_skip) * taps(p, w-1-(p-j), :).
// `m_row` is hidden_attention::row(i). Throws contract_error when j > i.
template <class T>
vector<T> ssm_contribution(const matrix<T>& m_row, const tensor3<T>& taps, const vector<T>& d_skip, index_t j,
                           index_t i);
template <class T>
vector<T> ssm_contribution(const hidden_attention<T>& m, const tensor3<T>& taps, const vector<T>& d_skip, index_t j,
                           index_t i);

// t(i, j, :) = T_i(x_j), zero for j > i.
template <class T>
struct contribution_tensor {
    tensor3<T> t;
    int layer = 0;
    activation_strategy strategy = activation_strategy::silu;

    index_t steps() const { return t.dim0(); }
    // sum_j t(i, j, :) as an N x D matrix.
    matrix<T> reconstructed() const;
};

// T_i(x_j) = W_o^T (Z_i * upsilon_{i<-j}), gate frozen from the trace.
template <class T>
contribution_tensor<T> contributions_mamba1(const layer_trace<T>& trace, const hidden_attention<T>& m,
                                            const layer_weights<T>& layer, const model_config& config,
                                            activation_strategy strategy);

// T_i(x_j) = W_o^T gamma_i(Z_i * upsilon_{i<-j}) with gamma_i the GroupNorm
// frozen at u_i: per group, centre, divide by the traced sqrt(var + eps), scale
// by gn_gamma. The gn_beta offset is attributed to no token.
template <class T>
contribution_tensor<T> contributions_mamba2(const layer_trace<T>& trace, const hidden_attention<T>& m,
                                            const layer_weights<T>& layer, const model_config& config,
                                            activation_strategy strategy);

template <class T>
contribution_tensor<T> layer_contributions(const layer_trace<T>& trace, const hidden_attention<T>& m,
                                           const layer_weights<T>& layer, const model_config& config,
                                           activation_strategy strategy);

// Part of the block output attributed to no token: gn_beta * W_o for Mamba-2, zero for Mamba-1.
template <class T>
vector<T> frozen_offset(const layer_weights<T>& layer, const model_config& config);

struct reconstruction_error {
    std::vector<double> per_layer;               // mean over tokens of the l2 gap
    std::vector<std::vector<double>> per_token;  // [layer][token]
};

// Gap between the true block output and sum_j T_i(x_j) (+ frozen offset).
template <class T>
std::vector<double> token_reconstruction_error(const contribution_tensor<T>& contrib, const layer_trace<T>& trace,
                                               const layer_weights<T>& layer, const model_config& config);

// Everything needed to score one sequence.
template <class T>
struct model_decomposition {
    forward_result<T> forward;
    std::vector<hidden_attention<T>> attention;
    std::vector<contribution_tensor<T>> contributions;
};

template <class T>
model_decomposition<T> decompose(std::span<const int> tokens, const model_weights<T>& weights,
                                 const model_config& config, activation_strategy strategy,
                                 index_t stream_threshold = default_stream_threshold);

// Runs the model with its conv activation switched to forward_activation(strategy),
// i.e. the SiLU model for silu/taylor strategies, the ReLU model for relu and
// the activation-free model for identity, and measures how well the
// strategy's contributions rebuild each block output.
template <class T>
reconstruction_error measure_reconstruction_error(std::span<const int> tokens, const model_weights<T>& weights,
                                                  const model_config& config, activation_strategy strategy,
                                                  index_t stream_threshold = default_stream_threshold);

} // namespace latim
