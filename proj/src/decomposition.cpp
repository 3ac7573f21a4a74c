#include "latim/decomposition.hpp"
#include "latim/errors.hpp"
#include "latim/parallel.hpp"

#include <cmath>

namespace latim {

template <class T>
tensor3<T> conv_tap_contributions(const matrix<T>& x_proj, const matrix<T>& kernel, const vector<T>& bias,
                                  activation_strategy strategy) {
    const index_t n = x_proj.rows(), e = x_proj.cols(), w = kernel.rows();
    if (kernel.cols() != e || bias.size() != e) throw data_error("conv_tap_contributions: shape mismatch");
    tensor3<T> taps(n, w, e);
    for (index_t p = 0; p < n; ++p) {
        for (index_t k = 0; k < w; ++k) {
            const index_t src = p - w + 1 + k;
            for (index_t c = 0; c < e; ++c) {
                T pre = src >= 0 ? kernel(k, c) * x_proj(src, c) : T(0);
                if (k == w - 1) pre += bias[c];
                taps(p, k, c) = apply_strategy(strategy, pre);
            }
        }
    }
    return taps;
}

template <class T>
vector<T> ssm_contribution(const matrix<T>& m_row, const tensor3<T>& taps, const vector<T>& d_skip, index_t j,
                           index_t i) {
    if (j > i) throw contract_error("ssm_contribution: source after target");
    const index_t w = taps.dim1();
    vector<T> out = vector<T>::Zero(taps.dim2());
    const index_t last = std::min(i, j + w - 1);
    for (index_t p = j; p <= last; ++p) {
        const auto tap = taps.fiber(p, w - 1 - (p - j));
        if (p == i) out.array() += (m_row.row(p).transpose().array() + d_skip.array()) * tap.transpose().array();
        else out.array() += m_row.row(p).transpose().array() * tap.transpose().array();
    }
    return out;
}

template <class T>
vector<T> ssm_contribution(const hidden_attention<T>& m, const tensor3<T>& taps, const vector<T>& d_skip, index_t j,
                           index_t i) {
    if (j > i) throw contract_error("ssm_contribution: source after target");
    matrix<T> r;
    m.row(i, r);
    return ssm_contribution(r, taps, d_skip, j, i);
}

template <class T>
matrix<T> contribution_tensor<T>::reconstructed() const {
    const index_t n = t.dim0(), d = t.dim2();
    matrix<T> out = matrix<T>::Zero(n, d);
    for (index_t i = 0; i < n; ++i)
        for (index_t j = 0; j <= i; ++j) out.row(i) += t.fiber(i, j);
    return out;
}

namespace {

// Shared driver: for each target row i, builds the (i+1) x E matrix of gated
// per-source SSM contributions, lets `transform` map it in place (identity for
// Mamba-1, frozen GroupNorm for Mamba-2), then projects through W_o.
template <class T, class Transform>
contribution_tensor<T> contributions_impl(const layer_trace<T>& trace, const hidden_attention<T>& m,
                                          const layer_weights<T>& lw, const model_config& config,
                                          activation_strategy strategy, Transform&& transform) {
    const index_t n = trace.x_proj.rows(), d = config.model_dim, e = config.inner_dim;
    if (m.steps() != n || m.channels() != e) throw data_error("contributions: hidden attention does not match trace");
    const tensor3<T> taps = conv_tap_contributions(trace.x_proj, lw.conv_weight, lw.conv_bias, strategy);

    contribution_tensor<T> out;
    out.t = tensor3<T>(n, n, d);
    out.layer = m.layer();
    out.strategy = strategy;
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t k) {
        const auto i = static_cast<index_t>(k);
        matrix<T> m_row;
        m.row(i, m_row);
        matrix<T> gated(i + 1, e);
        for (index_t j = 0; j <= i; ++j)
            gated.row(j) = ssm_contribution(m_row, taps, lw.d_skip, j, i).transpose().cwiseProduct(trace.gate.row(i));
        transform(i, gated);
        const matrix<T> projected = gated * lw.out_proj;
        for (index_t j = 0; j <= i; ++j) out.t.fiber(i, j) = projected.row(j);
    });
    return out;
}

} // namespace

template <class T>
contribution_tensor<T> contributions_mamba1(const layer_trace<T>& trace, const hidden_attention<T>& m,
                                            const layer_weights<T>& lw, const model_config& config,
                                            activation_strategy strategy) {
    if (config.arch != variant::mamba1 || m.arch() != variant::mamba1)
        throw config_error("contributions_mamba1 called on a Mamba-2 layer");
    return contributions_impl(trace, m, lw, config, strategy, [](index_t, matrix<T>&) {});
}

template <class T>
contribution_tensor<T> contributions_mamba2(const layer_trace<T>& trace, const hidden_attention<T>& m,
                                            const layer_weights<T>& lw, const model_config& config,
                                            activation_strategy strategy) {
    if (config.arch != variant::mamba2 || m.arch() != variant::mamba2)
        throw config_error("contributions_mamba2 called on a Mamba-1 layer");
    const index_t groups = config.num_heads, g = config.head_dim();
    if (trace.gn_std.rows() != trace.x_proj.rows() || trace.gn_std.cols() != groups)
        throw data_error("contributions_mamba2: trace lacks GroupNorm statistics");
    return contributions_impl(trace, m, lw, config, strategy, [&](index_t i, matrix<T>& gated) {
        for (index_t q = 0; q < groups; ++q) {
            auto block = gated.middleCols(q * g, g);
            const auto means = block.rowwise().mean().eval();
            block.colwise() -= means;
            block /= trace.gn_std(i, q);
            block.array().rowwise() *= lw.gn_gamma.segment(q * g, g).transpose().array();
        }
    });
}

template <class T>
contribution_tensor<T> layer_contributions(const layer_trace<T>& trace, const hidden_attention<T>& m,
                                           const layer_weights<T>& lw, const model_config& config,
                                           activation_strategy strategy) {
    return config.arch == variant::mamba1 ? contributions_mamba1(trace, m, lw, config, strategy)
                                          : contributions_mamba2(trace, m, lw, config, strategy);
}

template <class T>
vector<T> frozen_offset(const layer_weights<T>& lw, const model_config& config) {
    if (config.arch == variant::mamba1) return vector<T>::Zero(config.model_dim);
    return (lw.gn_beta.transpose() * lw.out_proj).transpose();
}

template <class T>
std::vector<double> token_reconstruction_error(const contribution_tensor<T>& contrib, const layer_trace<T>& trace,
                                               const layer_weights<T>& lw, const model_config& config) {
    const matrix<T> rebuilt = contrib.reconstructed();
    const vector<T> offset = frozen_offset(lw, config);
    std::vector<double> err(static_cast<std::size_t>(rebuilt.rows()));
    for (index_t i = 0; i < rebuilt.rows(); ++i) {
        const auto gap = (rebuilt.row(i) + offset.transpose() - trace.y_block.row(i)).template cast<double>();
        err[static_cast<std::size_t>(i)] = gap.norm();
    }
    return err;
}

template <class T>
model_decomposition<T> decompose(std::span<const int> tokens, const model_weights<T>& weights,
                                 const model_config& config, activation_strategy strategy, index_t stream_threshold) {
    model_decomposition<T> d;
    d.forward = model_forward(tokens, weights, config);
    for (int l = 0; l < config.num_layers; ++l) {
        const auto& trace = d.forward.traces[static_cast<std::size_t>(l)];
        d.attention.push_back(build_hidden_attention(trace.ssm, config, l, stream_threshold));
        d.contributions.push_back(layer_contributions(trace, d.attention.back(),
                                                      weights.layers[static_cast<std::size_t>(l)], config, strategy));
    }
    return d;
}

template <class T>
reconstruction_error measure_reconstruction_error(std::span<const int> tokens, const model_weights<T>& weights,
                                                  const model_config& config, activation_strategy strategy,
                                                  index_t stream_threshold) {
    model_config run = config;
    run.strategy = strategy;
    const auto fwd = model_forward(tokens, weights, run);
    reconstruction_error out;
    for (int l = 0; l < run.num_layers; ++l) {
        const auto& trace = fwd.traces[static_cast<std::size_t>(l)];
        const auto& lw = weights.layers[static_cast<std::size_t>(l)];
        const auto m = build_hidden_attention(trace.ssm, run, l, stream_threshold);
        const auto contrib = layer_contributions(trace, m, lw, run, strategy);
        auto per_token = token_reconstruction_error(contrib, trace, lw, run);
        double sum = 0;
        for (double v : per_token) sum += v;
        out.per_layer.push_back(per_token.empty() ? 0.0 : sum / static_cast<double>(per_token.size()));
        out.per_token.push_back(std::move(per_token));
    }
    return out;
}

#define LATIM_INSTANTIATE(T)                                                                                       \
    template tensor3<T> conv_tap_contributions<T>(const matrix<T>&, const matrix<T>&, const vector<T>&,             \
                                                  activation_strategy);                                             \
    template vector<T> ssm_contribution<T>(const matrix<T>&, const tensor3<T>&, const vector<T>&, index_t, index_t); \
    template vector<T> ssm_contribution<T>(const hidden_attention<T>&, const tensor3<T>&, const vector<T>&, index_t,  \
                                           index_t);                                                                \
    template struct contribution_tensor<T>;                                                                         \
    template contribution_tensor<T> contributions_mamba1<T>(const layer_trace<T>&, const hidden_attention<T>&,      \
                                                            const layer_weights<T>&, const model_config&,           \
                                                            activation_strategy);                                   \
    template contribution_tensor<T> contributions_mamba2<T>(const layer_trace<T>&, const hidden_attention<T>&,      \
                                                            const layer_weights<T>&, const model_config&,           \
                                                            activation_strategy);                                   \
    template contribution_tensor<T> layer_contributions<T>(const layer_trace<T>&, const hidden_attention<T>&,       \
                                                           const layer_weights<T>&, const model_config&,            \
                                                           activation_strategy);                                    \
    template vector<T> frozen_offset<T>(const layer_weights<T>&, const model_config&);                              \
    template std::vector<double> token_reconstruction_error<T>(const contribution_tensor<T>&, const layer_trace<T>&, \
                                                               const layer_weights<T>&, const model_config&);       \
    template model_decomposition<T> decompose<T>(std::span<const int>, const model_weights<T>&,                     \
                                                 const model_config&, activation_strategy, index_t);                \
    template reconstruction_error measure_reconstruction_error<T>(std::span<const int>, const model_weights<T>&,    \
                                                                  const model_config&, activation_strategy, index_t);

LATIM_INSTANTIATE(float)
LATIM_INSTANTIATE(double)

} // namespace latim
