#include "latim/forward.hpp"
#include "latim/errors.hpp"

#include <sstream>
#include <string>

namespace latim {

namespace {

template <class T>
void require_finite(T v, const char* what, index_t step, index_t channel) {
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "non-finite " << what << " at step " << step << ", channel " << channel;
        throw numeric_error(os.str());
    }
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw data_error(msg);
}

} // namespace

template <class T>
matrix<T> causal_conv(const matrix<T>& x_proj, const matrix<T>& kernel, const vector<T>& bias) {
    const index_t n = x_proj.rows(), e = x_proj.cols(), w = kernel.rows();
    require(kernel.cols() == e && bias.size() == e, "causal_conv: kernel/bias width does not match input");
    matrix<T> out(n, e);
    for (index_t j = 0; j < n; ++j) {
        for (index_t c = 0; c < e; ++c) {
            T acc = bias[c];
            for (index_t k = 0; k < w; ++k) {
                const index_t src = j - w + 1 + k;
                if (src >= 0) acc += kernel(k, c) * x_proj(src, c);
            }
            out(j, c) = acc;
        }
    }
    return out;
}

template <class T>
matrix<T> mamba1_scan(const matrix<T>& phi, const mamba1_params<T>& p, const vector<T>& d_skip) {
    const index_t n = phi.rows(), e = phi.cols(), r = p.readout.cols();
    require(p.decay.dim0() == n && p.decay.dim1() == e && p.decay.dim2() == r && p.input_scale.dim0() == n &&
                p.input_scale.dim1() == e && p.input_scale.dim2() == r && p.readout.rows() == n && d_skip.size() == e,
            "mamba1_scan: parameter shapes disagree with input");
    matrix<T> state = matrix<T>::Zero(e, r); // row c is channel c's state column
    matrix<T> out(n, e);
    for (index_t i = 0; i < n; ++i) {
        for (index_t s = 0; s < r; ++s) require_finite(p.readout(i, s), "readout", i, s);
        for (index_t c = 0; c < e; ++c) {
            T acc = T(0);
            for (index_t s = 0; s < r; ++s) {
                const T a = p.decay(i, c, s), b = p.input_scale(i, c, s);
                require_finite(a, "decay", i, c);
                require_finite(b, "input scale", i, c);
                state(c, s) = a * state(c, s) + b * phi(i, c);
                acc += state(c, s) * p.readout(i, s);
            }
            out(i, c) = acc + d_skip[c] * phi(i, c);
        }
    }
    return out;
}

template <class T>
matrix<T> mamba2_scan(const matrix<T>& phi, const mamba2_params<T>& p, const vector<T>& d_skip) {
    const index_t n = phi.rows(), e = phi.cols(), h = p.decay.cols(), r = p.input_scale.dim2();
    require(h >= 1 && e % h == 0, "mamba2_scan: channels not divisible by heads");
    require(p.decay.rows() == n && p.input_scale.dim0() == n && p.input_scale.dim1() == h && p.readout.dim0() == n &&
                p.readout.dim1() == h && p.readout.dim2() == r && d_skip.size() == e,
            "mamba2_scan: parameter shapes disagree with input");
    const index_t head_dim = e / h;
    matrix<T> state = matrix<T>::Zero(e, r);
    matrix<T> out(n, e);
    for (index_t i = 0; i < n; ++i) {
        for (index_t hd = 0; hd < h; ++hd) {
            const T a = p.decay(i, hd);
            require_finite(a, "decay", i, hd * head_dim);
            for (index_t s = 0; s < r; ++s) {
                require_finite(p.input_scale(i, hd, s), "input scale", i, hd * head_dim);
                require_finite(p.readout(i, hd, s), "readout", i, hd * head_dim);
            }
            for (index_t c = hd * head_dim; c < (hd + 1) * head_dim; ++c) {
                T acc = T(0);
                for (index_t s = 0; s < r; ++s) {
                    state(c, s) = a * state(c, s) + p.input_scale(i, hd, s) * phi(i, c);
                    acc += state(c, s) * p.readout(i, hd, s);
                }
                out(i, c) = acc + d_skip[c] * phi(i, c);
            }
        }
    }
    return out;
}

template <class T>
matrix<T> ssm_scan(const matrix<T>& phi, const ssm_params<T>& p, const vector<T>& d_skip) {
    return std::visit(
        [&](const auto& q) -> matrix<T> {
            if constexpr (std::is_same_v<std::decay_t<decltype(q)>, mamba1_params<T>>) return mamba1_scan(phi, q, d_skip);
            else return mamba2_scan(phi, q, d_skip);
        },
        p);
}

template <class T>
matrix<T> group_norm(const matrix<T>& u, int groups, const vector<T>& gamma, const vector<T>& beta,
                     matrix<T>* std_out) {
    const index_t n = u.rows(), e = u.cols();
    require(groups >= 1 && e % groups == 0, "group_norm: channels not divisible by groups");
    const index_t g = e / groups;
    matrix<T> out(n, e);
    if (std_out) std_out->resize(n, groups);
    for (index_t i = 0; i < n; ++i) {
        for (index_t q = 0; q < groups; ++q) {
            const auto seg = u.row(i).segment(q * g, g);
            const T mean = seg.mean();
            const T var = (seg.array() - mean).square().mean();
            const T sd = std::sqrt(var + T(group_norm_eps));
            if (std_out) (*std_out)(i, q) = sd;
            for (index_t c = 0; c < g; ++c) {
                const index_t ch = q * g + c;
                out(i, ch) = gamma[ch] * (u(i, ch) - mean) / sd + beta[ch];
            }
        }
    }
    return out;
}

template <class T>
matrix<T> rms_norm(const matrix<T>& x, const vector<T>& scale) {
    matrix<T> out(x.rows(), x.cols());
    for (index_t i = 0; i < x.rows(); ++i) {
        const T inv = T(1) / std::sqrt(x.row(i).squaredNorm() / T(x.cols()) + T(rms_norm_eps));
        out.row(i) = (x.row(i).array() * inv * scale.transpose().array()).matrix();
    }
    return out;
}

template <class T>
ssm_params<T> compute_ssm_params(const matrix<T>& x_norm, const matrix<T>& phi, const layer_weights<T>& lw,
                                 const model_config& config) {
    const index_t n = phi.rows(), e = config.inner_dim, r = config.state_dim;
    if (config.arch == variant::mamba1) {
        mamba1_params<T> p;
        const matrix<T> dt_raw = (phi * lw.dt_down) * lw.dt_up;
        const matrix<T> b = phi * lw.x_proj_b;
        p.readout = phi * lw.x_proj_c;
        p.delta.resize(n, e);
        p.decay = tensor3<T>(n, e, r);
        p.input_scale = tensor3<T>(n, e, r);
        for (index_t i = 0; i < n; ++i) {
            for (index_t c = 0; c < e; ++c) {
                const T dt = softplus(dt_raw(i, c) + lw.dt_bias[c]);
                p.delta(i, c) = dt;
                for (index_t s = 0; s < r; ++s) {
                    p.decay(i, c, s) = std::exp(-std::exp(lw.a_log(c, s)) * dt);
                    p.input_scale(i, c, s) = dt * b(i, s);
                }
            }
        }
        return p;
    }
    const index_t h = config.num_heads;
    mamba2_params<T> p;
    const matrix<T> dt_raw = x_norm * lw.dt_proj;
    const matrix<T> b = x_norm * lw.x_proj_b;
    const matrix<T> c_read = x_norm * lw.x_proj_c;
    p.delta.resize(n, h);
    p.decay.resize(n, h);
    p.input_scale = tensor3<T>(n, h, r);
    p.readout = tensor3<T>(n, h, r);
    for (index_t i = 0; i < n; ++i) {
        for (index_t hd = 0; hd < h; ++hd) {
            const T dt = softplus(dt_raw(i, hd) + lw.dt_bias[hd]);
            p.delta(i, hd) = dt;
            p.decay(i, hd) = std::exp(-std::exp(lw.a_log_head[hd]) * dt);
            // B and C are shared across heads (a single group).
            for (index_t s = 0; s < r; ++s) {
                p.input_scale(i, hd, s) = dt * b(i, s);
                p.readout(i, hd, s) = c_read(i, s);
            }
        }
    }
    return p;
}

template <class T>
layer_trace<T> block_forward(const matrix<T>& x_norm, const layer_weights<T>& lw, const model_config& config) {
    const auto act = forward_activation(config.strategy);
    layer_trace<T> t;
    t.x_norm = x_norm;
    t.x_proj = x_norm * lw.in_x;
    t.psi = causal_conv(t.x_proj, lw.conv_weight, lw.conv_bias);
    t.phi = t.psi.unaryExpr([act](T v) { return activate(act, v); });
    t.ssm = compute_ssm_params(x_norm, t.phi, lw, config);
    t.upsilon = ssm_scan(t.phi, t.ssm, lw.d_skip);
    t.gate = (x_norm * lw.in_z).unaryExpr([](T v) { return silu(v); });
    t.u = t.upsilon.cwiseProduct(t.gate);
    if (config.arch == variant::mamba1) {
        t.y_block = t.u * lw.out_proj;
    } else {
        t.y_block = group_norm(t.u, config.num_heads, lw.gn_gamma, lw.gn_beta, &t.gn_std) * lw.out_proj;
    }
    return t;
}

template <class T>
forward_result<T> model_forward(std::span<const int> tokens, const model_weights<T>& weights,
                                const model_config& config) {
    const index_t n = static_cast<index_t>(tokens.size());
    forward_result<T> r;
    matrix<T> x(n, config.model_dim);
    for (index_t i = 0; i < n; ++i) {
        const int id = tokens[static_cast<std::size_t>(i)];
        if (id < 0 || id >= config.vocab_size)
            throw data_error("token id " + std::to_string(id) + " at position " + std::to_string(i) +
                             " is outside the vocabulary of size " + std::to_string(config.vocab_size));
        x.row(i) = weights.embed.row(id);
    }
    r.residuals.push_back(x);
    for (const auto& lw : weights.layers) {
        auto trace = block_forward<T>(rms_norm(x, lw.norm), lw, config);
        trace.x_in = x;
        x = x + trace.y_block;
        trace.x_out = x;
        r.traces.push_back(std::move(trace));
        r.residuals.push_back(x);
    }
    r.logits = rms_norm(x, weights.final_norm) * weights.output_embedding().transpose();
    if (!r.logits.allFinite()) throw numeric_error("non-finite logits");
    return r;
}

template <class T>
std::vector<int> greedy_tokens(const matrix<T>& logits) {
    std::vector<int> out(static_cast<std::size_t>(logits.rows()));
    for (index_t i = 0; i < logits.rows(); ++i) {
        index_t best = 0;
        for (index_t v = 1; v < logits.cols(); ++v)
            if (logits(i, v) > logits(i, best)) best = v;
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

#define LATIM_INSTANTIATE(T)                                                                                   \
    template matrix<T> causal_conv<T>(const matrix<T>&, const matrix<T>&, const vector<T>&);                    \
    template matrix<T> mamba1_scan<T>(const matrix<T>&, const mamba1_params<T>&, const vector<T>&);             \
    template matrix<T> mamba2_scan<T>(const matrix<T>&, const mamba2_params<T>&, const vector<T>&);             \
    template matrix<T> ssm_scan<T>(const matrix<T>&, const ssm_params<T>&, const vector<T>&);                   \
    template matrix<T> group_norm<T>(const matrix<T>&, int, const vector<T>&, const vector<T>&, matrix<T>*);    \
    template matrix<T> rms_norm<T>(const matrix<T>&, const vector<T>&);                                         \
    template ssm_params<T> compute_ssm_params<T>(const matrix<T>&, const matrix<T>&, const layer_weights<T>&,   \
                                                 const model_config&);                                          \
    template layer_trace<T> block_forward<T>(const matrix<T>&, const layer_weights<T>&, const model_config&);   \
    template forward_result<T> model_forward<T>(std::span<const int>, const model_weights<T>&,                  \
                                                const model_config&);                                           \
    template std::vector<int> greedy_tokens<T>(const matrix<T>&);

LATIM_INSTANTIATE(float)
LATIM_INSTANTIATE(double)

} // namespace latim
