#pragma once

#include "latim/config.hpp"
#include "latim/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace latim {

// Learned tensors of one residual block. Shapes are (rows x cols), row-major;
// projections act on row vectors, e.g. x_proj = x * in_x.
template <class T>
struct layer_weights {
    vector<T> norm;          // D, pre-norm scale
    matrix<T> in_x;          // D x E
    matrix<T> in_z;          // D x E
    matrix<T> conv_weight;   // w x E, row k is tap k (row w-1 sees the current token)
    vector<T> conv_bias;     // E
    matrix<T> dt_down;       // Mamba-1: E x dt_rank
    matrix<T> dt_up;         // Mamba-1: dt_rank x E
    matrix<T> dt_proj;       // Mamba-2: D x H
    vector<T> dt_bias;       // E (Mamba-1) or H (Mamba-2)
    matrix<T> x_proj_b;      // E x R (Mamba-1, from phi) or D x R (Mamba-2, from x)
    matrix<T> x_proj_c;      // same shape as x_proj_b
    matrix<T> a_log;         // Mamba-1: E x R
    vector<T> a_log_head;    // Mamba-2: H
    vector<T> d_skip;        // E
    matrix<T> out_proj;      // E x D
    vector<T> gn_gamma;      // Mamba-2: E
    vector<T> gn_beta;       // Mamba-2: E

    template <class U>
    layer_weights<U> cast() const;
};

template <class T>
struct model_weights {
    matrix<T> embed;        // V x D
    std::vector<layer_weights<T>> layers;
    vector<T> final_norm;   // D
    matrix<T> head;         // V x D; empty when the config ties it to embed

    const matrix<T>& output_embedding() const { return head.size() == 0 ? embed : head; }

    template <class U>
    model_weights<U> cast() const;
};

// Deterministic fixture weights. Every tensor is drawn from its own
// counter_rng stream keyed by (seed, tensor name); for f32 configs values are
// rounded to float so the bundle stores them exactly.
model_weights<double> generate_random_model(const model_config& config, std::uint64_t seed);

// Zero-filled weights of the right shapes.
template <class T>
model_weights<T> zero_model(const model_config& config);

struct tensor_ref {
    std::string name;
    std::vector<std::int64_t> shape;
};

// Every tensor a config requires, in canonical order.
std::vector<tensor_ref> required_tensors(const model_config& config);

// Calls f(name, expected_shape, tensor&) for each required tensor in canonical
// order; tensor is the Eigen matrix or vector field backing that name.
namespace detail {

template <class M>
std::vector<std::int64_t> shape_of(const M& m) {
    if constexpr (M::ColsAtCompileTime == 1) return {static_cast<std::int64_t>(m.size())};
    else return {static_cast<std::int64_t>(m.rows()), static_cast<std::int64_t>(m.cols())};
}

template <class M>
void resize_to(M& m, const std::vector<std::int64_t>& shape) {
    if constexpr (M::ColsAtCompileTime == 1) m.resize(shape.at(0));
    else m.resize(shape.at(0), shape.at(1));
}

} // namespace detail

template <class W, class F>
void visit_tensors(W& weights, const model_config& config, F&& f);

// Throws data_error naming the first tensor whose shape disagrees with config.
template <class T>
void check_shapes(const model_weights<T>& weights, const model_config& config);

// ---------------------------------------------------------------------------

template <class T>
template <class U>
layer_weights<U> layer_weights<T>::cast() const {
    layer_weights<U> o;
    o.norm = norm.template cast<U>();
    o.in_x = in_x.template cast<U>();
    o.in_z = in_z.template cast<U>();
    o.conv_weight = conv_weight.template cast<U>();
    o.conv_bias = conv_bias.template cast<U>();
    o.dt_down = dt_down.template cast<U>();
    o.dt_up = dt_up.template cast<U>();
    o.dt_proj = dt_proj.template cast<U>();
    o.dt_bias = dt_bias.template cast<U>();
    o.x_proj_b = x_proj_b.template cast<U>();
    o.x_proj_c = x_proj_c.template cast<U>();
    o.a_log = a_log.template cast<U>();
    o.a_log_head = a_log_head.template cast<U>();
    o.d_skip = d_skip.template cast<U>();
    o.out_proj = out_proj.template cast<U>();
    o.gn_gamma = gn_gamma.template cast<U>();
    o.gn_beta = gn_beta.template cast<U>();
    return o;
}

template <class T>
template <class U>
model_weights<U> model_weights<T>::cast() const {
    model_weights<U> o;
    o.embed = embed.template cast<U>();
    o.final_norm = final_norm.template cast<U>();
    o.head = head.template cast<U>();
    o.layers.reserve(layers.size());
    for (const auto& l : layers) o.layers.push_back(l.template cast<U>());
    return o;
}

template <class W, class F>
void visit_tensors(W& weights, const model_config& c, F&& f) {
    using i64 = std::int64_t;
    const i64 D = c.model_dim, E = c.inner_dim, R = c.state_dim, w = c.conv_width, H = c.num_heads,
              V = c.vocab_size, K = c.dt_rank;
    f(std::string("embed"), std::vector<i64>{V, D}, weights.embed);
    for (int l = 0; l < c.num_layers; ++l) {
        auto& lw = weights.layers.at(static_cast<std::size_t>(l));
        const std::string p = "layers." + std::to_string(l) + ".";
        f(p + "norm", std::vector<i64>{D}, lw.norm);
        f(p + "in_x", std::vector<i64>{D, E}, lw.in_x);
        f(p + "in_z", std::vector<i64>{D, E}, lw.in_z);
        f(p + "conv_weight", std::vector<i64>{w, E}, lw.conv_weight);
        f(p + "conv_bias", std::vector<i64>{E}, lw.conv_bias);
        if (c.arch == variant::mamba1) {
            f(p + "dt_down", std::vector<i64>{E, K}, lw.dt_down);
            f(p + "dt_up", std::vector<i64>{K, E}, lw.dt_up);
            f(p + "dt_bias", std::vector<i64>{E}, lw.dt_bias);
            f(p + "x_proj_b", std::vector<i64>{E, R}, lw.x_proj_b);
            f(p + "x_proj_c", std::vector<i64>{E, R}, lw.x_proj_c);
            f(p + "a_log", std::vector<i64>{E, R}, lw.a_log);
        } else {
            f(p + "dt_proj", std::vector<i64>{D, H}, lw.dt_proj);
            f(p + "dt_bias", std::vector<i64>{H}, lw.dt_bias);
            f(p + "x_proj_b", std::vector<i64>{D, R}, lw.x_proj_b);
            f(p + "x_proj_c", std::vector<i64>{D, R}, lw.x_proj_c);
            f(p + "a_log", std::vector<i64>{H}, lw.a_log_head);
        }
        f(p + "d_skip", std::vector<i64>{E}, lw.d_skip);
        f(p + "out_proj", std::vector<i64>{E, D}, lw.out_proj);
        if (c.arch == variant::mamba2) {
            f(p + "gn_gamma", std::vector<i64>{E}, lw.gn_gamma);
            f(p + "gn_beta", std::vector<i64>{E}, lw.gn_beta);
        }
    }
    f(std::string("final_norm"), std::vector<i64>{D}, weights.final_norm);
    if (!c.tied_head) f(std::string("head"), std::vector<i64>{V, D}, weights.head);
}

} // namespace latim
