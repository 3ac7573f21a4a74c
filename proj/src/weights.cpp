#include "latim/weights.hpp"
#include "latim/errors.hpp"
#include "latim/rng.hpp"

#include <cmath>
#include <string_view>

namespace latim {

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

double inverse_softplus(double y) { return y + std::log(-std::expm1(-y)); }

// Initial value of element k of tensor `name`. Decay parameters land in ranges
// that keep exp(-exp(a_log) * dt) inside (0, 1) with non-trivial memory.
double init_value(const counter_rng& rng, std::string_view name, const std::vector<std::int64_t>& shape,
                  std::uint64_t k) {
    const double fan_in = static_cast<double>(shape.front());
    if (name == "embed") return rng.normal(k);
    if (name == "head") return rng.normal(k) / std::sqrt(static_cast<double>(shape.back()));
    if (ends_with(name, "norm") || ends_with(name, "gn_gamma") || ends_with(name, "d_skip"))
        return 1.0 + 0.1 * rng.normal(k);
    if (ends_with(name, "conv_bias") || ends_with(name, "gn_beta")) return 0.1 * rng.normal(k);
    if (ends_with(name, "conv_weight")) return rng.normal(k) / std::sqrt(fan_in);
    if (ends_with(name, "dt_up") || ends_with(name, "dt_proj")) return 0.1 * rng.normal(k) / std::sqrt(fan_in);
    if (ends_with(name, "dt_bias")) {
        // dt = exp(U[log 1e-3, log 1e-1]) as in released Mamba.
        const double dt = std::exp(std::log(1e-3) + rng.uniform(k) * (std::log(1e-1) - std::log(1e-3)));
        return inverse_softplus(dt);
    }
    if (ends_with(name, "a_log")) {
        if (shape.size() == 2) {
            const auto r = static_cast<double>(k % static_cast<std::uint64_t>(shape[1]));
            return std::log(r + 1.0) + 0.1 * rng.normal(k);
        }
        return std::log(1.0 + 15.0 * rng.uniform(k));
    }
    return rng.normal(k) / std::sqrt(fan_in);
}

} // namespace

model_weights<double> generate_random_model(const model_config& config, std::uint64_t seed) {
    config.validate();
    model_weights<double> w;
    w.layers.resize(static_cast<std::size_t>(config.num_layers));
    const bool round_f32 = config.precision == dtype::f32;
    visit_tensors(w, config, [&](const std::string& name, const std::vector<std::int64_t>& shape, auto& t) {
        detail::resize_to(t, shape);
        const counter_rng rng(seed, name);
        double* p = t.data();
        for (index_t k = 0; k < t.size(); ++k) {
            double v = init_value(rng, name, shape, static_cast<std::uint64_t>(k));
            if (round_f32) v = static_cast<double>(static_cast<float>(v));
            p[k] = v;
        }
    });
    return w;
}

template <class T>
model_weights<T> zero_model(const model_config& config) {
    config.validate();
    model_weights<T> w;
    w.layers.resize(static_cast<std::size_t>(config.num_layers));
    visit_tensors(w, config, [](const std::string&, const std::vector<std::int64_t>& shape, auto& t) {
        detail::resize_to(t, shape);
        t.setZero();
    });
    return w;
}

std::vector<tensor_ref> required_tensors(const model_config& config) {
    model_weights<double> w;
    w.layers.resize(static_cast<std::size_t>(std::max(config.num_layers, 0)));
    std::vector<tensor_ref> out;
    visit_tensors(w, config, [&](const std::string& name, const std::vector<std::int64_t>& shape, auto&) {
        out.push_back({name, shape});
    });
    return out;
}

template <class T>
void check_shapes(const model_weights<T>& weights, const model_config& config) {
    if (weights.layers.size() != static_cast<std::size_t>(config.num_layers))
        throw data_error("model has " + std::to_string(weights.layers.size()) + " layers, config expects " +
                         std::to_string(config.num_layers));
    visit_tensors(weights, config, [](const std::string& name, const std::vector<std::int64_t>& shape, const auto& t) {
        if (detail::shape_of(t) != shape) throw data_error("tensor '" + name + "' has wrong shape");
    });
}

template model_weights<float> zero_model<float>(const model_config&);
template model_weights<double> zero_model<double>(const model_config&);
template void check_shapes<float>(const model_weights<float>&, const model_config&);
template void check_shapes<double>(const model_weights<double>&, const model_config&);

} // namespace latim
