#include "latim/config.hpp"
#include "latim/errors.hpp"

#include <sstream>

namespace latim {

model_config model_config::with_defaults(variant arch, int num_layers, int model_dim, int state_dim,
                                         int conv_width, int num_heads, int vocab_size) {
    model_config c;
    c.arch = arch;
    c.num_layers = num_layers;
    c.model_dim = model_dim;
    c.inner_dim = 2 * model_dim;
    c.state_dim = state_dim;
    c.conv_width = conv_width;
    c.num_heads = num_heads;
    c.vocab_size = vocab_size;
    c.dt_rank = model_dim > 0 ? (model_dim + 15) / 16 : 1;
    return c;
}

void model_config::validate() const {
    auto require = [](bool ok, const char* msg) {
        if (!ok) throw config_error(msg);
    };
    require(num_layers >= 0, "num_layers must be >= 0");
    require(model_dim >= 1, "model_dim must be >= 1");
    require(inner_dim >= 1, "inner_dim must be >= 1");
    require(state_dim >= 1, "state_dim must be >= 1");
    require(conv_width >= 1, "conv_width must be >= 1");
    require(num_heads >= 1, "num_heads must be >= 1");
    require(vocab_size >= 1, "vocab_size must be >= 1");
    require(dt_rank >= 1, "dt_rank must be >= 1");
    if (arch == variant::mamba2 && inner_dim % num_heads != 0) {
        std::ostringstream os;
        os << "inner_dim " << inner_dim << " is not divisible by num_heads " << num_heads;
        throw config_error(os.str());
    }
}

conv_activation forward_activation(activation_strategy s) {
    switch (s) {
    case activation_strategy::relu: return conv_activation::relu;
    case activation_strategy::identity: return conv_activation::identity;
    default: return conv_activation::silu;
    }
}

std::string_view to_string(variant v) { return v == variant::mamba1 ? "mamba1" : "mamba2"; }

std::string_view to_string(activation_strategy s) {
    switch (s) {
    case activation_strategy::silu: return "silu";
    case activation_strategy::relu: return "relu";
    case activation_strategy::identity: return "identity";
    case activation_strategy::taylor1: return "taylor1";
    case activation_strategy::taylor2: return "taylor2";
    }
    return "?";
}

std::string_view to_string(dtype d) { return d == dtype::f32 ? "f32" : "f64"; }

variant parse_variant(std::string_view s) {
    if (s == "mamba1") return variant::mamba1;
    if (s == "mamba2") return variant::mamba2;
    throw config_error("unknown variant '" + std::string(s) + "'");
}

activation_strategy parse_strategy(std::string_view s) {
    for (auto k : {activation_strategy::silu, activation_strategy::relu, activation_strategy::identity,
                   activation_strategy::taylor1, activation_strategy::taylor2})
        if (to_string(k) == s) return k;
    throw config_error("unknown activation strategy '" + std::string(s) + "'");
}

dtype parse_dtype(std::string_view s) {
    if (s == "f32") return dtype::f32;
    if (s == "f64") return dtype::f64;
    throw config_error("unknown dtype '" + std::string(s) + "'");
}

std::string describe(const model_config& c) {
    std::ostringstream os;
    os << to_string(c.arch) << " layers=" << c.num_layers << " dim=" << c.model_dim
       << " inner=" << c.inner_dim << " state=" << c.state_dim << " conv=" << c.conv_width;
    if (c.arch == variant::mamba2) os << " heads=" << c.num_heads;
    else os << " dt_rank=" << c.dt_rank;
    os << " vocab=" << c.vocab_size << " tied=" << (c.tied_head ? "yes" : "no")
       << " activation=" << to_string(c.strategy) << " dtype=" << to_string(c.precision);
    return os.str();
}

} // namespace latim
