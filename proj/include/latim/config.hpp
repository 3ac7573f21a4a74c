#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace latim {

enum class variant { mamba1, mamba2 };

// Additive surrogate f applied per conv tap. Also selects the conv activation
// of the forward pass, see forward_activation().
enum class activation_strategy { silu, relu, identity, taylor1, taylor2 };

enum class dtype { f32, f64 };

// Nonlinearity actually applied to the conv output in the forward pass.
enum class conv_activation { silu, relu, identity };

struct model_config {
    variant arch = variant::mamba1;
    int num_layers = 2;
    int model_dim = 16;
    int inner_dim = 32;
    int state_dim = 4;
    int conv_width = 4;
    int num_heads = 1;
    int vocab_size = 32;
    // Rank of the Mamba-1 delta projection; ignored for Mamba-2.
    int dt_rank = 1;
    bool tied_head = true;
    activation_strategy strategy = activation_strategy::silu;
    dtype precision = dtype::f64;

    // Fills inner_dim = 2 * model_dim and dt_rank = ceil(model_dim / 16).
    static model_config with_defaults(variant arch, int num_layers, int model_dim, int state_dim,
                                      int conv_width, int num_heads, int vocab_size);

    int head_dim() const { return inner_dim / num_heads; }

    // Throws config_error on any violated invariant.
    void validate() const;

    bool operator==(const model_config&) const = default;
};

// Taylor variants approximate SiLU, so their forward pass runs SiLU.
conv_activation forward_activation(activation_strategy s);

std::string_view to_string(variant v);
std::string_view to_string(activation_strategy s);
std::string_view to_string(dtype d);

// Throw config_error on unknown names.
variant parse_variant(std::string_view s);
activation_strategy parse_strategy(std::string_view s);
dtype parse_dtype(std::string_view s);

std::string describe(const model_config& c);

} // namespace latim
