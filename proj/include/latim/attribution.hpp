#pragma once

#include "latim/tensor.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace latim {

enum class lp_order { l1, l2, linf };

enum class method_kind { lp, alti, alti_logit, mamba_attention };

struct method {
    method_kind kind = method_kind::lp;
    lp_order order = lp_order::l2; // only meaningful for lp

    bool operator==(const method&) const = default;
};

// "lp:1", "lp:2", "lp:inf", "alti", "alti-logit", "mamba-attention".
std::string to_string(method m);
// Throws config_error on unknown names.
method parse_method(std::string_view s);

inline constexpr int aggregated_layer = -1;

// Row i scores the sources j <= i of target position i. Entries above the
// diagonal are exactly zero.
struct attribution_matrix {
    matrix<double> c;
    method tag;
    int layer = aggregated_layer;
    // ALTI rows whose raw scores were all clipped to zero; empty for other methods.
    std::vector<bool> degenerate_rows;
};

} // namespace latim
