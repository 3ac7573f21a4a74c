#include "latim/attribution.hpp"
#include "latim/errors.hpp"

namespace latim {

std::string to_string(method m) {
    switch (m.kind) {
    case method_kind::lp:
        return m.order == lp_order::l1 ? "lp:1" : m.order == lp_order::l2 ? "lp:2" : "lp:inf";
    case method_kind::alti: return "alti";
    case method_kind::alti_logit: return "alti-logit";
    case method_kind::mamba_attention: return "mamba-attention";
    }
    return "?";
}

method parse_method(std::string_view s) {
    if (s == "lp:1") return {method_kind::lp, lp_order::l1};
    if (s == "lp:2") return {method_kind::lp, lp_order::l2};
    if (s == "lp:inf") return {method_kind::lp, lp_order::linf};
    if (s == "alti") return {method_kind::alti, lp_order::l2};
    if (s == "alti-logit") return {method_kind::alti_logit, lp_order::l2};
    if (s == "mamba-attention") return {method_kind::mamba_attention, lp_order::l2};
    throw config_error("unknown method '" + std::string(s) + "'");
}

} // namespace latim
