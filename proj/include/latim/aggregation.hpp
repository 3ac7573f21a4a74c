#pragma once

#include "latim/attribution.hpp"
#include "latim/decomposition.hpp"

#include <span>
#include <vector>

namespace latim {

// C(i, j) = ||T_i(x_j)||_p, unnormalized.
template <class T>
attribution_matrix aggregate_lp(const contribution_tensor<T>& t, lp_order order);

// ALTI contextual mixing:
//   raw(i, j) = max(0, ||y_i||_1 - ||y_i - T_i(x_j)||_1),  C(i, :) = raw(i, :) / sum_k raw(i, k).
// Rows whose raw scores are all zero stay zero and are flagged in degenerate_rows.
template <class T>
attribution_matrix aggregate_alti(const contribution_tensor<T>& t, const matrix<T>& y);
// y defaults to the reconstructed output sum_j T_i(x_j).
template <class T>
attribution_matrix aggregate_alti(const contribution_tensor<T>& t);

// Per-layer mixing of the residual stream and its running products,
// r[l] = P^(l) ... P^(1) with r[0] = I.
//
// Row i of P[l] distributes x_i^(l) = x_i^(l-1) + sum_j T_i(x_j) over sources j
// with ALTI, where the residual x_i^(l-1) joins the j = i component. Degenerate
// rows fall back to the identity row.
struct residual_stream {
    std::vector<matrix<double>> p; // L matrices, index l-1 holds P^(l)
    std::vector<matrix<double>> r; // L + 1 matrices, r[0] = I
};

template <class T>
residual_stream build_residual_stream(std::span<const contribution_tensor<T>> contributions,
                                      std::span<const matrix<T>> layer_inputs);

// Delta(i, j) = T_i(x_j) . U[targets[i]] for one layer.
template <class T>
matrix<double> logit_deltas(const contribution_tensor<T>& t, const matrix<T>& output_embedding,
                            std::span<const int> targets);

// C = sum_l Delta^(l) R^(l-1). Entries are signed logit contributions.
template <class T>
attribution_matrix aggregate_alti_logit(std::span<const contribution_tensor<T>> contributions,
                                        const residual_stream& residual, const matrix<T>& output_embedding,
                                        std::span<const int> targets);

} // namespace latim
