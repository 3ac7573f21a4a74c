#pragma once

#include "latim/tensor.hpp"

#include <cstdint>
#include <span>

namespace latim {

using binary_mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Probability that a random positive outranks a random negative; tied pairs
// count 1/2. Throws degenerate_input_error unless gold has both classes.
double auc(std::span<const double> scores, std::span<const std::uint8_t> gold);

// Step-wise area under the precision-recall curve: thresholds at each distinct
// score in descending order, AP = sum (R_k - R_{k-1}) P_k, no interpolation.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> gold);

// Mean over rows of |top-k(scores row) ∩ gold row| / k with k the row's gold
// count. Ties in the top-k go to the lowest column index. Throws
// degenerate_input_error if any row has no gold entry.
double recall_at_k(const matrix<double>& scores, const binary_mask& gold);

} // namespace latim
