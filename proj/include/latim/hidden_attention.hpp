#pragma once

#include "latim/attribution.hpp"
#include "latim/config.hpp"
#include "latim/forward.hpp"

#include <cstddef>

namespace latim {

inline constexpr index_t default_stream_threshold = 2048;

// LATIM_STREAM_THRESHOLD when set to a positive integer, else default_stream_threshold.
index_t stream_threshold_from_env();

// Implicit attention of one scan: m(i, j, e) is the e-th diagonal entry of the
// block M_{i,j}, so that upsilon_i = sum_{j<=i} m(i, j, :) * phi_j + d_skip * phi_i.
//
// Sequences no longer than the threshold are materialized densely (N*N*E
// scalars); longer ones keep only the SSM parameters and rebuild one row at a
// time in row(), trading O(i*E*R) work per row for N*E memory.
template <class T>
class hidden_attention {
public:
    hidden_attention(ssm_params<T> params, index_t channels, int layer, index_t stream_threshold);

    index_t steps() const noexcept { return steps_; }
    index_t channels() const noexcept { return channels_; }
    int layer() const noexcept { return layer_; }
    variant arch() const noexcept { return params_.index() == 0 ? variant::mamba1 : variant::mamba2; }
    bool is_dense() const noexcept { return dense_; }

    // Row i as an (i + 1) x E matrix; out(j, e) = m(i, j, e).
    void row(index_t i, matrix<T>& out) const;

    // Zero for j > i. O(1) when dense, O(i*E*R) when streaming.
    T at(index_t i, index_t j, index_t e) const;

    const ssm_params<T>& params() const noexcept { return params_; }

private:
    void compute_row(index_t i, matrix<T>& out) const;

    ssm_params<T> params_;
    index_t steps_ = 0;
    index_t channels_ = 0;
    int layer_ = 0;
    bool dense_ = true;
    tensor3<T> m_;
};

template <class T>
hidden_attention<T> build_hidden_attention(const ssm_params<T>& params, const model_config& config, int layer,
                                           index_t stream_threshold = default_stream_threshold);

// upsilon_i = sum_{j<=i} m(i, j, :) * phi_j + d_skip * phi_i.
template <class T>
matrix<T> apply_hidden_attention(const hidden_attention<T>& m, const matrix<T>& phi, const vector<T>& d_skip);

// Mamba-Attention baseline: C(i, j) = mean_e |m(i, j, e)|.
template <class T>
attribution_matrix mamba_attention_map(const hidden_attention<T>& m);

} // namespace latim
