#pragma once

#include "latim/aggregation.hpp"
#include "latim/copy_task.hpp"
#include "latim/decomposition.hpp"

#include <span>
#include <string>
#include <vector>

namespace latim {

// Which token w(i) ALTI-Logit explains at position i.
enum class target_mode {
    argmax,     // the model's greedy prediction at i
    next_token, // the observed token at i + 1 (argmax at the last position)
};

template <class T>
std::vector<int> logit_targets(const forward_result<T>& fwd, std::span<const int> tokens, target_mode mode);

// Attribution matrices for every requested method: one per layer for lp, alti
// and mamba-attention, one aggregated matrix for alti-logit. Order follows
// `methods`, then layer.
template <class T>
std::vector<attribution_matrix> attribute(const model_decomposition<T>& d, const model_weights<T>& weights,
                                          std::span<const method> methods, std::span<const int> targets);

struct faithfulness_report {
    method tag;
    int layer = aggregated_layer;
    double auc = 0;
    double ap = 0;
    double r_at_k = 0;
    std::vector<copy_scores> per_sample;
};

// Scores every (method, layer) on the copy block of each instance; report
// values are means over instances.
template <class T>
std::vector<faithfulness_report> evaluate_copy(const model_weights<T>& weights, const model_config& config,
                                               std::span<const copy_instance> batch, std::span<const method> methods,
                                               activation_strategy strategy, target_mode targets,
                                               index_t stream_threshold = default_stream_threshold);

struct approx_error_table {
    std::vector<activation_strategy> strategies;
    std::vector<std::string> buckets;             // "0", "1", ... or "0-16", "16-32", "32-48"
    std::vector<std::vector<double>> per_layer;   // [strategy][layer], batch mean
    std::vector<std::vector<double>> per_bucket;  // [strategy][bucket]
};

// Averages measure_reconstruction_error over the batch for each strategy.
// Stacks of 48+ layers are reported in three equal layer buckets, shallower
// ones per layer.
template <class T>
approx_error_table approx_error_sweep(const model_weights<T>& weights, const model_config& config,
                                      std::span<const std::vector<int>> batch,
                                      std::span<const activation_strategy> strategies,
                                      index_t stream_threshold = default_stream_threshold);

} // namespace latim
