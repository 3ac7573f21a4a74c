#include "latim/eval.hpp"
#include "latim/errors.hpp"

#include <string>

namespace latim {

template <class T>
std::vector<int> logit_targets(const forward_result<T>& fwd, std::span<const int> tokens, target_mode mode) {
    auto out = greedy_tokens(fwd.logits);
    if (mode == target_mode::next_token)
        for (std::size_t i = 0; i + 1 < tokens.size(); ++i) out[i] = tokens[i + 1];
    return out;
}

template <class T>
std::vector<attribution_matrix> attribute(const model_decomposition<T>& d, const model_weights<T>& weights,
                                          std::span<const method> methods, std::span<const int> targets) {
    std::vector<attribution_matrix> out;
    std::vector<matrix<T>> inputs;
    for (const auto& tr : d.forward.traces) inputs.push_back(tr.x_in);
    for (const method& m : methods) {
        if (m.kind == method_kind::alti_logit) {
            const auto rs = build_residual_stream<T>(d.contributions, inputs);
            out.push_back(aggregate_alti_logit<T>(d.contributions, rs, weights.output_embedding(), targets));
            continue;
        }
        for (std::size_t l = 0; l < d.contributions.size(); ++l) {
            switch (m.kind) {
            case method_kind::lp: out.push_back(aggregate_lp(d.contributions[l], m.order)); break;
            case method_kind::alti: out.push_back(aggregate_alti(d.contributions[l])); break;
            case method_kind::mamba_attention: out.push_back(mamba_attention_map(d.attention[l])); break;
            case method_kind::alti_logit: break;
            }
        }
    }
    return out;
}

template <class T>
std::vector<faithfulness_report> evaluate_copy(const model_weights<T>& weights, const model_config& config,
                                               std::span<const copy_instance> batch, std::span<const method> methods,
                                               activation_strategy strategy, target_mode targets,
                                               index_t stream_threshold) {
    std::vector<faithfulness_report> reports;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& inst = batch[b];
        const auto d = decompose<T>(inst.tokens, weights, config, strategy, stream_threshold);
        const auto w = logit_targets(d.forward, inst.tokens, targets);
        const auto matrices = attribute(d, weights, methods, w);
        const auto gold = copy_gold_mask(inst.source_len());
        if (reports.empty()) {
            for (const auto& a : matrices) reports.push_back({a.tag, a.layer, 0, 0, 0, {}});
        }
        for (std::size_t k = 0; k < matrices.size(); ++k)
            reports[k].per_sample.push_back(
                score_copy_block(extract_copy_block(matrices[k].c, inst.source_len()), gold));
    }
    for (auto& r : reports) {
        const double n = static_cast<double>(r.per_sample.size());
        for (const auto& s : r.per_sample) {
            r.auc += s.auc / n;
            r.ap += s.ap / n;
            r.r_at_k += s.r_at_k / n;
        }
    }
    return reports;
}

template <class T>
approx_error_table approx_error_sweep(const model_weights<T>& weights, const model_config& config,
                                      std::span<const std::vector<int>> batch,
                                      std::span<const activation_strategy> strategies, index_t stream_threshold) {
    approx_error_table table;
    const int layers = config.num_layers;
    const bool bucketed = layers >= 48;
    if (bucketed) {
        for (int b = 0; b < 3; ++b)
            table.buckets.push_back(std::to_string(b * layers / 3) + "-" + std::to_string((b + 1) * layers / 3));
    } else {
        for (int l = 0; l < layers; ++l) table.buckets.push_back(std::to_string(l));
    }
    for (auto s : strategies) {
        table.strategies.push_back(s);
        std::vector<double> per_layer(static_cast<std::size_t>(layers), 0.0);
        for (const auto& seq : batch) {
            const auto err = measure_reconstruction_error<T>(seq, weights, config, s, stream_threshold);
            for (int l = 0; l < layers; ++l)
                per_layer[static_cast<std::size_t>(l)] +=
                    err.per_layer[static_cast<std::size_t>(l)] / static_cast<double>(batch.size());
        }
        std::vector<double> per_bucket;
        if (bucketed) {
            for (int b = 0; b < 3; ++b) {
                const int lo = b * layers / 3, hi = (b + 1) * layers / 3;
                double sum = 0;
                for (int l = lo; l < hi; ++l) sum += per_layer[static_cast<std::size_t>(l)];
                per_bucket.push_back(sum / static_cast<double>(hi - lo));
            }
        } else {
            per_bucket = per_layer;
        }
        table.per_layer.push_back(std::move(per_layer));
        table.per_bucket.push_back(std::move(per_bucket));
    }
    return table;
}

#define LATIM_INSTANTIATE(T)                                                                                        \
    template std::vector<int> logit_targets<T>(const forward_result<T>&, std::span<const int>, target_mode);       \
    template std::vector<attribution_matrix> attribute<T>(const model_decomposition<T>&, const model_weights<T>&,  \
                                                          std::span<const method>, std::span<const int>);           \
    template std::vector<faithfulness_report> evaluate_copy<T>(const model_weights<T>&, const model_config&,       \
                                                               std::span<const copy_instance>,                      \
                                                               std::span<const method>, activation_strategy,        \
                                                               target_mode, index_t);                               \
    template approx_error_table approx_error_sweep<T>(const model_weights<T>&, const model_config&,                \
                                                      std::span<const std::vector<int>>,                            \
                                                      std::span<const activation_strategy>, index_t);

LATIM_INSTANTIATE(float)
LATIM_INSTANTIATE(double)

} // namespace latim
