#include "latim/copy_task.hpp"
#include "latim/errors.hpp"
#include "latim/rng.hpp"

#include <span>
#include <string>

namespace latim {

std::vector<copy_instance> gen_copy_batch(int n, int source_len, int vocab, std::uint64_t seed) {
    if (vocab < 3) throw config_error("copy task needs vocab >= 3, got " + std::to_string(vocab));
    if (source_len < 1) throw config_error("copy task needs source length >= 1");
    if (n < 0) throw config_error("copy batch size must be >= 0");
    const int alphabet = vocab - 3;
    const counter_rng rng(seed, "copy-task");
    std::vector<copy_instance> batch(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        auto& inst = batch[static_cast<std::size_t>(k)];
        inst.sep = copy_sep_id(vocab);
        inst.source.resize(static_cast<std::size_t>(source_len));
        for (int p = 0; p < source_len; ++p) {
            const auto counter = static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(source_len) +
                                 static_cast<std::uint64_t>(p);
            // V == 3 leaves an empty alphabet; fall back to id 0.
            inst.source[static_cast<std::size_t>(p)] =
                alphabet > 0 ? static_cast<int>(rng.below(counter, static_cast<std::uint64_t>(alphabet))) : 0;
        }
        inst.tokens = inst.source;
        inst.tokens.push_back(inst.sep);
        inst.tokens.insert(inst.tokens.end(), inst.source.begin(), inst.source.end());
    }
    return batch;
}

binary_mask copy_gold_mask(int source_len) {
    binary_mask g = binary_mask::Zero(source_len, source_len);
    for (int i = 0; i < source_len; ++i)
        for (int j = std::max(0, i - 1); j <= std::min(source_len - 1, i + 1); ++j) g(i, j) = 1;
    return g;
}

matrix<double> extract_copy_block(const matrix<double>& c, int source_len) {
    const index_t s = source_len, n = 2 * s + 1;
    if (c.rows() != n || c.cols() != n)
        throw data_error("extract_copy_block: expected a " + std::to_string(n) + "x" + std::to_string(n) +
                         " matrix for source length " + std::to_string(source_len));
    return c.block(s, 0, s, s);
}

copy_scores score_copy_block(const matrix<double>& block, const binary_mask& gold) {
    if (block.rows() != gold.rows() || block.cols() != gold.cols())
        throw data_error("score_copy_block: block and gold differ in shape");
    const std::span<const double> flat_scores(block.data(), static_cast<std::size_t>(block.size()));
    const std::span<const std::uint8_t> flat_gold(gold.data(), static_cast<std::size_t>(gold.size()));
    return {auc(flat_scores, flat_gold), average_precision(flat_scores, flat_gold), recall_at_k(block, gold)};
}

} // namespace latim
