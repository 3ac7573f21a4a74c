#pragma once

#include "latim/attribution.hpp"
#include "latim/metrics.hpp"

#include <cstdint>
#include <vector>

namespace latim {

inline constexpr int default_copy_source_len = 50;
inline constexpr int default_copy_vocab = 32;

// Reserved ids at the top of the vocabulary; the source alphabet is [0, V-3).
inline int copy_sep_id(int vocab) { return vocab - 1; }
inline int copy_pad_id(int vocab) { return vocab - 2; }
inline int copy_eos_id(int vocab) { return vocab - 3; }

// source <SEP> source, length 2S + 1.
struct copy_instance {
    std::vector<int> source;
    int sep = 0;
    std::vector<int> tokens;

    int source_len() const { return static_cast<int>(source.size()); }
};

// Deterministic in (n, S, V, seed). Throws config_error when V < 3 or S < 1.
std::vector<copy_instance> gen_copy_batch(int n, int source_len, int vocab, std::uint64_t seed);

// S x S mask over (copy row i, source column j): ones where |j - i| <= 1.
binary_mask copy_gold_mask(int source_len);

// Rows S .. 2S-1 of C (the position predicting copy token i is S + i, S being
// the separator) restricted to the source columns 0 .. S-1.
matrix<double> extract_copy_block(const matrix<double>& c, int source_len);

struct copy_scores {
    double auc = 0;
    double ap = 0;
    double r_at_k = 0;
};

// AUC and AP over the flattened block, R@K per row.
copy_scores score_copy_block(const matrix<double>& block, const binary_mask& gold);

} // namespace latim
