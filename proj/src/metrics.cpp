#include "latim/metrics.hpp"
#include "latim/errors.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace latim {

namespace {

void check_binary(std::span<const double> scores, std::span<const std::uint8_t> gold) {
    if (scores.size() != gold.size()) throw data_error("metric: scores and gold differ in length");
    std::size_t pos = 0;
    for (auto g : gold) pos += g ? 1 : 0;
    if (pos == 0 || pos == gold.size())
        throw degenerate_input_error("metric: gold labels need at least one positive and one negative");
}

std::vector<std::size_t> order_descending(std::span<const double> scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

} // namespace

double auc(std::span<const double> scores, std::span<const std::uint8_t> gold) {
    check_binary(scores, gold);
    // Mann-Whitney U with mid-ranks for ties (ascending ranks, 1-based).
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos = 0, rank_sum = 0;
    for (std::size_t k = 0; k < idx.size();) {
        std::size_t end = k;
        while (end < idx.size() && scores[idx[end]] == scores[idx[k]]) ++end;
        const double mid_rank = 0.5 * static_cast<double>(k + 1 + end);
        for (std::size_t q = k; q < end; ++q)
            if (gold[idx[q]]) {
                rank_sum += mid_rank;
                pos += 1;
            }
        k = end;
    }
    const double neg = static_cast<double>(scores.size()) - pos;
    return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> gold) {
    check_binary(scores, gold);
    const auto idx = order_descending(scores);
    double total_pos = 0;
    for (auto g : gold) total_pos += g ? 1 : 0;
    double tp = 0, fp = 0, prev_recall = 0, ap = 0;
    for (std::size_t k = 0; k < idx.size();) {
        std::size_t end = k;
        while (end < idx.size() && scores[idx[end]] == scores[idx[k]]) {
            (gold[idx[end]] ? tp : fp) += 1;
            ++end;
        }
        const double recall = tp / total_pos;
        ap += (recall - prev_recall) * (tp / (tp + fp));
        prev_recall = recall;
        k = end;
    }
    return ap;
}

double recall_at_k(const matrix<double>& scores, const binary_mask& gold) {
    if (scores.rows() != gold.rows() || scores.cols() != gold.cols())
        throw data_error("recall_at_k: scores and gold differ in shape");
    if (scores.rows() == 0) throw degenerate_input_error("recall_at_k: no rows");
    double total = 0;
    std::vector<double> row(static_cast<std::size_t>(scores.cols()));
    for (index_t i = 0; i < scores.rows(); ++i) {
        index_t k = 0;
        for (index_t j = 0; j < gold.cols(); ++j) k += gold(i, j) ? 1 : 0;
        if (k == 0) throw degenerate_input_error("recall_at_k: row " + std::to_string(i) + " has no gold entry");
        for (index_t j = 0; j < scores.cols(); ++j) row[static_cast<std::size_t>(j)] = scores(i, j);
        const auto idx = order_descending(row);
        index_t hits = 0;
        for (index_t q = 0; q < k; ++q) hits += gold(i, static_cast<index_t>(idx[static_cast<std::size_t>(q)])) ? 1 : 0;
        total += static_cast<double>(hits) / static_cast<double>(k);
    }
    return total / static_cast<double>(scores.rows());
}

} // namespace latim
