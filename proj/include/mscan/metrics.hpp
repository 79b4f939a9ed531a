// Copyright 2026 The mscan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "mscan/error.hpp"

namespace mscan {

/// Area under the ROC curve via the Mann-Whitney rank sum, ties at half
/// credit. Equal to the pairwise win fraction: the numerator is carried as the
/// integer 2U so the result matches exact pair counting bit for bit.
template <typename Label>
double auc(std::span<const double> scores, std::span<const Label> labels) {
    if (scores.size() != labels.size()) throw PreconditionError("auc: scores and labels differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    std::uint64_t positives = 0;
    std::uint64_t twice_rank_sum = 0;  // sum over positives of 2 * (average 1-based rank)
    for (std::size_t start = 0; start < n;) {
        std::size_t end = start + 1;
        while (end < n && scores[order[end]] == scores[order[start]]) ++end;
        // ranks start+1 .. end share the average (start + 1 + end) / 2
        const std::uint64_t twice_avg = static_cast<std::uint64_t>(start + 1 + end);
        for (std::size_t k = start; k < end; ++k) {
            if (labels[order[k]]) {
                ++positives;
                twice_rank_sum += twice_avg;
            }
        }
        start = end;
    }
    const std::uint64_t negatives = n - positives;
    if (positives == 0 || negatives == 0) throw UndefinedMetricError("auc: needs at least one positive and one negative");
    const std::uint64_t twice_u = twice_rank_sum - positives * (positives + 1);
    return static_cast<double>(twice_u) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    return auc<int>(std::span<const double>(scores), std::span<const int>(labels));
}

/// Relative AUC improvement in percent: 100 * (model / base - 1).
inline double rel_impr(double auc_model, double auc_base) {
    if (!(auc_base > 0.0)) throw PreconditionError("rel_impr: baseline AUC must be positive");
    return 100.0 * (auc_model / auc_base - 1.0);
}

}  // namespace mscan
