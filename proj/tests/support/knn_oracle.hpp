#pragma once

// Exhaustive nearest-neighbour search: every training row, full Minkowski
// distance, sorted by (distance, index), then the stated voting rule.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "iotscope/dataset.hpp"

namespace iotscope::testing {

struct OracleNeighbors {
    std::vector<std::size_t> indices;
    Category label = Category::Surveillance;
};

inline OracleNeighbors exhaustive_knn(const Matrix& train, std::span<const Category> labels,
                                      std::span<const double> query, std::size_t k, double p) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < train.rows; ++i) {
        double acc = 0;
        for (std::size_t d = 0; d < train.cols; ++d) {
            const double diff = std::fabs(train(i, d) - query[d]);
            acc += p == 2.0 ? diff * diff : std::pow(diff, p);
        }
        all.emplace_back(p == 2.0 ? std::sqrt(acc) : std::pow(acc, 1.0 / p), i);
    }
    std::sort(all.begin(), all.end());

    OracleNeighbors out;
    std::array<int, kNumCategories> votes{};
    std::array<double, kNumCategories> dist_sum{};
    for (std::size_t j = 0; j < k; ++j) {
        out.indices.push_back(all[j].second);
        const auto c = static_cast<std::size_t>(code(labels[all[j].second]));
        votes[c] += 1;
        dist_sum[c] += all[j].first;
    }
    int best = 0;
    for (int c = 1; c < kNumCategories; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        const auto bb = static_cast<std::size_t>(best);
        if (votes[cc] > votes[bb] || (votes[cc] == votes[bb] && dist_sum[cc] < dist_sum[bb])) best = c;
    }
    out.label = category_from_code(best);
    return out;
}

}  // namespace iotscope::testing
