#include "iotscope/forest.hpp"

#include <algorithm>
#include <numeric>
#include <thread>

#include "iotscope/rng.hpp"

namespace iotscope {

void ForestParams::validate(std::size_t width) const {
    if (n_trees < 1) throw InvalidArgument("n_trees must be >= 1");
    if (max_features < 1 || max_features > static_cast<int>(kNumFeatures)) {
        throw InvalidArgument("max_features must lie in [1, 63]");
    }
    if (width > 0 && static_cast<std::size_t>(max_features) > width) {
        throw InvalidArgument("max_features exceeds the feature count");
    }
    if (max_depth && *max_depth < 0) throw InvalidArgument("max_depth must be >= 0");
    if (min_samples_leaf < 1) throw InvalidArgument("min_samples_leaf must be >= 1");
}

Category argmax_class(std::span<const int> votes) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < votes.size(); ++c) {
        if (votes[c] > votes[best]) best = c;
    }
    return static_cast<Category>(best);
}

Category argmax_class(const ClassCounts& counts) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c) {
        if (counts[c] > counts[best]) best = c;
    }
    return static_cast<Category>(best);
}

const TreeNode& DecisionTree::leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const auto& n = nodes[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                            : n.right);
    }
    return nodes[i];
}

Category DecisionTree::predict(std::span<const double> x) const {
    return argmax_class(leaf_for(x).class_counts);
}

namespace {

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double score = -1.0;  // sum_c nL_c^2 / nL + sum_c nR_c^2 / nR; larger = lower Gini
    std::size_t n_left = 0;
};

class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, std::span<const Category> y, const ForestParams& params,
                std::uint64_t seed)
        : x_(x), y_(y), params_(params), rng_(seed) {}

    DecisionTree build(std::vector<std::uint32_t> rows) {
        DecisionTree tree;
        struct Pending {
            std::size_t node;
            std::size_t begin, end;
            int depth;
        };
        rows_ = std::move(rows);
        tree.nodes.emplace_back();
        std::vector<Pending> stack{{0, 0, rows_.size(), 0}};
        while (!stack.empty()) {
            const Pending job = stack.back();
            stack.pop_back();
            const std::span<std::uint32_t> rows_here(rows_.data() + job.begin, job.end - job.begin);

            ClassCounts counts{};
            for (auto r : rows_here) ++counts[static_cast<std::size_t>(code(y_[r]))];
            const bool pure =
                std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
            const bool depth_capped = params_.max_depth && job.depth >= *params_.max_depth;
            const auto msl = static_cast<std::size_t>(params_.min_samples_leaf);

            std::optional<SplitChoice> split;
            if (!pure && !depth_capped && rows_here.size() >= 2 * msl) split = best_split(rows_here);
            if (!split) {
                tree.nodes[job.node].class_counts = counts;
                continue;
            }

            const auto f = static_cast<std::size_t>(split->feature);
            const auto mid = std::stable_partition(rows_here.begin(), rows_here.end(), [&](auto r) {
                return x_(r, f) <= split->threshold;
            });
            const auto n_left = static_cast<std::size_t>(mid - rows_here.begin());

            const auto left = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes.emplace_back();
            const auto right = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes.emplace_back();
            TreeNode& node = tree.nodes[job.node];
            node.feature = split->feature;
            node.threshold = split->threshold;
            node.left = left;
            node.right = right;
            // Right first so the left subtree is expanded first.
            stack.push_back({static_cast<std::size_t>(right), job.begin + n_left, job.end, job.depth + 1});
            stack.push_back({static_cast<std::size_t>(left), job.begin, job.begin + n_left, job.depth + 1});
        }
        return tree;
    }

private:
    std::vector<std::size_t> candidate_features() {
        std::vector<std::size_t> features(x_.cols);
        std::iota(features.begin(), features.end(), std::size_t{0});
        const auto m = static_cast<std::size_t>(params_.max_features);
        if (m < features.size()) {
            // Partial Fisher-Yates from the front.
            for (std::size_t i = 0; i < m; ++i) {
                const auto j = i + static_cast<std::size_t>(rng_.below(features.size() - i));
                std::swap(features[i], features[j]);
            }
            features.resize(m);
            std::sort(features.begin(), features.end());
        }
        return features;
    }

    std::optional<SplitChoice> best_split(std::span<const std::uint32_t> rows) {
        const std::size_t n = rows.size();
        const auto msl = static_cast<std::size_t>(params_.min_samples_leaf);

        ClassCounts total{};
        for (auto r : rows) ++total[static_cast<std::size_t>(code(y_[r]))];
        std::uint64_t total_sq = 0;
        for (auto c : total) total_sq += std::uint64_t{c} * c;

        std::optional<SplitChoice> best;
        std::vector<std::pair<double, std::uint8_t>> column(n);
        for (const std::size_t f : candidate_features()) {
            for (std::size_t i = 0; i < n; ++i) {
                column[i] = {x_(rows[i], f), static_cast<std::uint8_t>(code(y_[rows[i]]))};
            }
            std::sort(column.begin(), column.end());
            if (column.front().first == column.back().first) continue;

            ClassCounts left{};
            ClassCounts right = total;
            std::uint64_t left_sq = 0;
            std::uint64_t right_sq = total_sq;
            for (std::size_t i = 1; i < n; ++i) {
                const auto c = column[i - 1].second;
                left_sq += 2 * std::uint64_t{left[c]} + 1;
                ++left[c];
                right_sq -= 2 * std::uint64_t{right[c]} - 1;
                --right[c];

                const double lo = column[i - 1].first;
                const double hi = column[i].first;
                if (lo == hi || i < msl || n - i < msl) continue;

                const double score = static_cast<double>(left_sq) / static_cast<double>(i) +
                                     static_cast<double>(right_sq) / static_cast<double>(n - i);
                if (best && !(score > best->score)) continue;
                double threshold = lo + (hi - lo) / 2.0;
                if (!(threshold < hi)) threshold = lo;
                best = SplitChoice{static_cast<int>(f), threshold, score, i};
            }
        }
        return best;
    }

    const Matrix& x_;
    std::span<const Category> y_;
    const ForestParams& params_;
    SplitMix64 rng_;
    std::vector<std::uint32_t> rows_;
};

}  // namespace

DecisionTree grow_tree(const Matrix& x, std::span<const Category> y,
                       std::span<const std::uint32_t> rows, const ForestParams& params,
                       std::uint64_t tree_seed) {
    TreeBuilder builder(x, y, params, tree_seed);
    return builder.build({rows.begin(), rows.end()});
}

ForestModel train_forest(const Matrix& x, std::span<const Category> y, const ForestParams& params) {
    if (x.rows == 0) throw EmptyDataset("cannot train a forest on an empty dataset");
    if (y.size() != x.rows) throw LengthMismatch("feature rows and labels differ in length");
    params.validate(x.cols);

    ForestModel model;
    model.params = params;
    model.scaler = fit_scaler(x);
    const Matrix scaled = model.scaler.apply(x);

    const auto n_trees = static_cast<std::size_t>(params.n_trees);
    model.trees.resize(n_trees);
    auto grow = [&](std::size_t t) {
        const std::uint64_t seed = params.seed + t;
        SplitMix64 rng(seed);
        std::vector<std::uint32_t> rows(scaled.rows);
        for (auto& r : rows) r = static_cast<std::uint32_t>(rng.below(scaled.rows));
        // The feature-sampling stream continues from the bootstrap draws.
        TreeBuilder builder(scaled, y, params, rng.next());
        model.trees[t] = builder.build(std::move(rows));
    };

    const std::size_t workers =
        std::min<std::size_t>(n_trees, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t t = 0; t < n_trees; ++t) grow(t);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t t = w; t < n_trees; t += workers) grow(t);
            });
        }
    }
    return model;
}

ForestModel train_forest(const Dataset& train, const ForestParams& params) {
    const auto labels = train.labels();
    return train_forest(feature_matrix(train), labels, params);
}

ForestVote predict_forest(const ForestModel& model, std::span<const double> raw) {
    const auto x = model.scaler.apply(raw);
    ForestVote out;
    for (const auto& tree : model.trees) ++out.votes[static_cast<std::size_t>(code(tree.predict(x)))];
    out.label = argmax_class(out.votes);
    return out;
}

ForestVote predict_forest(const ForestModel& model, const FeatureVector& v) {
    return predict_forest(model, std::span<const double>(v.values));
}

}  // namespace iotscope
