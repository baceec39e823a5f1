#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "iotscope/dataset.hpp"

namespace iotscope {

// Defaults: 200 trees, all 63 features
// considered at every split, no feature weighting.
struct ForestParams {
    int n_trees = 200;
    int max_features = 63;
    std::optional<int> max_depth;  // unlimited when empty
    int min_samples_leaf = 1;
    std::uint64_t seed = 0;

    void validate(std::size_t width) const;
    friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

using ClassCounts = std::array<std::uint32_t, kNumCategories>;

// A split node sends x[feature] <= threshold left. A leaf has feature == -1.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    ClassCounts class_counts{};

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    const TreeNode& leaf_for(std::span<const double> x) const;
    Category predict(std::span<const double> x) const;
    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct ForestModel {
    std::vector<DecisionTree> trees;
    Scaler scaler;
    ForestParams params;

    std::size_t width() const noexcept { return scaler.width(); }
};

struct ForestVote {
    Category label = Category::Surveillance;
    std::array<int, kNumCategories> votes{};
};

// Majority class with ties resolved to the lowest class code.
Category argmax_class(std::span<const int> votes);
Category argmax_class(const ClassCounts& counts);

// Grows a single tree on the given rows (indices into x, duplicates allowed).
DecisionTree grow_tree(const Matrix& x, std::span<const Category> y,
                       std::span<const std::uint32_t> rows, const ForestParams& params,
                       std::uint64_t tree_seed);

// Tree t trains on a bootstrap sample drawn from SplitMix64(seed + t). Splits
// minimize weighted Gini impurity over midpoints between consecutive distinct
// values; ties go to the lowest feature index, then the lowest threshold.
ForestModel train_forest(const Dataset& train, const ForestParams& params);
ForestModel train_forest(const Matrix& x, std::span<const Category> y, const ForestParams& params);

ForestVote predict_forest(const ForestModel& model, const FeatureVector& v);
ForestVote predict_forest(const ForestModel& model, std::span<const double> raw);

}  // namespace iotscope
