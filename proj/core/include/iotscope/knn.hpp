#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "iotscope/dataset.hpp"

namespace iotscope {

enum class KnnAlgorithm : std::uint8_t { Auto, BruteForce, KdTree };
enum class KnnWeights : std::uint8_t { Uniform };

std::string_view knn_algorithm_name(KnnAlgorithm a) noexcept;

// Auto resolves to KdTree for at most this many features, else BruteForce.
inline constexpr std::size_t kKdTreeMaxDims = 20;

struct KnnParams {
    int k = 5;
    KnnWeights weights = KnnWeights::Uniform;
    KnnAlgorithm algorithm = KnnAlgorithm::Auto;
    double minkowski_p = 2.0;

    void validate() const;
    friend bool operator==(const KnnParams&, const KnnParams&) = default;
};

// Exact k-d tree over the rows of a matrix. Leaves hold up to kLeafSize rows.
class KdTree {
public:
    static constexpr std::size_t kLeafSize = 8;

    KdTree() = default;
    explicit KdTree(const Matrix& points);

    struct Node {
        std::size_t dim = 0;
        double split = 0.0;
        std::int32_t left = -1;  // -1 for leaves
        std::int32_t right = -1;
        std::size_t begin = 0;  // range into order() for leaves
        std::size_t end = 0;
    };

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const std::vector<std::uint32_t>& order() const noexcept { return order_; }
    bool empty() const noexcept { return nodes_.empty(); }

private:
    std::int32_t build(const Matrix& points, std::size_t begin, std::size_t end);

    std::vector<Node> nodes_;
    std::vector<std::uint32_t> order_;
};

struct KnnModel {
    Matrix train;  // standardized
    std::vector<Category> labels;
    Scaler scaler;
    KnnParams params;
    KnnAlgorithm resolved = KnnAlgorithm::BruteForce;
    KdTree index;  // built when resolved == KdTree

    std::size_t size() const noexcept { return train.rows; }
};

struct Neighbor {
    std::size_t index = 0;
    double distance = 0.0;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct KnnPrediction {
    Category label = Category::Surveillance;
    std::vector<std::size_t> neighbor_indices;  // nearest first
    std::vector<double> distances;
};

double minkowski_distance(std::span<const double> a, std::span<const double> b, double p);

KnnAlgorithm resolve_algorithm(KnnAlgorithm requested, std::size_t dims) noexcept;

// Throws TooFewSamples when the training set is smaller than k.
KnnModel train_knn(const Dataset& train, const KnnParams& params);
KnnModel train_knn(const Matrix& x, std::span<const Category> y, const KnnParams& params);

// Rebuilds the search index after the model's fields were populated directly.
void rebuild_index(KnnModel& model);

// k nearest training rows to an already-standardized query, ordered by
// distance then training index.
std::vector<Neighbor> knn_search(const KnnModel& model, std::span<const double> query,
                                 KnnAlgorithm algorithm);

// Majority vote among the neighbors; ties go to the smaller summed distance,
// then to the lowest class code.
Category vote(const KnnModel& model, std::span<const Neighbor> neighbors);

KnnPrediction predict_knn(const KnnModel& model, const FeatureVector& v);
KnnPrediction predict_knn(const KnnModel& model, std::span<const double> raw);

}  // namespace iotscope
