#include "iotscope/knn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

namespace iotscope {

std::string_view knn_algorithm_name(KnnAlgorithm a) noexcept {
    switch (a) {
        case KnnAlgorithm::Auto: return "auto";
        case KnnAlgorithm::BruteForce: return "brute";
        case KnnAlgorithm::KdTree: break;
    }
    return "kd_tree";
}

void KnnParams::validate() const {
    if (k < 1) throw InvalidArgument("k must be >= 1");
    if (!(minkowski_p >= 1.0)) throw InvalidArgument("minkowski_p must be >= 1");
}

namespace {

// Monotone stand-in for the distance: sum |d|^p. Both search paths rank by
// this exact value so they agree bit for bit.
double coordinate_term(double d, double p) {
    d = std::fabs(d);
    if (p == 2.0) return d * d;
    if (p == 1.0) return d;
    return std::pow(d, p);
}

double distance_key(std::span<const double> a, std::span<const double> b, double p) {
    double sum = 0;
    for (std::size_t j = 0; j < a.size(); ++j) sum += coordinate_term(a[j] - b[j], p);
    return sum;
}

double key_to_distance(double key, double p) {
    if (p == 2.0) return std::sqrt(key);
    if (p == 1.0) return key;
    return std::pow(key, 1.0 / p);
}

struct Candidate {
    double key;
    std::size_t index;
    bool operator<(const Candidate& o) const noexcept {
        return key < o.key || (key == o.key && index < o.index);
    }
};

// Max-heap of the best k candidates seen so far.
class BestK {
public:
    explicit BestK(std::size_t k) : k_(k) {}

    void offer(Candidate c) {
        if (heap_.size() < k_) {
            heap_.push(c);
        } else if (c < heap_.top()) {
            heap_.pop();
            heap_.push(c);
        }
    }
    bool full() const noexcept { return heap_.size() == k_; }
    double worst_key() const noexcept { return heap_.top().key; }

    std::vector<Candidate> sorted() && {
        std::vector<Candidate> out;
        while (!heap_.empty()) {
            out.push_back(heap_.top());
            heap_.pop();
        }
        std::reverse(out.begin(), out.end());
        return out;
    }

private:
    std::size_t k_;
    std::priority_queue<Candidate> heap_;
};

void kd_search(const KnnModel& m, std::int32_t node_id, std::span<const double> q, BestK& best) {
    const auto& node = m.index.nodes()[static_cast<std::size_t>(node_id)];
    const double p = m.params.minkowski_p;
    if (node.left < 0) {
        for (std::size_t i = node.begin; i < node.end; ++i) {
            const std::size_t r = m.index.order()[i];
            best.offer({distance_key(q, m.train.row(r), p), r});
        }
        return;
    }
    const double diff = q[node.dim] - node.split;
    const auto near = diff <= 0 ? node.left : node.right;
    const auto far = diff <= 0 ? node.right : node.left;
    kd_search(m, near, q, best);
    // Equal bounds are still explored: a tie on distance may carry a lower index.
    if (!best.full() || !(coordinate_term(diff, p) > best.worst_key())) kd_search(m, far, q, best);
}

}  // namespace

KdTree::KdTree(const Matrix& points) {
    order_.resize(points.rows);
    std::iota(order_.begin(), order_.end(), std::uint32_t{0});
    if (points.rows > 0) build(points, 0, points.rows);
}

std::int32_t KdTree::build(const Matrix& points, std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    if (end - begin <= kLeafSize || points.cols == 0) {
        nodes_[static_cast<std::size_t>(id)].begin = begin;
        nodes_[static_cast<std::size_t>(id)].end = end;
        return id;
    }

    std::size_t dim = 0;
    double widest = -1;
    for (std::size_t j = 0; j < points.cols; ++j) {
        double lo = points(order_[begin], j), hi = lo;
        for (std::size_t i = begin + 1; i < end; ++i) {
            lo = std::min(lo, points(order_[i], j));
            hi = std::max(hi, points(order_[i], j));
        }
        if (hi - lo > widest) {
            widest = hi - lo;
            dim = j;
        }
    }
    if (!(widest > 0)) {
        nodes_[static_cast<std::size_t>(id)].begin = begin;
        nodes_[static_cast<std::size_t>(id)].end = end;
        return id;
    }

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::uint32_t a, std::uint32_t b) {
                         const double va = points(a, dim), vb = points(b, dim);
                         return va < vb || (va == vb && a < b);
                     });
    const double split = points(order_[mid], dim);
    const auto left = build(points, begin, mid);
    const auto right = build(points, mid, end);
    Node& node = nodes_[static_cast<std::size_t>(id)];
    node.dim = dim;
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
}

double minkowski_distance(std::span<const double> a, std::span<const double> b, double p) {
    return key_to_distance(distance_key(a, b, p), p);
}

KnnAlgorithm resolve_algorithm(KnnAlgorithm requested, std::size_t dims) noexcept {
    if (requested != KnnAlgorithm::Auto) return requested;
    return dims <= kKdTreeMaxDims ? KnnAlgorithm::KdTree : KnnAlgorithm::BruteForce;
}

void rebuild_index(KnnModel& model) {
    model.resolved = resolve_algorithm(model.params.algorithm, model.train.cols);
    model.index = model.resolved == KnnAlgorithm::KdTree ? KdTree(model.train) : KdTree();
}

KnnModel train_knn(const Matrix& x, std::span<const Category> y, const KnnParams& params) {
    params.validate();
    if (y.size() != x.rows) throw LengthMismatch("feature rows and labels differ in length");
    if (x.rows < static_cast<std::size_t>(params.k)) {
        throw TooFewSamples("training set has " + std::to_string(x.rows) + " samples, k = " +
                            std::to_string(params.k));
    }
    KnnModel model;
    model.params = params;
    model.scaler = fit_scaler(x);
    model.train = model.scaler.apply(x);
    model.labels.assign(y.begin(), y.end());
    rebuild_index(model);
    return model;
}

KnnModel train_knn(const Dataset& train, const KnnParams& params) {
    const auto labels = train.labels();
    return train_knn(feature_matrix(train), labels, params);
}

std::vector<Neighbor> knn_search(const KnnModel& model, std::span<const double> query,
                                 KnnAlgorithm algorithm) {
    const double p = model.params.minkowski_p;
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(model.params.k), model.size());
    BestK best(k);
    if (k > 0) {
        const auto algo = resolve_algorithm(algorithm, model.train.cols);
        if (algo == KnnAlgorithm::KdTree) {
            if (model.index.empty()) throw InvalidArgument("k-d tree index has not been built");
            kd_search(model, 0, query, best);
        } else {
            for (std::size_t r = 0; r < model.size(); ++r) {
                best.offer({distance_key(query, model.train.row(r), p), r});
            }
        }
    }
    std::vector<Neighbor> out;
    for (const auto& c : std::move(best).sorted()) out.push_back({c.index, key_to_distance(c.key, p)});
    return out;
}

Category vote(const KnnModel& model, std::span<const Neighbor> neighbors) {
    std::array<int, kNumCategories> counts{};
    std::array<double, kNumCategories> dist_sum{};
    for (const auto& n : neighbors) {
        const auto c = static_cast<std::size_t>(code(model.labels[n.index]));
        ++counts[c];
        dist_sum[c] += n.distance;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumCategories; ++c) {
        if (counts[c] > counts[best] ||
            (counts[c] == counts[best] && counts[c] > 0 && dist_sum[c] < dist_sum[best])) {
            best = c;
        }
    }
    return static_cast<Category>(best);
}

KnnPrediction predict_knn(const KnnModel& model, std::span<const double> raw) {
    const auto q = model.scaler.apply(raw);
    const auto neighbors = knn_search(model, q, model.resolved);
    KnnPrediction out;
    out.label = vote(model, neighbors);
    for (const auto& n : neighbors) {
        out.neighbor_indices.push_back(n.index);
        out.distances.push_back(n.distance);
    }
    return out;
}

KnnPrediction predict_knn(const KnnModel& model, const FeatureVector& v) {
    return predict_knn(model, std::span<const double>(v.values));
}

}  // namespace iotscope
