#include "iotscope/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "iotscope/rng.hpp"

namespace iotscope {

void MlpParams::validate() const {
    if (hidden_layers != 1) throw InvalidArgument("only a single hidden layer is supported");
    if (hidden_neurons < 1) throw InvalidArgument("hidden_neurons must be >= 1");
    if (!(learning_rate > 0)) throw InvalidArgument("learning_rate must be > 0");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
        throw InvalidArgument("beta1 and beta2 must lie in [0, 1)");
    }
    if (!(epsilon > 0)) throw InvalidArgument("epsilon must be > 0");
    if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
    if (max_epochs < 0) throw InvalidArgument("max_epochs must be >= 0");
}

MlpModel MlpModel::zeros(std::size_t inputs, std::size_t hidden) {
    MlpModel m;
    m.w1 = Matrix(inputs, hidden);
    m.b1.assign(hidden, 0.0);
    m.w2 = Matrix(hidden, kNumCategories);
    m.b2.assign(kNumCategories, 0.0);
    m.scaler.means.assign(inputs, 0.0);
    m.scaler.stds.assign(inputs, 1.0);
    m.params.hidden_neurons = static_cast<int>(hidden);
    return m;
}

std::array<double, kNumCategories> softmax(std::span<const double> logits) {
    std::array<double, kNumCategories> p{};
    const double peak = *std::max_element(logits.begin(), logits.end());
    double sum = 0;
    for (std::size_t c = 0; c < p.size(); ++c) {
        p[c] = std::exp(logits[c] - peak);
        sum += p[c];
    }
    for (auto& v : p) v /= sum;
    return p;
}

namespace {

// Forward pass for one row; fills the hidden pre-activations and returns logits.
std::array<double, kNumCategories> forward(const MlpModel& m, std::span<const double> x,
                                           std::vector<double>& pre) {
    const std::size_t hidden = m.hidden();
    pre.assign(m.b1.begin(), m.b1.end());
    for (std::size_t i = 0; i < m.inputs(); ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* w = m.w1.data.data() + i * hidden;
        for (std::size_t j = 0; j < hidden; ++j) pre[j] += xi * w[j];
    }
    std::array<double, kNumCategories> logits{};
    std::copy(m.b2.begin(), m.b2.end(), logits.begin());
    for (std::size_t j = 0; j < hidden; ++j) {
        const double h = pre[j] > 0 ? pre[j] : 0.0;
        if (h == 0.0) continue;
        for (std::size_t c = 0; c < kNumCategories; ++c) logits[c] += h * m.w2(j, c);
    }
    return logits;
}

double cross_entropy(std::span<const double> logits, std::size_t target) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    double sum = 0;
    for (double l : logits) sum += std::exp(l - peak);
    return peak + std::log(sum) - logits[target];
}

MlpGradient zero_gradient(const MlpModel& m) {
    return {Matrix(m.w1.rows, m.w1.cols), std::vector<double>(m.b1.size(), 0.0),
            Matrix(m.w2.rows, m.w2.cols), std::vector<double>(m.b2.size(), 0.0)};
}

// Batch loss and gradient over the given row indices of x.
double batch_loss_and_gradient(const MlpModel& m, const Matrix& x, std::span<const Category> y,
                               std::span<const std::size_t> batch, MlpGradient& g) {
    const std::size_t hidden = m.hidden();
    for (auto& v : g.w1.data) v = 0;
    for (auto& v : g.w2.data) v = 0;
    std::fill(g.b1.begin(), g.b1.end(), 0.0);
    std::fill(g.b2.begin(), g.b2.end(), 0.0);

    const double inv_n = 1.0 / static_cast<double>(batch.size());
    std::vector<double> pre;
    std::vector<double> dh(hidden);
    double loss = 0;
    for (const std::size_t r : batch) {
        const auto row = x.row(r);
        const auto logits = forward(m, row, pre);
        const auto target = static_cast<std::size_t>(code(y[r]));
        loss += cross_entropy(logits, target);

        auto dlogits = softmax(logits);
        dlogits[target] -= 1.0;
        for (auto& d : dlogits) d *= inv_n;

        for (std::size_t c = 0; c < kNumCategories; ++c) g.b2[c] += dlogits[c];
        for (std::size_t j = 0; j < hidden; ++j) {
            double back = 0;
            const double h = pre[j] > 0 ? pre[j] : 0.0;
            for (std::size_t c = 0; c < kNumCategories; ++c) {
                g.w2(j, c) += h * dlogits[c];
                back += m.w2(j, c) * dlogits[c];
            }
            dh[j] = pre[j] > 0 ? back : 0.0;
            g.b1[j] += dh[j];
        }
        for (std::size_t i = 0; i < m.inputs(); ++i) {
            const double xi = row[i];
            if (xi == 0.0) continue;
            double* gw = g.w1.data.data() + i * hidden;
            for (std::size_t j = 0; j < hidden; ++j) gw[j] += xi * dh[j];
        }
    }
    return loss * inv_n;
}

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;

    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    void step(std::span<double> params, std::span<const double> grads, const MlpParams& p,
              double bias1, double bias2) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = p.beta1 * m[i] + (1 - p.beta1) * grads[i];
            v[i] = p.beta2 * v[i] + (1 - p.beta2) * grads[i] * grads[i];
            const double m_hat = m[i] / bias1;
            const double v_hat = v[i] / bias2;
            params[i] -= p.learning_rate * m_hat / (std::sqrt(v_hat) + p.epsilon);
        }
    }
};

}  // namespace

double mlp_loss(const MlpModel& model, const Matrix& x, std::span<const Category> y) {
    if (x.rows == 0) throw EmptyInput("empty batch");
    std::vector<double> pre;
    double loss = 0;
    for (std::size_t r = 0; r < x.rows; ++r) {
        loss += cross_entropy(forward(model, x.row(r), pre), static_cast<std::size_t>(code(y[r])));
    }
    return loss / static_cast<double>(x.rows);
}

double mlp_loss_and_gradient(const MlpModel& model, const Matrix& x, std::span<const Category> y,
                             MlpGradient& grad) {
    if (x.rows == 0) throw EmptyInput("empty batch");
    if (y.size() != x.rows) throw LengthMismatch("feature rows and labels differ in length");
    grad = zero_gradient(model);
    std::vector<std::size_t> all(x.rows);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return batch_loss_and_gradient(model, x, y, all, grad);
}

MlpModel train_mlp(const Matrix& x, std::span<const Category> y, const MlpParams& params) {
    if (x.rows == 0) throw EmptyDataset("cannot train an MLP on an empty dataset");
    if (y.size() != x.rows) throw LengthMismatch("feature rows and labels differ in length");
    params.validate();

    const auto hidden = static_cast<std::size_t>(params.hidden_neurons);
    MlpModel model = MlpModel::zeros(x.cols, hidden);
    model.params = params;
    model.scaler = fit_scaler(x);
    const Matrix scaled = model.scaler.apply(x);

    SplitMix64 rng(params.seed);
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(x.cols));
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (auto& w : model.w1.data) w = rng.uniform(-bound1, bound1);
    for (auto& w : model.w2.data) w = rng.uniform(-bound2, bound2);

    AdamState adam_w1(model.w1.data.size()), adam_b1(hidden), adam_w2(model.w2.data.size()),
        adam_b2(kNumCategories);
    MlpGradient grad = zero_gradient(model);
    std::vector<std::size_t> order(scaled.rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto batch = static_cast<std::size_t>(params.batch_size);

    std::uint64_t step = 0;
    for (int epoch = 0; epoch < params.max_epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::span<const std::size_t> rows(order.data() + start,
                                                    std::min(batch, order.size() - start));
            const double loss = batch_loss_and_gradient(model, scaled, y, rows, grad);
            if (!std::isfinite(loss)) {
                throw DivergenceDetected("loss became non-finite in epoch " + std::to_string(epoch));
            }
            ++step;
            const double bias1 = 1 - std::pow(params.beta1, static_cast<double>(step));
            const double bias2 = 1 - std::pow(params.beta2, static_cast<double>(step));
            adam_w1.step(model.w1.data, grad.w1.data, params, bias1, bias2);
            adam_b1.step(model.b1, grad.b1, params, bias1, bias2);
            adam_w2.step(model.w2.data, grad.w2.data, params, bias1, bias2);
            adam_b2.step(model.b2, grad.b2, params, bias1, bias2);
        }
    }
    return model;
}

MlpModel train_mlp(const Dataset& train, const MlpParams& params) {
    const auto labels = train.labels();
    return train_mlp(feature_matrix(train), labels, params);
}

std::array<double, kNumCategories> mlp_logits(const MlpModel& model, std::span<const double> x) {
    std::vector<double> pre;
    return forward(model, x, pre);
}

MlpPrediction predict_mlp(const MlpModel& model, std::span<const double> raw) {
    const auto x = model.scaler.apply(raw);
    MlpPrediction out;
    out.probabilities = softmax(mlp_logits(model, x));
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumCategories; ++c) {
        if (out.probabilities[c] > out.probabilities[best]) best = c;
    }
    out.label = static_cast<Category>(best);
    return out;
}

MlpPrediction predict_mlp(const MlpModel& model, const FeatureVector& v) {
    return predict_mlp(model, std::span<const double>(v.values));
}

}  // namespace iotscope
