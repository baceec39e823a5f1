#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "iotscope/dataset.hpp"

namespace iotscope {

enum class Activation : std::uint8_t { ReLU };
enum class Optimizer : std::uint8_t { Adam };

// One hidden layer of 100 ReLU units trained with Adam. The optimizer numbers
// are conventional defaults.
struct MlpParams {
    int hidden_layers = 1;
    int hidden_neurons = 100;
    Activation activation = Activation::ReLU;
    Optimizer optimizer = Optimizer::Adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int batch_size = 32;
    int max_epochs = 200;
    std::uint64_t seed = 0;

    void validate() const;
    friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

// h = ReLU(x W1 + b1), logits = h W2 + b2, probabilities = softmax(logits).
struct MlpModel {
    Matrix w1;  // inputs x hidden
    std::vector<double> b1;
    Matrix w2;  // hidden x classes
    std::vector<double> b2;
    Scaler scaler;
    MlpParams params;

    std::size_t inputs() const noexcept { return w1.rows; }
    std::size_t hidden() const noexcept { return w1.cols; }

    // A model with every weight and bias zero.
    static MlpModel zeros(std::size_t inputs, std::size_t hidden);
};

struct MlpGradient {
    Matrix w1;
    std::vector<double> b1;
    Matrix w2;
    std::vector<double> b2;
};

struct MlpPrediction {
    Category label = Category::Surveillance;
    std::array<double, kNumCategories> probabilities{};
};

std::array<double, kNumCategories> softmax(std::span<const double> logits);

// Mean softmax cross-entropy over the batch. x holds already-standardized rows.
double mlp_loss(const MlpModel& model, const Matrix& x, std::span<const Category> y);
double mlp_loss_and_gradient(const MlpModel& model, const Matrix& x, std::span<const Category> y,
                             MlpGradient& grad);

// Seeded init: weights uniform in +-1/sqrt(fan_in) (W1 row-major, then W2),
// biases zero. Each epoch reshuffles the sample order with the same stream.
// Throws DivergenceDetected if the loss becomes non-finite.
MlpModel train_mlp(const Dataset& train, const MlpParams& params);
MlpModel train_mlp(const Matrix& x, std::span<const Category> y, const MlpParams& params);

// Logits for one already-standardized row.
std::array<double, kNumCategories> mlp_logits(const MlpModel& model, std::span<const double> x);

MlpPrediction predict_mlp(const MlpModel& model, const FeatureVector& v);
MlpPrediction predict_mlp(const MlpModel& model, std::span<const double> raw);

}  // namespace iotscope
