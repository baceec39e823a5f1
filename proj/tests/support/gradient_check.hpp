#pragma once

// Central finite differences against mlp_loss_and_gradient.

#include <algorithm>
#include <cmath>
#include <vector>

#include "iotscope/mlp.hpp"
#include "iotscope/rng.hpp"

namespace iotscope::testing {

// Relative error with a small floor on the denominator so that two
// near-zero gradients do not register as a large relative disagreement.
inline double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    return std::fabs(analytic - numeric) / denom;
}

// A model with weights drawn uniformly from [-scale, scale].
inline MlpModel random_mlp(std::size_t inputs, std::size_t hidden, double scale, SplitMix64& rng) {
    MlpModel m = MlpModel::zeros(inputs, hidden);
    for (auto& w : m.w1.data) w = scale * (2 * rng.uniform() - 1);
    for (auto& w : m.b1) w = scale * (2 * rng.uniform() - 1);
    for (auto& w : m.w2.data) w = scale * (2 * rng.uniform() - 1);
    for (auto& w : m.b2) w = scale * (2 * rng.uniform() - 1);
    return m;
}

// Max relative error over the chosen parameter coordinates. `coords` indexes
// the concatenation w1, b1, w2, b2; empty means every coordinate.
inline double max_gradient_error(const MlpModel& model, const Matrix& x,
                                 std::span<const Category> y, std::vector<std::size_t> coords = {},
                                 double step = 1e-5) {
    MlpGradient grad;
    mlp_loss_and_gradient(model, x, y, grad);

    MlpModel probe = model;
    std::vector<double*> params;
    std::vector<double> analytic;
    for (std::size_t i = 0; i < probe.w1.data.size(); ++i) {
        params.push_back(&probe.w1.data[i]);
        analytic.push_back(grad.w1.data[i]);
    }
    for (std::size_t i = 0; i < probe.b1.size(); ++i) {
        params.push_back(&probe.b1[i]);
        analytic.push_back(grad.b1[i]);
    }
    for (std::size_t i = 0; i < probe.w2.data.size(); ++i) {
        params.push_back(&probe.w2.data[i]);
        analytic.push_back(grad.w2.data[i]);
    }
    for (std::size_t i = 0; i < probe.b2.size(); ++i) {
        params.push_back(&probe.b2[i]);
        analytic.push_back(grad.b2[i]);
    }
    if (coords.empty()) {
        for (std::size_t i = 0; i < params.size(); ++i) coords.push_back(i);
    }

    double worst = 0;
    for (const auto c : coords) {
        double* w = params[c];
        const double saved = *w;
        *w = saved + step;
        const double up = mlp_loss(probe, x, y);
        *w = saved - step;
        const double down = mlp_loss(probe, x, y);
        *w = saved;
        worst = std::max(worst, relative_error(analytic[c], (up - down) / (2 * step)));
    }
    return worst;
}

inline std::size_t mlp_param_count(const MlpModel& m) {
    return m.w1.data.size() + m.b1.size() + m.w2.data.size() + m.b2.size();
}

}  // namespace iotscope::testing
