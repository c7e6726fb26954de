#pragma once

#include <cstdint>
#include <vector>

#include "lstmkit/tensor.hpp"

namespace lstmkit {

// Adam with bias correction for a single parameter tensor. Moments are
// zero-initialized and step_count increments exactly once per step.
struct AdamState {
    std::int64_t step_count = 0;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_size(std::int64_t n, double learning_rate = 1e-4);
};

// One bias-corrected Adam update; returns the new parameter values and
// advances the state in place. params and grads must be the same shape.
Tensor adam_step(AdamState& state, const Tensor& params, const Tensor& grads);

}  // namespace lstmkit
