#include "lstmkit/adam.hpp"

#include <cmath>

#include "lstmkit/error.hpp"

namespace lstmkit {

AdamState AdamState::for_size(std::int64_t n, double learning_rate) {
    AdamState s;
    s.learning_rate = learning_rate;
    s.first_moment.assign(static_cast<std::size_t>(n), 0.0);
    s.second_moment.assign(static_cast<std::size_t>(n), 0.0);
    return s;
}

Tensor adam_step(AdamState& state, const Tensor& params, const Tensor& grads) {
    if (!params.same_shape(grads)) {
        throw DimensionError("adam_step: params " + params.shape_str() + " vs grads " + grads.shape_str());
    }
    if (state.first_moment.size() != static_cast<std::size_t>(params.size())) {
        throw DimensionError("adam_step: state sized for a different parameter tensor");
    }
    state.step_count += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
    auto pv = params.values();
    auto gv = grads.values();
    std::vector<double> out(pv.size());
    for (std::size_t i = 0; i < pv.size(); ++i) {
        double g = gv[i];
        double m = state.first_moment[i] = b1 * state.first_moment[i] + (1.0 - b1) * g;
        double v = state.second_moment[i] = b2 * state.second_moment[i] + (1.0 - b2) * g * g;
        double m_hat = m / corr1;
        double v_hat = v / corr2;
        out[i] = pv[i] - state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    return Tensor::from(std::move(out), params.shape());
}

}  // namespace lstmkit
