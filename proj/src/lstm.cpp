#include "lstmkit/lstm.hpp"

#include <algorithm>

#include "lstmkit/error.hpp"

namespace lstmkit {

namespace {

Tensor uniform_tensor(std::vector<std::int64_t> shape, Rng& rng, double range) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
        n *= d;
    }
    std::vector<double> data(static_cast<std::size_t>(n));
    for (double& v : data) {
        v = rng.uniform(-range, range);
    }
    return Tensor::from(std::move(data), std::move(shape));
}

// Affine gate pre-activation W x + R h + b.
Tensor gate_pre(Tape* tape, const Tensor& w, const Tensor& r, const Tensor& b,
                const Tensor& x, const Tensor& h) {
    return add(tape, add(tape, vecmat(tape, x, w), vecmat(tape, h, r)), b);
}

}  // namespace

CellWeights CellWeights::init(std::int64_t input_dim, std::int64_t hidden, Rng& rng, double range) {
    CellWeights w;
    Tensor* slots[12] = {&w.w_input,     &w.r_input,     &w.b_input,
                         &w.w_candidate, &w.r_candidate, &w.b_candidate,
                         &w.w_forget,    &w.r_forget,    &w.b_forget,
                         &w.w_output,    &w.r_output,    &w.b_output};
    for (int g = 0; g < 4; ++g) {
        *slots[g * 3 + 0] = uniform_tensor({input_dim, hidden}, rng, range);
        *slots[g * 3 + 1] = uniform_tensor({hidden, hidden}, rng, range);
        *slots[g * 3 + 2] = uniform_tensor({hidden}, rng, range);
    }
    return w;
}

CellWeights CellWeights::zeros(std::int64_t input_dim, std::int64_t hidden) {
    CellWeights w;
    w.w_input = Tensor::zeros({input_dim, hidden});
    w.r_input = Tensor::zeros({hidden, hidden});
    w.b_input = Tensor::zeros({hidden});
    w.w_candidate = w.w_input;
    w.r_candidate = w.r_input;
    w.b_candidate = w.b_input;
    w.w_forget = w.w_input;
    w.r_forget = w.r_input;
    w.b_forget = w.b_input;
    w.w_output = w.w_input;
    w.r_output = w.r_input;
    w.b_output = w.b_input;
    return w;
}

CellState CellState::zeros(std::int64_t hidden) {
    return CellState{Tensor::zeros({hidden}), Tensor::zeros({hidden})};
}

CellState cell_step(Tape* tape, const CellWeights& weights, const Tensor& x_t,
                    const CellState& prev, double forget_bias,
                    OutputGateActivation output_gate) {
    if (x_t.rank() != 1 || x_t.dim(0) != weights.input_dim()) {
        throw DimensionError("cell_step: input " + x_t.shape_str() + " does not match weights expecting [" +
                             std::to_string(weights.input_dim()) + "]");
    }
    if (prev.h.dim(0) != weights.hidden() || prev.c.dim(0) != weights.hidden()) {
        throw DimensionError("cell_step: state width does not match hidden size");
    }

    Tensor i_t = tanh_op(tape, gate_pre(tape, weights.w_input, weights.r_input, weights.b_input, x_t, prev.h));
    Tensor j_t = sigmoid(tape, gate_pre(tape, weights.w_candidate, weights.r_candidate, weights.b_candidate, x_t, prev.h));
    // Folding the constant into the bias makes forget_bias = x exactly equal
    // to shifting b_forget by x.
    Tensor b_f = forget_bias == 0.0 ? weights.b_forget : add_scalar(tape, weights.b_forget, forget_bias);
    Tensor f_t = sigmoid(tape, gate_pre(tape, weights.w_forget, weights.r_forget, b_f, x_t, prev.h));
    Tensor o_pre = gate_pre(tape, weights.w_output, weights.r_output, weights.b_output, x_t, prev.h);
    Tensor o_t = output_gate == OutputGateActivation::Tanh ? tanh_op(tape, o_pre) : sigmoid(tape, o_pre);

    Tensor c_t = add(tape, mul(tape, i_t, j_t), mul(tape, f_t, prev.c));
    Tensor h_t = mul(tape, o_t, tanh_op(tape, c_t));
    return CellState{h_t, c_t};
}

StackResult stack_forward(Tape* tape, const StackConfig& config,
                          const std::vector<CellWeights>& layers,
                          const std::vector<Tensor>& inputs,
                          const std::vector<std::vector<Tensor>>& input_masks) {
    if (layers.empty()) {
        throw ConfigError("stack_forward: no layers");
    }
    if (inputs.empty()) {
        throw ProtocolError("stack_forward: empty input sequence");
    }
    if (input_masks.size() != layers.size()) {
        throw DimensionError("stack_forward: need one mask sequence per layer");
    }
    const std::size_t T = inputs.size();
    for (const auto& per_layer : input_masks) {
        if (per_layer.size() != T) {
            throw DimensionError("stack_forward: mask sequence length does not match inputs");
        }
    }

    StackResult result;
    result.outputs.resize(layers.size());
    result.final_states.reserve(layers.size());

    // signals[t]: what the current layer receives from below (pre-mask).
    std::vector<Tensor> signals = inputs;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const CellWeights& w = layers[l];
        const std::int64_t hidden = w.hidden();
        const bool widths_match = signals.front().dim(0) == hidden;
        const bool vertical = (config.residual_mode == ResidualMode::VerticalOnly ||
                               config.residual_mode == ResidualMode::VerticalAndLateral) &&
                              widths_match;
        const bool lateral = config.residual_mode == ResidualMode::VerticalAndLateral && widths_match;
        const bool horizontal = config.residual_mode == ResidualMode::HorizontalOnly;

        CellState state = CellState::zeros(hidden);
        Tensor prev_raw_h = Tensor::zeros({hidden});
        std::vector<Tensor>& out_signals = result.outputs[l];
        out_signals.reserve(T);

        for (std::size_t t = 0; t < T; ++t) {
            const Tensor& mask = input_masks[l][t];
            if (!mask.same_shape(signals[t])) {
                throw DimensionError("stack_forward: mask shape " + mask.shape_str() +
                                     " does not match layer input " + signals[t].shape_str());
            }
            Tensor x_t = mul(tape, signals[t], mask);
            CellState stepped = cell_step(tape, w, x_t, state, config.forget_bias, config.output_gate);
            Tensor raw_h = stepped.h;

            // The vertical sum uses the post-dropout input the cell consumed,
            // so that with lateral residuals the next layer and the next
            // timestep receive the same value.
            Tensor signal = vertical ? add(tape, raw_h, x_t) : raw_h;
            out_signals.push_back(signal);

            Tensor next_fast = raw_h;
            if (lateral) {
                next_fast = add(tape, raw_h, x_t);
            } else if (horizontal) {
                next_fast = add(tape, raw_h, prev_raw_h);
            }
            prev_raw_h = raw_h;
            state = CellState{next_fast, stepped.c};
        }
        result.final_states.push_back(state);
        signals = out_signals;
    }
    return result;
}

Tensor bidirectional_forward(Tape* tape, const StackConfig& config,
                             const std::vector<CellWeights>& layers,
                             const std::vector<Tensor>& inputs,
                             const std::vector<std::vector<Tensor>>& input_masks) {
    StackResult fwd = stack_forward(tape, config, layers, inputs, input_masks);
    std::vector<Tensor> reversed(inputs.rbegin(), inputs.rend());
    StackResult bwd = stack_forward(tape, config, layers, reversed, input_masks);
    const Tensor& fwd_final = fwd.outputs.back().back();
    const Tensor& bwd_final = bwd.outputs.back().back();
    return concat(tape, fwd_final, bwd_final);
}

}  // namespace lstmkit
