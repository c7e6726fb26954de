#pragma once

#include <vector>

#include "lstmkit/ops.hpp"
#include "lstmkit/rng.hpp"
#include "lstmkit/tensor.hpp"

namespace lstmkit {

enum class ResidualMode {
    None,
    VerticalOnly,         // layer output signal is h + layer input
    VerticalAndLateral,   // additionally h + x replaces the fast state
    HorizontalOnly,       // fast state across time becomes h_t + h_{t-1}
};

enum class OutputGateActivation {
    Sigmoid,
    Tanh,
};

// Input, candidate, forget and output transforms of one cell: for each gate
// W [input_dim x hidden], R [hidden x hidden], b [hidden].
struct CellWeights {
    Tensor w_input, r_input, b_input;
    Tensor w_candidate, r_candidate, b_candidate;
    Tensor w_forget, r_forget, b_forget;
    Tensor w_output, r_output, b_output;

    static CellWeights init(std::int64_t input_dim, std::int64_t hidden, Rng& rng, double range = 0.08);
    static CellWeights zeros(std::int64_t input_dim, std::int64_t hidden);

    std::int64_t input_dim() const { return w_input.dim(0); }
    std::int64_t hidden() const { return w_input.dim(1); }
};

// Fast (h) and slow (c) recurrent state; both zero at t = 0.
struct CellState {
    Tensor h;
    Tensor c;

    static CellState zeros(std::int64_t hidden);
};

// One step of the cell:
//   i = tanh(W_i x + R_i h + b_i)
//   j = sigmoid(W_j x + R_j h + b_j)
//   f = sigmoid(W_f x + R_f h + b_f + forget_bias)
//   o = act(W_o x + R_o h + b_o)
//   c' = i * j + f * c
//   h' = o * tanh(c')
CellState cell_step(Tape* tape, const CellWeights& weights, const Tensor& x_t,
                    const CellState& prev, double forget_bias,
                    OutputGateActivation output_gate);

struct StackConfig {
    ResidualMode residual_mode = ResidualMode::None;
    double forget_bias = 0.0;
    OutputGateActivation output_gate = OutputGateActivation::Sigmoid;
};

struct StackResult {
    // outputs[l][t]: the signal layer l passes upward at step t, residual sums
    // included. The last layer's final entry is the stack's output.
    std::vector<std::vector<Tensor>> outputs;
    std::vector<CellState> final_states;
};

// Runs a stack of layers over per-timestep inputs. input_masks[l][t] is the
// dropout mask applied to layer l's input at step t (layer 0 consumes the
// embeddings). Residual wiring:
//   None:        layer input at t = mask * signal from below
//   VerticalOnly: the signal from below is h + (that layer's own input); the
//                 vertical sum is skipped wherever widths disagree (layer 0
//                 when embed_dim != hidden)
//   VerticalAndLateral: as VerticalOnly, and h + x also replaces the fast
//                 state passed to t+1
//   HorizontalOnly: upward wiring as None; the fast state passed to t+1 is
//                 h_t + h_{t-1} (raw step outputs, zero before t = 0)
StackResult stack_forward(Tape* tape, const StackConfig& config,
                          const std::vector<CellWeights>& layers,
                          const std::vector<Tensor>& inputs,
                          const std::vector<std::vector<Tensor>>& input_masks);

// Runs the stack forward and on time-reversed inputs (same weights, same
// masks) and concatenates the two final top-layer signals.
Tensor bidirectional_forward(Tape* tape, const StackConfig& config,
                             const std::vector<CellWeights>& layers,
                             const std::vector<Tensor>& inputs,
                             const std::vector<std::vector<Tensor>>& input_masks);

}  // namespace lstmkit
