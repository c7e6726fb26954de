#pragma once

#include <span>
#include <string>
#include <vector>

#include "lstmkit/lstm.hpp"

namespace lstmkit {

// Full architecture and regularization description of the classifier.
struct ModelConfig {
    int num_layers = 2;
    std::int64_t hidden_size = 170;
    std::int64_t embed_dim = 300;
    int num_classes = 5;
    ResidualMode residual_mode = ResidualMode::None;
    bool bidirectional = false;
    bool shared_bidirectional_weights = false;
    double forget_bias = 0.0;
    double input_keep_prob = 1.0;
    bool pooling_enabled = false;
    std::int64_t pooling_dim = 300;
    OutputGateActivation output_gate = OutputGateActivation::Sigmoid;

    // Throws ConfigError on inconsistent settings. Width checks happen here,
    // never mid-pass.
    void validate() const;

    // Width of the vector fed to the projection layer.
    std::int64_t projection_input() const {
        return hidden_size * (bidirectional ? 2 : 1) + (pooling_enabled ? pooling_dim : 0);
    }
    StackConfig stack_config() const {
        return StackConfig{residual_mode, forget_bias, output_gate};
    }
};

// Closed-form trainable parameter count for a config. Embedding table rows are
// excluded; per layer 4 * ((input_width + hidden) * hidden + hidden), doubled
// for unshared bidirectional weights, plus the pooling MLP and the projection.
std::int64_t count_parameters(const ModelConfig& config);

struct NamedParam {
    std::string name;
    Tensor* tensor;
};

// The classifier's weights: the LSTM stack (two stacks when bidirectional
// weights are not shared), the optional pooling MLP, and the projection.
struct Classifier {
    ModelConfig config;
    std::vector<CellWeights> layers;  // forward stack, then backward if unshared
    Tensor mlp_weight;                // [embed_dim x pooling_dim], pooling only
    Tensor mlp_bias;                  // [pooling_dim]
    Tensor proj_weight;               // [projection_input x num_classes]
    Tensor proj_bias;                 // [num_classes]

    static Classifier init(const ModelConfig& config, Rng& rng);

    // Stable enumeration used by the optimizer and checkpoints.
    std::vector<NamedParam> params();
    std::vector<std::pair<std::string, const Tensor*>> params_const() const;
};

// One forward pass worth of dropout masks. layer_inputs[l][t] multiplies layer
// l's input at processing step t (both directions of a shared-weight
// bidirectional pass consume the same sequence). The pooling path reuses
// layer_inputs[0]; the projection input gets rnn_final on its recurrent half
// and mlp_output (drawn separately) on the pooled half, so no coordinate is
// masked twice.
struct DropoutMasks {
    std::vector<std::vector<Tensor>> layer_inputs;
    Tensor rnn_final;
    Tensor mlp_output;
};

enum class ForwardMode {
    Train,
    StandardInference,  // all-ones masks; inverted dropout needs no rescale
    McSample,           // fresh masks, same as training-time stochasticity
};

// Draws masks for a length-T pass; rng == nullptr (or keep_prob 1) yields
// all-ones masks.
DropoutMasks draw_masks(const ModelConfig& config, std::size_t seq_len, Rng* rng);

// Temporal mean of masked word vectors, then affine map + tanh, then the
// output mask. input_masks must be the same masks the RNN's first layer
// consumes.
Tensor embed_average_pool(Tape* tape, std::span<const Tensor> word_vectors,
                          std::span<const Tensor> input_masks,
                          const Tensor& mlp_weight, const Tensor& mlp_bias,
                          const Tensor& output_mask);

struct ForwardResult {
    Tensor logits;
    Tensor pre_projection;  // projection input: [rnn final ; pooled]
};

// Embeds token ids, runs the (bi)directional stack, optionally concatenates
// the pooled vector, applies projection-input dropout and the affine
// projection. Masks are taken as given, so callers can freeze them.
ForwardResult classify_forward(Tape* tape, const Classifier& model,
                               const Tensor& embedding_matrix,
                               std::span<const int> token_ids,
                               const DropoutMasks& masks);

// Mode-based wrapper: Train/McSample draw fresh masks from rng,
// StandardInference ignores rng and uses all-ones masks.
ForwardResult classify_forward(Tape* tape, const Classifier& model,
                               const Tensor& embedding_matrix,
                               std::span<const int> token_ids,
                               ForwardMode mode, Rng* rng);

const char* residual_mode_name(ResidualMode mode);
ResidualMode residual_mode_from_name(const std::string& name);
const char* output_gate_name(OutputGateActivation act);
OutputGateActivation output_gate_from_name(const std::string& name);

}  // namespace lstmkit
