#include "lstmkit/model.hpp"

#include <sstream>

namespace lstmkit {

void ModelConfig::validate() const {
    if (num_layers < 1) {
        throw ConfigError("num_layers must be >= 1");
    }
    if (hidden_size < 1 || embed_dim < 1) {
        throw ConfigError("hidden_size and embed_dim must be >= 1");
    }
    if (num_classes < 2) {
        throw ConfigError("num_classes must be >= 2");
    }
    if (!(input_keep_prob > 0.0) || input_keep_prob > 1.0) {
        std::ostringstream os;
        os << "input_keep_prob must be in (0, 1], got " << input_keep_prob;
        throw ConfigError(os.str());
    }
    if (shared_bidirectional_weights && !bidirectional) {
        throw ConfigError("shared_bidirectional_weights requires bidirectional");
    }
    if (pooling_enabled && pooling_dim < 1) {
        throw ConfigError("pooling_dim must be >= 1");
    }
}

std::int64_t count_parameters(const ModelConfig& config) {
    config.validate();
    std::int64_t total = 0;
    const std::int64_t h = config.hidden_size;
    for (int l = 0; l < config.num_layers; ++l) {
        std::int64_t in = l == 0 ? config.embed_dim : h;
        std::int64_t per_layer = 4 * ((in + h) * h + h);
        total += per_layer * ((config.bidirectional && !config.shared_bidirectional_weights) ? 2 : 1);
    }
    if (config.pooling_enabled) {
        total += config.embed_dim * config.pooling_dim + config.pooling_dim;
    }
    total += config.projection_input() * config.num_classes + config.num_classes;
    return total;
}

Classifier Classifier::init(const ModelConfig& config, Rng& rng) {
    config.validate();
    Classifier m;
    m.config = config;
    int stacks = (config.bidirectional && !config.shared_bidirectional_weights) ? 2 : 1;
    for (int s = 0; s < stacks; ++s) {
        for (int l = 0; l < config.num_layers; ++l) {
            std::int64_t in = l == 0 ? config.embed_dim : config.hidden_size;
            m.layers.push_back(CellWeights::init(in, config.hidden_size, rng));
        }
    }
    if (config.pooling_enabled) {
        std::vector<double> w(static_cast<std::size_t>(config.embed_dim * config.pooling_dim));
        for (double& v : w) v = rng.uniform(-0.08, 0.08);
        m.mlp_weight = Tensor::from(std::move(w), {config.embed_dim, config.pooling_dim});
        std::vector<double> b(static_cast<std::size_t>(config.pooling_dim));
        for (double& v : b) v = rng.uniform(-0.08, 0.08);
        m.mlp_bias = Tensor::from(std::move(b), {config.pooling_dim});
    }
    std::int64_t pin = config.projection_input();
    std::vector<double> pw(static_cast<std::size_t>(pin * config.num_classes));
    for (double& v : pw) v = rng.uniform(-0.08, 0.08);
    m.proj_weight = Tensor::from(std::move(pw), {pin, config.num_classes});
    std::vector<double> pb(static_cast<std::size_t>(config.num_classes));
    for (double& v : pb) v = rng.uniform(-0.08, 0.08);
    m.proj_bias = Tensor::from(std::move(pb), {static_cast<std::int64_t>(config.num_classes)});
    return m;
}

std::vector<NamedParam> Classifier::params() {
    std::vector<NamedParam> out;
    int per_stack = config.num_layers;
    for (std::size_t idx = 0; idx < layers.size(); ++idx) {
        std::string prefix = (static_cast<int>(idx) < per_stack)
                                 ? "layer" + std::to_string(idx)
                                 : "bwd_layer" + std::to_string(idx - static_cast<std::size_t>(per_stack));
        CellWeights& w = layers[idx];
        out.push_back({prefix + ".w_input", &w.w_input});
        out.push_back({prefix + ".r_input", &w.r_input});
        out.push_back({prefix + ".b_input", &w.b_input});
        out.push_back({prefix + ".w_candidate", &w.w_candidate});
        out.push_back({prefix + ".r_candidate", &w.r_candidate});
        out.push_back({prefix + ".b_candidate", &w.b_candidate});
        out.push_back({prefix + ".w_forget", &w.w_forget});
        out.push_back({prefix + ".r_forget", &w.r_forget});
        out.push_back({prefix + ".b_forget", &w.b_forget});
        out.push_back({prefix + ".w_output", &w.w_output});
        out.push_back({prefix + ".r_output", &w.r_output});
        out.push_back({prefix + ".b_output", &w.b_output});
    }
    if (config.pooling_enabled) {
        out.push_back({"mlp.weight", &mlp_weight});
        out.push_back({"mlp.bias", &mlp_bias});
    }
    out.push_back({"proj.weight", &proj_weight});
    out.push_back({"proj.bias", &proj_bias});
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> Classifier::params_const() const {
    auto named = const_cast<Classifier*>(this)->params();
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(named.size());
    for (auto& p : named) {
        out.emplace_back(p.name, p.tensor);
    }
    return out;
}

DropoutMasks draw_masks(const ModelConfig& config, std::size_t seq_len, Rng* rng) {
    config.validate();
    if (seq_len == 0) {
        throw ProtocolError("cannot draw masks for an empty sequence");
    }
    const double keep = config.input_keep_prob;
    auto make = [&](std::vector<std::int64_t> shape) {
        if (!rng || keep == 1.0) {
            return Tensor::full(std::move(shape), 1.0);
        }
        return dropout_mask(*rng, std::move(shape), keep);
    };
    DropoutMasks masks;
    masks.layer_inputs.resize(static_cast<std::size_t>(config.num_layers));
    for (int l = 0; l < config.num_layers; ++l) {
        std::int64_t width = l == 0 ? config.embed_dim : config.hidden_size;
        auto& seq = masks.layer_inputs[static_cast<std::size_t>(l)];
        seq.reserve(seq_len);
        for (std::size_t t = 0; t < seq_len; ++t) {
            seq.push_back(make({width}));
        }
    }
    masks.rnn_final = make({config.hidden_size * (config.bidirectional ? 2 : 1)});
    if (config.pooling_enabled) {
        masks.mlp_output = make({config.pooling_dim});
    }
    return masks;
}

Tensor embed_average_pool(Tape* tape, std::span<const Tensor> word_vectors,
                          std::span<const Tensor> input_masks,
                          const Tensor& mlp_weight, const Tensor& mlp_bias,
                          const Tensor& output_mask) {
    if (word_vectors.empty()) {
        throw ProtocolError("embed_average_pool: empty sequence");
    }
    if (input_masks.size() != word_vectors.size()) {
        throw DimensionError("embed_average_pool: one mask per word vector required");
    }
    std::vector<Tensor> masked;
    masked.reserve(word_vectors.size());
    for (std::size_t t = 0; t < word_vectors.size(); ++t) {
        masked.push_back(mul(tape, word_vectors[t], input_masks[t]));
    }
    Tensor pooled = mean_of(tape, masked);
    Tensor hidden = tanh_op(tape, add(tape, vecmat(tape, pooled, mlp_weight), mlp_bias));
    return mul(tape, hidden, output_mask);
}

ForwardResult classify_forward(Tape* tape, const Classifier& model,
                               const Tensor& embedding_matrix,
                               std::span<const int> token_ids,
                               const DropoutMasks& masks) {
    const ModelConfig& config = model.config;
    if (token_ids.empty()) {
        throw ProtocolError("classify_forward: empty token sequence");
    }
    if (embedding_matrix.rank() != 2 || embedding_matrix.dim(1) != config.embed_dim) {
        throw DimensionError("embedding matrix width does not match embed_dim");
    }

    Tensor embedded = gather_rows(tape, embedding_matrix, token_ids);
    std::vector<Tensor> xs;
    xs.reserve(token_ids.size());
    for (std::size_t t = 0; t < token_ids.size(); ++t) {
        xs.push_back(row(tape, embedded, static_cast<std::int64_t>(t)));
    }

    StackConfig stack_cfg = config.stack_config();
    Tensor rnn_out;
    if (config.bidirectional) {
        if (config.shared_bidirectional_weights) {
            rnn_out = bidirectional_forward(tape, stack_cfg, model.layers, xs, masks.layer_inputs);
        } else {
            std::vector<CellWeights> fwd(model.layers.begin(), model.layers.begin() + config.num_layers);
            std::vector<CellWeights> bwd(model.layers.begin() + config.num_layers, model.layers.end());
            StackResult f = stack_forward(tape, stack_cfg, fwd, xs, masks.layer_inputs);
            std::vector<Tensor> reversed(xs.rbegin(), xs.rend());
            StackResult b = stack_forward(tape, stack_cfg, bwd, reversed, masks.layer_inputs);
            rnn_out = concat(tape, f.outputs.back().back(), b.outputs.back().back());
        }
    } else {
        StackResult f = stack_forward(tape, stack_cfg, model.layers, xs, masks.layer_inputs);
        rnn_out = f.outputs.back().back();
    }

    Tensor proj_in = mul(tape, rnn_out, masks.rnn_final);
    if (config.pooling_enabled) {
        Tensor pooled = embed_average_pool(tape, xs, masks.layer_inputs[0],
                                           model.mlp_weight, model.mlp_bias, masks.mlp_output);
        proj_in = concat(tape, proj_in, pooled);
    }

    Tensor logits = add(tape, vecmat(tape, proj_in, model.proj_weight), model.proj_bias);
    return ForwardResult{logits, proj_in};
}

ForwardResult classify_forward(Tape* tape, const Classifier& model,
                               const Tensor& embedding_matrix,
                               std::span<const int> token_ids,
                               ForwardMode mode, Rng* rng) {
    Rng* effective = (mode == ForwardMode::StandardInference) ? nullptr : rng;
    DropoutMasks masks = draw_masks(model.config, token_ids.size(), effective);
    return classify_forward(tape, model, embedding_matrix, token_ids, masks);
}

const char* residual_mode_name(ResidualMode mode) {
    switch (mode) {
        case ResidualMode::None: return "none";
        case ResidualMode::VerticalOnly: return "vertical";
        case ResidualMode::VerticalAndLateral: return "vertical_lateral";
        case ResidualMode::HorizontalOnly: return "horizontal";
    }
    return "none";
}

ResidualMode residual_mode_from_name(const std::string& name) {
    if (name == "none") return ResidualMode::None;
    if (name == "vertical") return ResidualMode::VerticalOnly;
    if (name == "vertical_lateral") return ResidualMode::VerticalAndLateral;
    if (name == "horizontal") return ResidualMode::HorizontalOnly;
    throw ConfigError("unknown residual mode: " + name);
}

const char* output_gate_name(OutputGateActivation act) {
    return act == OutputGateActivation::Tanh ? "tanh" : "sigmoid";
}

OutputGateActivation output_gate_from_name(const std::string& name) {
    if (name == "sigmoid") return OutputGateActivation::Sigmoid;
    if (name == "tanh") return OutputGateActivation::Tanh;
    throw ConfigError("unknown output gate activation: " + name);
}

}  // namespace lstmkit
