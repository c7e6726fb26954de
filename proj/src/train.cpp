#include "lstmkit/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lstmkit/grad_check.hpp"
#include "lstmkit/ops.hpp"
#include "lstmkit/util.hpp"

namespace lstmkit {

namespace {

using nlohmann::json;

// Substream roles under a training seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kMaskStream = 3;

Rng mask_rng(std::uint64_t seed, std::int64_t epoch, std::size_t batch, std::size_t example) {
    std::uint64_t id = mix_streams(static_cast<std::uint64_t>(epoch),
                                   mix_streams(batch, example));
    return Rng(seed, mix_streams(kMaskStream, id));
}

int argmax_span(std::span<const double> v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

double l2_norm(const Tensor& t) {
    double acc = 0.0;
    for (double v : t.values()) {
        acc += v * v;
    }
    return std::sqrt(acc);
}

json config_to_json(const ModelConfig& c) {
    return json{{"num_layers", c.num_layers},
                {"hidden_size", c.hidden_size},
                {"embed_dim", c.embed_dim},
                {"num_classes", c.num_classes},
                {"residual_mode", residual_mode_name(c.residual_mode)},
                {"bidirectional", c.bidirectional},
                {"shared_bidirectional_weights", c.shared_bidirectional_weights},
                {"forget_bias", c.forget_bias},
                {"input_keep_prob", c.input_keep_prob},
                {"pooling_enabled", c.pooling_enabled},
                {"pooling_dim", c.pooling_dim},
                {"output_gate", output_gate_name(c.output_gate)}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.num_layers = j.at("num_layers").get<int>();
    c.hidden_size = j.at("hidden_size").get<std::int64_t>();
    c.embed_dim = j.at("embed_dim").get<std::int64_t>();
    c.num_classes = j.at("num_classes").get<int>();
    c.residual_mode = residual_mode_from_name(j.at("residual_mode").get<std::string>());
    c.bidirectional = j.at("bidirectional").get<bool>();
    c.shared_bidirectional_weights = j.at("shared_bidirectional_weights").get<bool>();
    c.forget_bias = j.at("forget_bias").get<double>();
    c.input_keep_prob = j.at("input_keep_prob").get<double>();
    c.pooling_enabled = j.at("pooling_enabled").get<bool>();
    c.pooling_dim = j.at("pooling_dim").get<std::int64_t>();
    c.output_gate = output_gate_from_name(j.at("output_gate").get<std::string>());
    return c;
}

// Checkpoint tensor enumeration: model parameters, then the embedding matrix.
std::vector<std::pair<std::string, const Tensor*>> checkpoint_tensors(const Checkpoint& ckpt) {
    auto named = ckpt.model.params_const();
    named.emplace_back("embedding", &ckpt.embeddings.matrix);
    return named;
}

}  // namespace

void TrainSpec::validate() const {
    model.validate();
    if (epochs < 1) {
        throw ConfigError("epochs must be >= 1");
    }
    if (batch_size < 1) {
        throw ConfigError("batch_size must be >= 1");
    }
    if (learning_rate < 0.0) {
        throw ConfigError("learning_rate must be >= 0");
    }
}

TrainResult train(const TrainSpec& spec,
                  const std::vector<LabeledSequence>& train_data,
                  const std::vector<LabeledSequence>& valid_data,
                  const EmbeddingTable& embeddings,
                  const std::vector<std::string>& vocab_tokens,
                  const Checkpoint* resume) {
    spec.validate();
    if (train_data.empty() || valid_data.empty()) {
        throw ProtocolError("train: datasets must be nonempty");
    }
    if (embeddings.dim != spec.model.embed_dim) {
        throw ConfigError("embedding dim does not match model embed_dim");
    }

    Classifier model = [&] {
        if (resume) {
            return resume->model;
        }
        Rng init_rng(spec.seed, kInitStream);
        return Classifier::init(spec.model, init_rng);
    }();
    EmbeddingTable table = resume ? resume->embeddings : embeddings;
    const bool train_embedding = table.trainable;

    auto params = model.params();
    std::size_t n_slots = params.size() + (train_embedding ? 1 : 0);

    std::vector<AdamState> states;
    states.reserve(n_slots);
    for (std::size_t i = 0; i < params.size(); ++i) {
        states.push_back(AdamState::for_size(params[i].tensor->size(), spec.learning_rate));
    }
    if (train_embedding) {
        states.push_back(AdamState::for_size(table.matrix.size(), spec.learning_rate));
    }
    if (resume) {
        if (resume->adam_m.size() != n_slots) {
            throw ConfigError("resume checkpoint optimizer state does not match model");
        }
        for (std::size_t i = 0; i < n_slots; ++i) {
            states[i].first_moment = resume->adam_m[i];
            states[i].second_moment = resume->adam_v[i];
            states[i].step_count = resume->opt_step;
        }
    }

    std::vector<EpochMetrics> history = resume ? resume->history : std::vector<EpochMetrics>{};
    std::int64_t start_epoch = resume ? resume->next_epoch : 0;

    auto snapshot = [&](std::int64_t next_epoch) {
        Checkpoint ckpt;
        ckpt.config = spec.model;
        ckpt.model = model;
        ckpt.embeddings = table;
        ckpt.vocab_tokens = vocab_tokens;
        ckpt.learning_rate = spec.learning_rate;
        ckpt.opt_step = states.empty() ? 0 : states.front().step_count;
        ckpt.adam_m.clear();
        ckpt.adam_v.clear();
        for (const AdamState& s : states) {
            ckpt.adam_m.push_back(s.first_moment);
            ckpt.adam_v.push_back(s.second_moment);
        }
        ckpt.seed = spec.seed;
        ckpt.next_epoch = next_epoch;
        ckpt.history = history;
        return ckpt;
    };

    TrainResult result;
    double best_acc = -1.0;
    std::int64_t best_epoch = -1;
    for (const EpochMetrics& m : history) {
        if (m.valid_acc > best_acc) {
            best_acc = m.valid_acc;
            best_epoch = m.epoch;
        }
    }
    bool have_best = false;
    if (resume && best_epoch >= 0) {
        // The resumed state stands in until a better epoch appears.
        result.best = *resume;
        have_best = true;
    }

    for (std::int64_t epoch = start_epoch; epoch < spec.epochs; ++epoch) {
        std::vector<std::size_t> order(train_data.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        Rng shuffle_rng(spec.seed, mix_streams(kShuffleStream, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(spec.batch_size)) {
            std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(spec.batch_size));
            std::size_t batch_index = n_batches;

            Tape tape;
            Classifier taped = model;
            auto taped_params = taped.params();
            for (auto& p : taped_params) {
                *p.tensor = tape.watch(*p.tensor);
            }
            Tensor taped_embedding = train_embedding ? tape.watch(table.matrix) : table.matrix;

            Tensor total;
            try {
                Tensor loss_acc;
                for (std::size_t i = start; i < end; ++i) {
                    const LabeledSequence& ex = train_data[order[i]];
                    Rng rng = mask_rng(spec.seed, epoch, batch_index, i - start);
                    DropoutMasks masks = draw_masks(spec.model, ex.token_ids.size(), &rng);
                    ForwardResult fwd = classify_forward(&tape, taped, taped_embedding, ex.token_ids, masks);
                    SoftmaxLoss sl = softmax_cross_entropy(&tape, fwd.logits, ex.label);
                    loss_acc = loss_acc.defined() ? add(&tape, loss_acc, sl.loss) : sl.loss;
                }
                total = scale(&tape, loss_acc, 1.0 / static_cast<double>(end - start));
            } catch (const NumericError& e) {
                std::ostringstream os;
                os << "non-finite loss in epoch " << epoch << ", batch " << batch_index << ": " << e.what()
                   << "; parameter norms:";
                for (auto& p : model.params()) {
                    os << " " << p.name << "=" << l2_norm(*p.tensor);
                }
                throw NumericError(os.str());
            }

            loss_sum += total[0];
            ++n_batches;
            tape.backward(total);

            for (std::size_t i = 0; i < params.size(); ++i) {
                auto adj = tape.adjoint_view(taped_params[i].tensor->node());
                Tensor grad = adj.empty()
                                  ? Tensor::zeros(params[i].tensor->shape())
                                  : Tensor::from(std::vector<double>(adj.begin(), adj.end()),
                                                 params[i].tensor->shape());
                *params[i].tensor = adam_step(states[i], *params[i].tensor, grad);
            }
            if (train_embedding) {
                auto adj = tape.adjoint_view(taped_embedding.node());
                Tensor grad = adj.empty()
                                  ? Tensor::zeros(table.matrix.shape())
                                  : Tensor::from(std::vector<double>(adj.begin(), adj.end()),
                                                 table.matrix.shape());
                table.matrix = adam_step(states.back(), table.matrix, grad);
            }
        }

        double valid_acc = evaluate_standard(model, table.matrix, valid_data);
        history.push_back(EpochMetrics{static_cast<int>(epoch),
                                       loss_sum / static_cast<double>(n_batches), valid_acc});

        if (valid_acc > best_acc) {
            best_acc = valid_acc;
            best_epoch = epoch;
            result.best = snapshot(epoch + 1);
            have_best = true;
        }
        if (spec.early_stop_patience > 0 && epoch - best_epoch >= spec.early_stop_patience) {
            break;
        }
    }

    result.last = snapshot(history.empty() ? start_epoch : history.back().epoch + 1);
    if (!have_best) {
        result.best = result.last;
    }
    result.history = history;
    return result;
}

double evaluate_standard(const Classifier& model, const Tensor& embedding_matrix,
                         const std::vector<LabeledSequence>& data) {
    if (data.empty()) {
        throw ProtocolError("evaluate: empty dataset");
    }
    std::size_t correct = 0;
    for (const LabeledSequence& ex : data) {
        ForwardResult fwd = classify_forward(nullptr, model, embedding_matrix, ex.token_ids,
                                             ForwardMode::StandardInference, nullptr);
        if (argmax_span(fwd.logits.values()) == ex.label) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

double evaluate_mc(const Classifier& model, const Tensor& embedding_matrix,
                   const std::vector<LabeledSequence>& data, const McEvalSpec& spec) {
    if (data.empty()) {
        throw ProtocolError("evaluate: empty dataset");
    }
    std::size_t correct = 0;
    for (std::size_t j = 0; j < data.size(); ++j) {
        McSampleSet samples = draw_samples(model, embedding_matrix, data[j], spec.k, spec.seed,
                                           static_cast<std::uint64_t>(j) * static_cast<std::uint64_t>(spec.k));
        int predicted = aggregate(samples, spec.strategy, model.proj_weight, model.proj_bias);
        if (predicted == data[j].label) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

double evaluate(const Checkpoint& ckpt, const std::vector<LabeledSequence>& data,
                const EvalMode& mode) {
    for (const LabeledSequence& ex : data) {
        if (ex.label < 0 || ex.label >= ckpt.config.num_classes) {
            std::ostringstream os;
            os << "dataset label " << ex.label << " does not fit checkpoint with "
               << ckpt.config.num_classes << " classes";
            throw ConfigError(os.str());
        }
    }
    if (mode.mc) {
        return evaluate_mc(ckpt.model, ckpt.embeddings.matrix, data, mode.mc_spec);
    }
    return evaluate_standard(ckpt.model, ckpt.embeddings.matrix, data);
}

namespace {

constexpr char kMagic[8] = {'L', 'K', 'C', 'K', 'P', 'T', '0', '\n'};

void append_u32(std::string& out, std::uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.append(buf, 4);
}

void append_u64(std::string& out, std::uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    auto tensors = checkpoint_tensors(ckpt);

    json header;
    header["config"] = config_to_json(ckpt.config);
    header["embed_trainable"] = ckpt.embeddings.trainable;
    header["embed_coverage"] = ckpt.embeddings.coverage;
    header["optimizer"] = json{{"learning_rate", ckpt.learning_rate},
                               {"beta1", ckpt.beta1},
                               {"beta2", ckpt.beta2},
                               {"epsilon", ckpt.epsilon},
                               {"step_count", ckpt.opt_step}};
    header["rng"] = json{{"seed", ckpt.seed}, {"next_epoch", ckpt.next_epoch}};
    header["epoch"] = ckpt.next_epoch - 1;
    json metrics = json::array();
    for (const EpochMetrics& m : ckpt.history) {
        metrics.push_back(json{{"epoch", m.epoch}, {"train_loss", m.train_loss}, {"valid_acc", m.valid_acc}});
    }
    header["metrics"] = metrics;
    header["vocab"] = ckpt.vocab_tokens;
    json tlist = json::array();
    for (auto& [name, tensor] : tensors) {
        tlist.push_back(json{{"name", name}, {"shape", tensor->shape()}});
    }
    header["tensors"] = tlist;
    json mlist = json::array();
    for (std::size_t i = 0; i < ckpt.adam_m.size(); ++i) {
        mlist.push_back(static_cast<std::int64_t>(ckpt.adam_m[i].size()));
    }
    header["moment_sizes"] = mlist;

    std::string blob;
    auto append_doubles = [&blob](const double* data, std::size_t n) {
        std::size_t offset = blob.size();
        blob.resize(offset + n * sizeof(double));
        std::memcpy(blob.data() + offset, data, n * sizeof(double));
    };
    for (auto& [name, tensor] : tensors) {
        append_doubles(tensor->values().data(), tensor->values().size());
    }
    for (std::size_t i = 0; i < ckpt.adam_m.size(); ++i) {
        append_doubles(ckpt.adam_m[i].data(), ckpt.adam_m[i].size());
        append_doubles(ckpt.adam_v[i].data(), ckpt.adam_v[i].size());
    }

    std::string header_text = header.dump();
    std::string out;
    out.append(kMagic, sizeof kMagic);
    append_u32(out, ckpt.format_version);
    append_u64(out, header_text.size());
    out += header_text;
    append_u64(out, blob.size());
    out += blob;
    append_u64(out, fnv1a64(blob.data(), blob.size()));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw IoError("cannot open checkpoint for writing: " + path);
    }
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) {
        throw IoError("short write while saving checkpoint: " + path);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open checkpoint: " + path);
    }
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    std::size_t pos = 0;
    auto need = [&](std::size_t n) {
        if (pos + n > bytes.size()) {
            throw FormatError("truncated checkpoint: " + path);
        }
    };
    need(sizeof kMagic);
    if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw FormatError("not a checkpoint file: " + path);
    }
    pos += sizeof kMagic;

    need(4);
    std::uint32_t version = 0;
    std::memcpy(&version, bytes.data() + pos, 4);
    pos += 4;
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint format version " + std::to_string(version));
    }

    need(8);
    std::uint64_t header_len = 0;
    std::memcpy(&header_len, bytes.data() + pos, 8);
    pos += 8;
    need(header_len);
    json header;
    try {
        header = json::parse(bytes.substr(pos, header_len));
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
    }
    pos += header_len;

    need(8);
    std::uint64_t blob_len = 0;
    std::memcpy(&blob_len, bytes.data() + pos, 8);
    pos += 8;
    need(blob_len);
    const char* blob = bytes.data() + pos;
    pos += blob_len;
    need(8);
    std::uint64_t stored_sum = 0;
    std::memcpy(&stored_sum, bytes.data() + pos, 8);
    if (fnv1a64(blob, blob_len) != stored_sum) {
        throw FormatError("checkpoint payload checksum mismatch: " + path);
    }

    Checkpoint ckpt;
    ckpt.format_version = version;
    ckpt.config = config_from_json(header.at("config"));
    ckpt.config.validate();

    ckpt.embeddings.trainable = header.at("embed_trainable").get<bool>();
    ckpt.embeddings.coverage = header.value("embed_coverage", 0);
    ckpt.embeddings.dim = ckpt.config.embed_dim;
    auto opt = header.at("optimizer");
    ckpt.learning_rate = opt.at("learning_rate").get<double>();
    ckpt.beta1 = opt.at("beta1").get<double>();
    ckpt.beta2 = opt.at("beta2").get<double>();
    ckpt.epsilon = opt.at("epsilon").get<double>();
    ckpt.opt_step = opt.at("step_count").get<std::int64_t>();
    ckpt.seed = header.at("rng").at("seed").get<std::uint64_t>();
    ckpt.next_epoch = header.at("rng").at("next_epoch").get<std::int64_t>();
    for (const auto& m : header.at("metrics")) {
        ckpt.history.push_back(EpochMetrics{m.at("epoch").get<int>(), m.at("train_loss").get<double>(),
                                            m.at("valid_acc").get<double>()});
    }
    ckpt.vocab_tokens = header.at("vocab").get<std::vector<std::string>>();

    // Rebuild the expected tensor catalogue from the config and check every
    // stored shape against it.
    Rng dummy(0, 0);
    ckpt.model = Classifier::init(ckpt.config, dummy);
    auto expected = ckpt.model.params();
    std::vector<std::pair<std::string, std::vector<std::int64_t>>> expected_shapes;
    for (auto& p : expected) {
        expected_shapes.emplace_back(p.name, p.tensor->shape());
    }
    std::int64_t vocab_rows = static_cast<std::int64_t>(ckpt.vocab_tokens.size());
    expected_shapes.emplace_back("embedding", std::vector<std::int64_t>{vocab_rows, ckpt.config.embed_dim});

    const auto tlist = header.at("tensors");
    if (tlist.size() != expected_shapes.size()) {
        throw FormatError("checkpoint tensor count does not match its config");
    }
    std::size_t offset = 0;
    auto read_block = [&](std::size_t count) {
        if (offset + count * sizeof(double) > blob_len) {
            throw FormatError("checkpoint payload shorter than its tensor table");
        }
        std::vector<double> data(count);
        std::memcpy(data.data(), blob + offset, count * sizeof(double));
        offset += count * sizeof(double);
        return data;
    };

    for (std::size_t i = 0; i < expected_shapes.size(); ++i) {
        const auto& entry = tlist.at(i);
        std::string name = entry.at("name").get<std::string>();
        auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
        if (name != expected_shapes[i].first || shape != expected_shapes[i].second) {
            std::ostringstream os;
            os << "checkpoint tensor " << name << " does not match expected " << expected_shapes[i].first;
            throw FormatError(os.str());
        }
        std::int64_t count = 1;
        for (std::int64_t d : shape) {
            count *= d;
        }
        Tensor value = Tensor::from(read_block(static_cast<std::size_t>(count)), shape);
        if (i + 1 == expected_shapes.size()) {
            ckpt.embeddings.matrix = value;
        } else {
            *expected[i].tensor = value;
        }
    }

    for (const auto& size_entry : header.at("moment_sizes")) {
        std::size_t n = size_entry.get<std::size_t>();
        ckpt.adam_m.push_back(read_block(n));
        ckpt.adam_v.push_back(read_block(n));
    }
    if (offset != blob_len) {
        throw FormatError("checkpoint payload has trailing bytes");
    }
    return ckpt;
}

std::string metrics_to_csv(const std::vector<EpochMetrics>& history,
                           const std::string& rung, int run) {
    std::ostringstream os;
    os.precision(17);
    os << "rung,run,epoch,train_loss,valid_acc\n";
    for (const EpochMetrics& m : history) {
        os << rung << "," << run << "," << m.epoch << "," << m.train_loss << "," << m.valid_acc << "\n";
    }
    return os.str();
}

}  // namespace lstmkit
