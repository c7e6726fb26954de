#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lstmkit/suites.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lstmkit;

namespace {

constexpr const char* kToolVersion = "lstmkit 0.1.0";

json default_config() {
    json c;
    c["model"] = {{"layers", 2},
                  {"hidden_size", 170},
                  {"embed_dim", 300},
                  {"num_classes", 5},
                  {"residual", "none"},
                  {"bidirectional", false},
                  {"shared_bidirectional_weights", false},
                  {"forget_bias", 0.0},
                  {"input_keep_prob", 1.0},
                  {"pooling", false},
                  {"pooling_dim", 300},
                  {"output_gate", "sigmoid"}};
    c["train"] = {{"epochs", 10},
                  {"batch_size", 32},
                  {"learning_rate", 1e-4},
                  {"seed", 0},
                  {"early_stop_patience", 10},
                  {"jobs", 1}};
    c["data"] = {{"train_file", ""},
                 {"valid_file", ""},
                 {"valid_count", 0},
                 {"embeddings_file", ""},
                 {"embed_trainable", true},
                 {"truncate_len", 0},
                 {"truncate_side", "right"},
                 {"synthetic", nullptr}};
    c["mc"] = {{"k", 400}, {"p_min", 2},     {"p_max", 200},        {"p_step", 2},
               {"m", 20},  {"confidence", 0.9}, {"strategy", "majority-vote"}, {"seed", 0}};
    c["ladder"] = {{"base_hidden", 12}, {"larger_hidden", 24}, {"keep_prob", 0.5},
                   {"mc_k", 60},        {"runs", 7}};
    c["depth"] = {{"budget", 550000},
                  {"depths", json::array({1, 2, 4, 6, 8})},
                  {"modes", json::array({"none"})},
                  {"runs", 7}};
    return c;
}

void deep_merge(json& base, const json& overlay) {
    for (auto it = overlay.begin(); it != overlay.end(); ++it) {
        if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object()) {
            deep_merge(base[it.key()], *it);
        } else {
            base[it.key()] = *it;
        }
    }
}

// --set section.key=value; the value is parsed as JSON when possible, else
// kept as a string.
void apply_override(json& config, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
    }
    std::string path = assignment.substr(0, eq);
    std::string value = assignment.substr(eq + 1);
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::parse_error&) {
        parsed = value;
    }
    json* slot = &config;
    std::size_t start = 0;
    for (;;) {
        auto dot = path.find('.', start);
        std::string key = path.substr(start, dot - start);
        if (key.empty()) {
            throw ConfigError("--set path has an empty segment: '" + path + "'");
        }
        if (dot == std::string::npos) {
            (*slot)[key] = parsed;
            break;
        }
        slot = &(*slot)[key];
        start = dot + 1;
    }
}

ModelConfig model_from_config(const json& m) {
    ModelConfig c;
    c.num_layers = m.at("layers").get<int>();
    c.hidden_size = m.at("hidden_size").get<std::int64_t>();
    c.embed_dim = m.at("embed_dim").get<std::int64_t>();
    c.num_classes = m.at("num_classes").get<int>();
    c.residual_mode = residual_mode_from_name(m.at("residual").get<std::string>());
    c.bidirectional = m.at("bidirectional").get<bool>();
    c.shared_bidirectional_weights = m.at("shared_bidirectional_weights").get<bool>();
    c.forget_bias = m.at("forget_bias").get<double>();
    c.input_keep_prob = m.at("input_keep_prob").get<double>();
    c.pooling_enabled = m.at("pooling").get<bool>();
    c.pooling_dim = m.at("pooling_dim").get<std::int64_t>();
    c.output_gate = output_gate_from_name(m.at("output_gate").get<std::string>());
    c.validate();
    return c;
}

TrainSpec train_spec_from_config(const json& config) {
    TrainSpec spec;
    spec.model = model_from_config(config.at("model"));
    const json& t = config.at("train");
    spec.epochs = t.at("epochs").get<int>();
    spec.batch_size = t.at("batch_size").get<int>();
    spec.learning_rate = t.at("learning_rate").get<double>();
    spec.seed = t.at("seed").get<std::uint64_t>();
    spec.early_stop_patience = t.at("early_stop_patience").get<int>();
    spec.validate();
    return spec;
}

struct ResolvedData {
    std::vector<LabeledSequence> train;
    std::vector<LabeledSequence> valid;
    Vocabulary vocab;
    EmbeddingTable embeddings;
    std::vector<std::string> input_files;
};

constexpr std::uint64_t kEmbedInitStream = 4;

ResolvedData resolve_data(const json& config, const ModelConfig& model, std::uint64_t seed) {
    const json& d = config.at("data");
    ResolvedData out;

    if (!d.at("synthetic").is_null()) {
        const json& s = d.at("synthetic");
        SyntheticTask task = synthetic_task_from_name(s.at("task").get<std::string>());
        std::size_t n = s.at("n").get<std::size_t>();
        std::size_t valid_n = s.value("valid_n", n / 4);
        std::size_t seq_len = s.at("seq_len").get<std::size_t>();
        int vocab_size = s.at("vocab_size").get<int>();
        std::uint64_t data_seed = s.value("seed", seed);
        auto all = gen_synthetic(task, n + valid_n, seq_len, vocab_size, model.num_classes, data_seed);
        auto split = split_dataset(all, n, valid_n, data_seed);
        out.train = std::move(split.first);
        out.valid = std::move(split.second);
        out.vocab = synthetic_vocab(vocab_size);
    } else {
        std::string train_file = d.at("train_file").get<std::string>();
        if (train_file.empty()) {
            throw ConfigError("data.train_file or data.synthetic is required");
        }
        out.input_files.push_back(train_file);
        auto train_raw = read_dataset(train_file, model.num_classes);
        out.train = encode_examples(train_raw, out.vocab, /*grow_vocab=*/true);
        std::string valid_file = d.at("valid_file").get<std::string>();
        if (!valid_file.empty()) {
            out.input_files.push_back(valid_file);
            auto valid_raw = read_dataset(valid_file, model.num_classes);
            out.valid = encode_examples(valid_raw, out.vocab, /*grow_vocab=*/false);
        } else {
            std::size_t valid_count = d.at("valid_count").get<std::size_t>();
            if (valid_count == 0 || valid_count >= out.train.size()) {
                throw ConfigError("data.valid_file or a usable data.valid_count is required");
            }
            auto split = split_dataset(out.train, out.train.size() - valid_count, valid_count, seed);
            out.train = std::move(split.first);
            out.valid = std::move(split.second);
        }
    }

    std::size_t truncate_len = d.at("truncate_len").get<std::size_t>();
    if (truncate_len > 0) {
        TruncateSide side = d.at("truncate_side").get<std::string>() == "left" ? TruncateSide::Left
                                                                               : TruncateSide::Right;
        out.train = truncate_sequences(std::move(out.train), truncate_len, side);
        out.valid = truncate_sequences(std::move(out.valid), truncate_len, side);
    }

    bool trainable = d.at("embed_trainable").get<bool>();
    std::string emb_file = d.at("embeddings_file").get<std::string>();
    Rng emb_rng(seed, kEmbedInitStream);
    if (!emb_file.empty()) {
        out.input_files.push_back(emb_file);
        out.embeddings = load_embeddings(emb_file, out.vocab, model.embed_dim, emb_rng, trainable);
        std::cerr << "embeddings: " << out.embeddings.coverage << "/" << out.vocab.size()
                  << " vocabulary tokens covered\n";
    } else {
        out.embeddings = EmbeddingTable::random(out.vocab.size(), model.embed_dim, emb_rng, trainable);
    }
    return out;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw IoError("cannot write " + path.string());
    }
    f << content;
}

json load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw ConfigError("cannot open config file: " + path);
    }
    json parsed;
    try {
        parsed = json::parse(f, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }
    // A manifest is itself a valid config source.
    if (parsed.contains("resolved_config")) {
        return parsed.at("resolved_config");
    }
    return parsed;
}

// Runs a subcommand body and writes manifest.json on success and failure.
int run_with_manifest(const std::string& command, const std::string& out_dir,
                      std::uint64_t seed, const json& resolved,
                      const std::vector<std::string>& input_files,
                      const std::function<std::vector<std::string>()>& body) {
    fs::create_directories(out_dir);
    json manifest;
    manifest["tool"] = kToolVersion;
    manifest["command"] = command;
    manifest["started"] = iso8601_now();
    manifest["seed"] = seed;
    manifest["resolved_config"] = resolved;
    json inputs = json::object();
    for (const std::string& f : input_files) {
        inputs[f] = hex_u64(fnv1a64_file(f));
    }
    manifest["inputs"] = inputs;

    auto finish = [&](const char* status, const std::string& error,
                      const std::vector<std::string>& outputs) {
        manifest["status"] = status;
        if (!error.empty()) {
            manifest["error"] = error;
        }
        manifest["outputs"] = outputs;
        manifest["finished"] = iso8601_now();
        write_file(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");
    };

    try {
        auto outputs = body();
        finish("ok", "", outputs);
        return 0;
    } catch (const ConfigError& e) {
        finish("error", e.what(), {});
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        finish("error", e.what(), {});
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

std::vector<LabeledSequence> load_for_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    Vocabulary vocab = Vocabulary::from_tokens(ckpt.vocab_tokens);
    auto raw = read_dataset(path, ckpt.config.num_classes);
    return encode_examples(raw, vocab, /*grow_vocab=*/false);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(kToolVersion) +
                 " - augmented LSTM text classification experiments.\n"
                 "Config files are JSON with sections model/train/data/mc/ladder/depth;\n"
                 "--set section.key=value overrides any field, named flags win last."};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir = ".";
    app.add_option("--config", config_path, "JSON config file (or a manifest.json)")->expected(1);
    app.add_option("--set", overrides, "override config fields: section.key=value");
    app.add_option("--out-dir", out_dir, "directory for outputs and manifest.json");

    // Named shortcuts for the most common fields.
    std::optional<int> opt_epochs, opt_layers, opt_batch, opt_patience;
    std::optional<std::int64_t> opt_hidden;
    std::optional<double> opt_lr, opt_keep;
    std::optional<std::uint64_t> opt_seed;
    app.add_option("--epochs", opt_epochs, "train.epochs");
    app.add_option("--layers", opt_layers, "model.layers");
    app.add_option("--hidden-size", opt_hidden, "model.hidden_size");
    app.add_option("--batch-size", opt_batch, "train.batch_size");
    app.add_option("--lr", opt_lr, "train.learning_rate");
    app.add_option("--keep-prob", opt_keep, "model.input_keep_prob");
    app.add_option("--seed", opt_seed, "train.seed");
    app.add_option("--patience", opt_patience, "train.early_stop_patience");

    auto resolve_config = [&]() {
        json config = default_config();
        if (!config_path.empty()) {
            deep_merge(config, load_config_file(config_path));
        }
        for (const std::string& o : overrides) {
            apply_override(config, o);
        }
        if (opt_epochs) config["train"]["epochs"] = *opt_epochs;
        if (opt_layers) config["model"]["layers"] = *opt_layers;
        if (opt_hidden) config["model"]["hidden_size"] = *opt_hidden;
        if (opt_batch) config["train"]["batch_size"] = *opt_batch;
        if (opt_lr) config["train"]["learning_rate"] = *opt_lr;
        if (opt_keep) config["model"]["input_keep_prob"] = *opt_keep;
        if (opt_seed) config["train"]["seed"] = *opt_seed;
        if (opt_patience) config["train"]["early_stop_patience"] = *opt_patience;
        return config;
    };

    int exit_code = 0;
    std::function<void()> action;

    // train
    auto* cmd_train = app.add_subcommand("train", "train a classifier and write checkpoints");
    cmd_train->callback([&]() {
        action = [&]() {
            json config = resolve_config();
            TrainSpec spec = train_spec_from_config(config);
            ResolvedData data = resolve_data(config, spec.model, spec.seed);
            exit_code = run_with_manifest("train", out_dir, spec.seed, config, data.input_files, [&]() {
                TrainResult result = train(spec, data.train, data.valid, data.embeddings,
                                           data.vocab.tokens());
                fs::path dir(out_dir);
                write_file(dir / "metrics.csv", metrics_to_csv(result.history));
                save_checkpoint(result.best, (dir / "model.best.ckpt").string());
                save_checkpoint(result.last, (dir / "model.last.ckpt").string());
                const EpochMetrics& final_m = result.history.back();
                std::cout << "epochs: " << result.history.size()
                          << " final_train_loss: " << final_m.train_loss
                          << " best_valid_acc: "
                          << evaluate_standard(result.best.model, result.best.embeddings.matrix,
                                               data.valid)
                          << "\n";
                return std::vector<std::string>{"metrics.csv", "model.best.ckpt", "model.last.ckpt"};
            });
        };
    });

    // eval
    auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string eval_ckpt, eval_data;
    bool eval_mc = false;
    int eval_k = 60;
    std::string eval_strategy = "majority-vote";
    std::uint64_t eval_seed = 0;
    cmd_eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    cmd_eval->add_option("--data", eval_data, "dataset file (label<TAB>text)")->required();
    cmd_eval->add_flag("--mc", eval_mc, "use Monte Carlo dropout inference");
    cmd_eval->add_option("--k", eval_k, "Monte Carlo sample count");
    cmd_eval->add_option("--strategy", eval_strategy, "aggregation strategy");
    cmd_eval->add_option("--eval-seed", eval_seed, "sampling seed for --mc");
    cmd_eval->callback([&]() {
        action = [&]() {
            json config = resolve_config();
            if (!fs::exists(eval_ckpt)) {
                std::cerr << "config error: checkpoint not found: " << eval_ckpt << "\n";
                exit_code = 2;
                return;
            }
            json resolved = config;
            resolved["eval"] = {{"checkpoint", eval_ckpt}, {"data", eval_data},  {"mc", eval_mc},
                                {"k", eval_k},             {"strategy", eval_strategy}, {"seed", eval_seed}};
            exit_code = run_with_manifest("eval", out_dir, eval_seed, resolved,
                                          {eval_ckpt, eval_data}, [&]() {
                Checkpoint ckpt = load_checkpoint(eval_ckpt);
                auto data = load_for_checkpoint(ckpt, eval_data);
                EvalMode mode;
                mode.mc = eval_mc;
                mode.mc_spec.k = eval_k;
                mode.mc_spec.strategy = aggregation_from_name(eval_strategy);
                mode.mc_spec.seed = eval_seed;
                double acc = evaluate(ckpt, data, mode);
                std::ostringstream os;
                os.precision(17);
                os << acc;
                std::cout << "accuracy: " << os.str() << "\n";
                write_file(fs::path(out_dir) / "eval.txt", os.str() + "\n");
                return std::vector<std::string>{"eval.txt"};
            });
        };
    });

    // mc-curve
    auto* cmd_curve = app.add_subcommand("mc-curve", "Monte Carlo sampling-size curve");
    std::string curve_ckpt, curve_data;
    std::optional<int> curve_k, curve_pmin, curve_pmax, curve_pstep, curve_m;
    std::optional<std::string> curve_strategy;
    std::optional<std::uint64_t> curve_seed;
    cmd_curve->add_option("--checkpoint", curve_ckpt, "checkpoint file")->required();
    cmd_curve->add_option("--data", curve_data, "dataset file")->required();
    cmd_curve->add_option("--k", curve_k, "samples drawn per example");
    cmd_curve->add_option("--p-min", curve_pmin, "smallest subsample size");
    cmd_curve->add_option("--p-max", curve_pmax, "largest subsample size");
    cmd_curve->add_option("--p-step", curve_pstep, "subsample size step");
    cmd_curve->add_option("--m", curve_m, "resamples per point");
    cmd_curve->add_option("--strategy", curve_strategy, "aggregation strategy");
    cmd_curve->add_option("--curve-seed", curve_seed, "protocol seed");
    cmd_curve->callback([&]() {
        action = [&]() {
            json config = resolve_config();
            json& mc = config["mc"];
            if (curve_k) mc["k"] = *curve_k;
            if (curve_pmin) mc["p_min"] = *curve_pmin;
            if (curve_pmax) mc["p_max"] = *curve_pmax;
            if (curve_pstep) mc["p_step"] = *curve_pstep;
            if (curve_m) mc["m"] = *curve_m;
            if (curve_strategy) mc["strategy"] = *curve_strategy;
            if (curve_seed) mc["seed"] = *curve_seed;
            if (!fs::exists(curve_ckpt)) {
                std::cerr << "config error: checkpoint not found: " << curve_ckpt << "\n";
                exit_code = 2;
                return;
            }
            config["mc_inputs"] = {{"checkpoint", curve_ckpt}, {"data", curve_data}};
            std::uint64_t seed = mc.at("seed").get<std::uint64_t>();
            exit_code = run_with_manifest("mc-curve", out_dir, seed, config,
                                          {curve_ckpt, curve_data}, [&]() {
                Checkpoint ckpt = load_checkpoint(curve_ckpt);
                auto data = load_for_checkpoint(ckpt, curve_data);
                McRunSpec spec;
                spec.k = mc.at("k").get<int>();
                spec.m = mc.at("m").get<int>();
                spec.confidence = mc.at("confidence").get<double>();
                spec.strategy = aggregation_from_name(mc.at("strategy").get<std::string>());
                spec.seed = seed;
                for (int p = mc.at("p_min").get<int>(); p <= mc.at("p_max").get<int>();
                     p += mc.at("p_step").get<int>()) {
                    spec.p_values.push_back(p);
                }
                McCurve curve = mc_curve(ckpt.model, ckpt.embeddings.matrix, data, spec);
                write_file(fs::path(out_dir) / "mc_curve.csv", curve_to_csv(curve));
                std::cout << "points: " << curve.points.size()
                          << " baseline_acc: " << curve.baseline_accuracy << "\n";
                return std::vector<std::string>{"mc_curve.csv"};
            });
        };
    });

    // ladder
    auto* cmd_ladder = app.add_subcommand("ladder", "compounding-feature ladder suite");
    std::optional<int> ladder_runs, ladder_jobs;
    cmd_ladder->add_option("--runs", ladder_runs, "training runs per rung");
    cmd_ladder->add_option("--jobs", ladder_jobs, "max concurrent runs");
    cmd_ladder->callback([&]() {
        action = [&]() {
            json config = resolve_config();
            if (ladder_runs) config["ladder"]["runs"] = *ladder_runs;
            if (ladder_jobs) config["train"]["jobs"] = *ladder_jobs;
            TrainSpec spec = train_spec_from_config(config);
            ResolvedData data = resolve_data(config, spec.model, spec.seed);
            const json& lc = config.at("ladder");
            LadderOptions opts;
            opts.base_hidden = lc.at("base_hidden").get<std::int64_t>();
            opts.larger_hidden = lc.at("larger_hidden").get<std::int64_t>();
            opts.keep_prob = lc.at("keep_prob").get<double>();
            opts.mc_k = lc.at("mc_k").get<int>();
            int runs = lc.at("runs").get<int>();
            int jobs = config.at("train").at("jobs").get<int>();
            exit_code = run_with_manifest("ladder", out_dir, spec.seed, config, data.input_files, [&]() {
                FeatureLadder ladder = default_feature_ladder(spec.model, opts);
                LadderResult result = run_feature_ladder(ladder, data.train, data.valid,
                                                         data.embeddings, spec, runs, jobs);
                fs::path dir(out_dir);
                write_file(dir / "ladder_runs.csv", ladder_runs_to_csv(result.runs));
                write_file(dir / "ladder_summary.json", ladder_summary_json(result));
                for (const RungResult& r : result.rungs) {
                    std::cout << r.name << ": mean " << r.stats.mean << " median " << r.stats.median
                              << "\n";
                }
                return std::vector<std::string>{"ladder_runs.csv", "ladder_summary.json"};
            });
        };
    });

    // depth
    auto* cmd_depth = app.add_subcommand("depth", "equal-parameter depth sweep");
    std::optional<int> depth_runs, depth_jobs;
    std::optional<std::int64_t> depth_budget;
    cmd_depth->add_option("--runs", depth_runs, "training runs per cell");
    cmd_depth->add_option("--jobs", depth_jobs, "max concurrent runs");
    cmd_depth->add_option("--budget", depth_budget, "parameter budget");
    cmd_depth->callback([&]() {
        action = [&]() {
            json config = resolve_config();
            if (depth_runs) config["depth"]["runs"] = *depth_runs;
            if (depth_jobs) config["train"]["jobs"] = *depth_jobs;
            if (depth_budget) config["depth"]["budget"] = *depth_budget;
            TrainSpec spec = train_spec_from_config(config);
            ResolvedData data = resolve_data(config, spec.model, spec.seed);
            const json& dc = config.at("depth");
            std::int64_t budget = dc.at("budget").get<std::int64_t>();
            std::vector<int> depths = dc.at("depths").get<std::vector<int>>();
            std::vector<ResidualMode> modes;
            for (const auto& name : dc.at("modes")) {
                modes.push_back(residual_mode_from_name(name.get<std::string>()));
            }
            int runs = dc.at("runs").get<int>();
            int jobs = config.at("train").at("jobs").get<int>();
            exit_code = run_with_manifest("depth", out_dir, spec.seed, config, data.input_files, [&]() {
                DepthSuiteResult result = run_depth_suite(data.train, data.valid, data.embeddings,
                                                          spec, budget, depths, modes, runs, jobs);
                fs::path dir(out_dir);
                write_file(dir / "depth_cells.csv", depth_cells_to_csv(result));
                write_file(dir / "depth_runs.csv", ladder_runs_to_csv(result.runs));
                write_file(dir / "depth_summary.json", depth_summary_json(result));
                for (const DepthCell& c : result.cells) {
                    std::cout << "depth " << c.depth << " " << residual_mode_name(c.mode)
                              << ": hidden " << c.hidden << " params " << c.param_count
                              << " mean_acc " << c.mean_acc << "\n";
                }
                return std::vector<std::string>{"depth_cells.csv", "depth_runs.csv",
                                                "depth_summary.json"};
            });
        };
    });

    // param-count
    auto* cmd_params = app.add_subcommand("param-count", "closed-form trainable parameter count");
    cmd_params->callback([&]() {
        action = [&]() {
            json config = resolve_config();
            try {
                ModelConfig model = model_from_config(config.at("model"));
                std::int64_t count = count_parameters(model);
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.3f", static_cast<double>(count) / 1e6);
                std::cout << count << " (" << buf << "M)\n";
                exit_code = 0;
            } catch (const ConfigError& e) {
                std::cerr << "config error: " << e.what() << "\n";
                exit_code = 2;
            }
        };
    });

    // gen-data
    auto* cmd_gen = app.add_subcommand("gen-data", "write a synthetic dataset file");
    std::string gen_task = "first_token_class";
    std::size_t gen_n = 256, gen_len = 8;
    int gen_vocab = 16, gen_classes = 5;
    std::uint64_t gen_seed = 0;
    std::string gen_out = "synthetic.tsv";
    cmd_gen->add_option("--task", gen_task, "first_token_class | majority_token | long_range_flag");
    cmd_gen->add_option("--n", gen_n, "number of examples");
    cmd_gen->add_option("--seq-len", gen_len, "sequence length");
    cmd_gen->add_option("--vocab-size", gen_vocab, "vocabulary size including specials");
    cmd_gen->add_option("--classes", gen_classes, "number of classes");
    cmd_gen->add_option("--gen-seed", gen_seed, "generator seed");
    cmd_gen->add_option("--out", gen_out, "output file name (within --out-dir)");
    cmd_gen->callback([&]() {
        action = [&]() {
            json resolved = {{"task", gen_task},   {"n", gen_n},         {"seq_len", gen_len},
                             {"vocab_size", gen_vocab}, {"classes", gen_classes}, {"seed", gen_seed},
                             {"out", gen_out}};
            exit_code = run_with_manifest("gen-data", out_dir, gen_seed, resolved, {}, [&]() {
                auto data = gen_synthetic(synthetic_task_from_name(gen_task), gen_n, gen_len,
                                          gen_vocab, gen_classes, gen_seed);
                std::ostringstream os;
                for (const LabeledSequence& seq : data) {
                    os << seq.label << "\t";
                    for (std::size_t i = 0; i < seq.token_ids.size(); ++i) {
                        if (i) os << " ";
                        os << "w" << seq.token_ids[i];
                    }
                    os << "\n";
                }
                write_file(fs::path(out_dir) / gen_out, os.str());
                std::cout << "wrote " << data.size() << " examples\n";
                return std::vector<std::string>{gen_out};
            });
        };
    });

    for (CLI::App* sub : app.get_subcommands(nullptr)) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        action();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_code;
}
