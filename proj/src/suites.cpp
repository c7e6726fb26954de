#include "lstmkit/suites.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

namespace lstmkit {

namespace {

using nlohmann::json;

// Canonical feature map of a rung. Bidirectionality and its weight sharing are
// one feature; everything else is its own key.
std::map<std::string, std::string> rung_features(const LadderRung& rung) {
    const ModelConfig& m = rung.model;
    std::map<std::string, std::string> f;
    f["num_layers"] = std::to_string(m.num_layers);
    f["hidden_size"] = std::to_string(m.hidden_size);
    f["embed_dim"] = std::to_string(m.embed_dim);
    f["num_classes"] = std::to_string(m.num_classes);
    f["residual"] = residual_mode_name(m.residual_mode);
    f["directionality"] = !m.bidirectional ? "uni"
                          : (m.shared_bidirectional_weights ? "bi-shared" : "bi-unshared");
    f["forget_bias"] = std::to_string(m.forget_bias);
    f["input_keep_prob"] = std::to_string(m.input_keep_prob);
    f["pooling"] = m.pooling_enabled ? "on:" + std::to_string(m.pooling_dim) : "off";
    f["output_gate"] = output_gate_name(m.output_gate);
    f["eval"] = rung.mc_eval ? "mc:" + std::to_string(rung.mc_k) : "standard";
    return f;
}

std::uint64_t run_seed(std::uint64_t suite_seed, std::size_t rung, std::size_t run) {
    return splitmix64(suite_seed ^ (static_cast<std::uint64_t>(rung) * 1000003ULL +
                                    static_cast<std::uint64_t>(run) + 1ULL));
}

json box_to_json(const BoxStats& s, const std::vector<double>& accuracies) {
    return json{{"accuracies", accuracies}, {"mean", s.mean},   {"median", s.median},
                {"q1", s.q1},               {"q3", s.q3},       {"min", s.min},
                {"max", s.max}};
}

}  // namespace

FeatureLadder default_feature_ladder(const ModelConfig& base, const LadderOptions& opts) {
    ModelConfig m = base;
    m.hidden_size = opts.base_hidden;
    m.forget_bias = 0.0;
    m.input_keep_prob = 1.0;
    m.bidirectional = false;
    m.shared_bidirectional_weights = false;
    m.pooling_enabled = false;
    m.residual_mode = ResidualMode::None;

    FeatureLadder ladder;
    auto push = [&ladder](const std::string& name, const ModelConfig& cfg, bool mc, int k) {
        ladder.rungs.push_back(LadderRung{name, cfg, mc, k});
    };

    push("baseline", m, false, opts.mc_k);
    m.forget_bias = 1.0;
    push("forget_bias", m, false, opts.mc_k);
    m.input_keep_prob = opts.keep_prob;
    push("dropout", m, false, opts.mc_k);
    m.hidden_size = opts.larger_hidden;
    push("larger_hidden", m, false, opts.mc_k);
    m.bidirectional = true;
    m.shared_bidirectional_weights = true;
    push("shared_bidir", m, false, opts.mc_k);
    push("mc_eval", m, true, opts.mc_k);
    m.pooling_enabled = true;
    push("pooling", m, true, opts.mc_k);
    m.residual_mode = ResidualMode::VerticalOnly;
    push("res_v1", m, true, opts.mc_k);
    m.residual_mode = ResidualMode::VerticalAndLateral;
    push("res_v2", m, true, opts.mc_k);
    return ladder;
}

void check_ladder_structure(const FeatureLadder& ladder) {
    if (ladder.rungs.empty()) {
        throw ConfigError("ladder has no rungs");
    }
    for (const LadderRung& rung : ladder.rungs) {
        rung.model.validate();
    }
    for (std::size_t i = 1; i < ladder.rungs.size(); ++i) {
        auto prev = rung_features(ladder.rungs[i - 1]);
        auto cur = rung_features(ladder.rungs[i]);
        std::vector<std::string> changed;
        for (const auto& [key, value] : cur) {
            if (prev.at(key) != value) {
                changed.push_back(key);
            }
        }
        if (changed.size() != 1) {
            std::ostringstream os;
            os << "ladder rung '" << ladder.rungs[i].name << "' must change exactly one feature from '"
               << ladder.rungs[i - 1].name << "'; changed:";
            if (changed.empty()) {
                os << " none";
            }
            for (const auto& key : changed) {
                os << " " << key;
            }
            throw ConfigError(os.str());
        }
    }
}

LadderResult run_feature_ladder(const FeatureLadder& ladder,
                                const std::vector<LabeledSequence>& train_data,
                                const std::vector<LabeledSequence>& valid_data,
                                const EmbeddingTable& embeddings,
                                const TrainSpec& base_spec, int n_runs, int jobs) {
    if (n_runs < 1) {
        throw ConfigError("n_runs must be >= 1");
    }
    check_ladder_structure(ladder);

    struct Cell {
        std::size_t rung;
        std::size_t run;
    };
    std::vector<Cell> cells;
    for (std::size_t r = 0; r < ladder.rungs.size(); ++r) {
        for (int k = 0; k < n_runs; ++k) {
            cells.push_back(Cell{r, static_cast<std::size_t>(k)});
        }
    }

    std::vector<double> accuracies(cells.size(), 0.0);
    std::vector<RunRecord> records(cells.size());
    parallel_for(cells.size(), jobs, [&](std::size_t i) {
        const Cell& cell = cells[i];
        const LadderRung& rung = ladder.rungs[cell.rung];
        TrainSpec spec = base_spec;
        spec.model = rung.model;
        spec.seed = run_seed(base_spec.seed, cell.rung, cell.run);
        TrainResult tr = train(spec, train_data, valid_data, embeddings, {});
        double acc;
        if (rung.mc_eval) {
            McEvalSpec mc;
            mc.k = rung.mc_k;
            mc.seed = spec.seed;
            acc = evaluate_mc(tr.best.model, tr.best.embeddings.matrix, valid_data, mc);
        } else {
            acc = evaluate_standard(tr.best.model, tr.best.embeddings.matrix, valid_data);
        }
        accuracies[i] = acc;
        records[i] = RunRecord{rung.name, static_cast<int>(cell.run), tr.history};
    });

    LadderResult result;
    result.runs = std::move(records);
    for (std::size_t r = 0; r < ladder.rungs.size(); ++r) {
        RungResult rr;
        rr.name = ladder.rungs[r].name;
        for (int k = 0; k < n_runs; ++k) {
            rr.accuracies.push_back(accuracies[r * static_cast<std::size_t>(n_runs) + static_cast<std::size_t>(k)]);
        }
        rr.stats = box_stats(rr.accuracies);
        result.rungs.push_back(std::move(rr));
    }
    return result;
}

std::int64_t hidden_for_budget(int depth, std::int64_t budget, const ModelConfig& base) {
    if (depth < 1) {
        throw ConfigError("depth must be >= 1");
    }
    // The standard equal-budget ladder uses its published hidden sizes.
    if (budget == 550000 && base.embed_dim == 300 && base.num_classes == 5 &&
        !base.bidirectional && !base.pooling_enabled) {
        switch (depth) {
            case 1: return 250;
            case 2: return 170;
            case 4: return 120;
            case 6: return 100;
            case 8: return 85;
            default: break;
        }
    }
    ModelConfig probe = base;
    probe.num_layers = depth;
    std::int64_t best_hidden = 1;
    std::int64_t best_diff = -1;
    for (std::int64_t h = 1; h <= budget; ++h) {
        probe.hidden_size = h;
        std::int64_t c = count_parameters(probe);
        std::int64_t diff = std::llabs(c - budget);
        if (best_diff < 0 || diff < best_diff) {
            best_diff = diff;
            best_hidden = h;
        }
        if (c > budget && diff > best_diff) {
            break;  // counts grow monotonically in h
        }
    }
    probe.hidden_size = best_hidden;
    std::int64_t achieved = count_parameters(probe);
    if (std::llabs(achieved - budget) > budget / 50) {
        std::ostringstream os;
        os << "no hidden size within 2% of budget " << budget << " at depth " << depth
           << "; nearest achievable count is " << achieved << " (hidden " << best_hidden << ")";
        throw ConfigError(os.str());
    }
    return best_hidden;
}

DepthSuiteResult run_depth_suite(const std::vector<LabeledSequence>& train_data,
                                 const std::vector<LabeledSequence>& valid_data,
                                 const EmbeddingTable& embeddings,
                                 const TrainSpec& base_spec, std::int64_t budget,
                                 const std::vector<int>& depths,
                                 const std::vector<ResidualMode>& modes, int n_runs,
                                 int jobs) {
    if (depths.empty() || modes.empty()) {
        throw ConfigError("depth suite needs at least one depth and one residual mode");
    }
    if (n_runs < 1) {
        throw ConfigError("n_runs must be >= 1");
    }

    DepthSuiteResult result;
    for (int depth : depths) {
        std::int64_t hidden = hidden_for_budget(depth, budget, base_spec.model);
        for (ResidualMode mode : modes) {
            DepthCell cell;
            cell.depth = depth;
            cell.mode = mode;
            cell.hidden = hidden;
            ModelConfig cfg = base_spec.model;
            cfg.num_layers = depth;
            cfg.hidden_size = hidden;
            cfg.residual_mode = mode;
            cell.param_count = count_parameters(cfg);
            result.cells.push_back(cell);
        }
    }

    std::size_t cells_n = result.cells.size();
    std::vector<std::vector<double>> accs(cells_n, std::vector<double>(static_cast<std::size_t>(n_runs)));
    std::vector<RunRecord> records(cells_n * static_cast<std::size_t>(n_runs));
    parallel_for(cells_n * static_cast<std::size_t>(n_runs), jobs, [&](std::size_t flat) {
        std::size_t ci = flat / static_cast<std::size_t>(n_runs);
        std::size_t run = flat % static_cast<std::size_t>(n_runs);
        const DepthCell& cell = result.cells[ci];
        TrainSpec spec = base_spec;
        spec.model.num_layers = cell.depth;
        spec.model.hidden_size = cell.hidden;
        spec.model.residual_mode = cell.mode;
        spec.seed = run_seed(base_spec.seed, ci, run);
        TrainResult tr = train(spec, train_data, valid_data, embeddings, {});
        double acc = evaluate_standard(tr.best.model, tr.best.embeddings.matrix, valid_data);
        accs[ci][run] = acc;
        std::ostringstream name;
        name << "d" << cell.depth << "_" << residual_mode_name(cell.mode);
        records[flat] = RunRecord{name.str(), static_cast<int>(run), tr.history};
    });

    for (std::size_t ci = 0; ci < cells_n; ++ci) {
        DepthCell& cell = result.cells[ci];
        cell.accuracies = accs[ci];
        cell.mean_acc = sample_mean(cell.accuracies);
        double sd = std::sqrt(sample_variance(cell.accuracies));
        double sem = cell.accuracies.size() > 1
                         ? sd / std::sqrt(static_cast<double>(cell.accuracies.size()))
                         : 0.0;
        cell.ci_low = cell.mean_acc - 1.645 * sem;
        cell.ci_high = cell.mean_acc + 1.645 * sem;
    }
    result.runs = std::move(records);
    return result;
}

std::string ladder_runs_to_csv(const std::vector<RunRecord>& runs) {
    std::ostringstream os;
    os.precision(17);
    os << "rung,run,epoch,train_loss,valid_acc\n";
    for (const RunRecord& rec : runs) {
        for (const EpochMetrics& m : rec.history) {
            os << rec.rung << "," << rec.run << "," << m.epoch << "," << m.train_loss << ","
               << m.valid_acc << "\n";
        }
    }
    return os.str();
}

std::string ladder_summary_json(const LadderResult& result) {
    json out;
    out["rungs"] = json::array();
    for (const RungResult& r : result.rungs) {
        json entry = box_to_json(r.stats, r.accuracies);
        entry["name"] = r.name;
        out["rungs"].push_back(entry);
    }
    return out.dump(2) + "\n";
}

std::string depth_summary_json(const DepthSuiteResult& result) {
    json out;
    out["cells"] = json::array();
    for (const DepthCell& c : result.cells) {
        out["cells"].push_back(json{{"depth", c.depth},
                                    {"mode", residual_mode_name(c.mode)},
                                    {"hidden", c.hidden},
                                    {"param_count", c.param_count},
                                    {"accuracies", c.accuracies},
                                    {"mean_acc", c.mean_acc},
                                    {"ci_low", c.ci_low},
                                    {"ci_high", c.ci_high}});
    }
    return out.dump(2) + "\n";
}

std::string depth_cells_to_csv(const DepthSuiteResult& result) {
    std::ostringstream os;
    os.precision(17);
    os << "depth,mode,hidden,param_count,mean_acc,ci_low,ci_high\n";
    for (const DepthCell& c : result.cells) {
        os << c.depth << "," << residual_mode_name(c.mode) << "," << c.hidden << ","
           << c.param_count << "," << c.mean_acc << "," << c.ci_low << "," << c.ci_high << "\n";
    }
    return os.str();
}

}  // namespace lstmkit
