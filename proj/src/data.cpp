#include "lstmkit/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lstmkit/error.hpp"

namespace lstmkit {

Vocabulary::Vocabulary() {
    add("<unk>");
    add("<pad>");
}

int Vocabulary::add(const std::string& token) {
    auto it = ids_.find(token);
    if (it != ids_.end()) {
        return it->second;
    }
    int id = static_cast<int>(tokens_.size());
    ids_.emplace(token, id);
    tokens_.push_back(token);
    return id;
}

int Vocabulary::lookup(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnknownId : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
    return ids_.count(token) != 0;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) {
        throw IndexError("vocabulary id " + std::to_string(id) + " out of range");
    }
    return tokens_[static_cast<std::size_t>(id)];
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary v;
    for (const auto& t : tokens) {
        v.add(t);
    }
    return v;
}

EmbeddingTable EmbeddingTable::random(int vocab_size, std::int64_t dim, Rng& rng,
                                      bool trainable, double range) {
    if (vocab_size < 2) {
        throw ConfigError("embedding table needs at least the special rows");
    }
    std::vector<double> data(static_cast<std::size_t>(vocab_size) * static_cast<std::size_t>(dim), 0.0);
    for (int r = 2; r < vocab_size; ++r) {
        for (std::int64_t c = 0; c < dim; ++c) {
            data[static_cast<std::size_t>(r) * static_cast<std::size_t>(dim) + static_cast<std::size_t>(c)] =
                rng.uniform(-range, range);
        }
    }
    EmbeddingTable table;
    table.dim = dim;
    table.trainable = trainable;
    table.matrix = Tensor::from(std::move(data), {vocab_size, dim});
    return table;
}

std::vector<std::string> tokenize(const std::string& text) {
    static const std::string punct = ".,!?;:\"'()";
    std::string spaced;
    spaced.reserve(text.size() * 2);
    for (char ch : text) {
        if (punct.find(ch) != std::string::npos) {
            spaced.push_back(' ');
            spaced.push_back(ch);
            spaced.push_back(' ');
        } else {
            spaced.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    std::vector<std::string> out;
    std::istringstream is(spaced);
    std::string tok;
    while (is >> tok) {
        out.push_back(tok);
    }
    return out;
}

EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab,
                               std::int64_t expected_dim, Rng& rng, bool trainable) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open embeddings file: " + path);
    }
    EmbeddingTable table = EmbeddingTable::random(vocab.size(), expected_dim, rng, trainable);
    std::vector<double> data(table.matrix.values().begin(), table.matrix.values().end());

    std::string line;
    std::size_t line_no = 0;
    int coverage = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::istringstream is(line);
        std::string token;
        is >> token;
        std::vector<double> values;
        values.reserve(static_cast<std::size_t>(expected_dim));
        double v;
        while (is >> v) {
            values.push_back(v);
        }
        if (!is.eof()) {
            throw FormatError("embeddings line " + std::to_string(line_no) + ": non-numeric value");
        }
        if (static_cast<std::int64_t>(values.size()) != expected_dim) {
            std::ostringstream os;
            os << "embeddings line " << line_no << ": expected " << expected_dim
               << " values, found " << values.size();
            throw FormatError(os.str());
        }
        if (!vocab.contains(token)) {
            continue;
        }
        int id = vocab.lookup(token);
        if (id == Vocabulary::kUnknownId || id == Vocabulary::kPaddingId) {
            continue;  // special rows stay zero
        }
        std::copy(values.begin(), values.end(),
                  data.begin() + static_cast<std::ptrdiff_t>(id) * static_cast<std::ptrdiff_t>(expected_dim));
        ++coverage;
    }
    table.matrix = Tensor::from(std::move(data), {vocab.size(), expected_dim});
    table.coverage = coverage;
    return table;
}

std::vector<RawExample> read_dataset(const std::string& path, int num_classes) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open dataset file: " + path);
    }
    std::vector<RawExample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw FormatError("dataset line " + std::to_string(line_no) + ": missing tab separator");
        }
        std::string label_str = line.substr(0, tab);
        int label = 0;
        try {
            std::size_t used = 0;
            label = std::stoi(label_str, &used);
            if (used != label_str.size()) {
                throw std::invalid_argument("trailing");
            }
        } catch (const std::exception&) {
            throw FormatError("dataset line " + std::to_string(line_no) + ": bad label '" + label_str + "'");
        }
        if (label < 0 || label >= num_classes) {
            std::ostringstream os;
            os << "dataset line " << line_no << ": label " << label << " outside [0, " << num_classes << ")";
            throw FormatError(os.str());
        }
        RawExample ex;
        ex.label = label;
        ex.text = line.substr(tab + 1);
        ex.tokens = tokenize(ex.text);
        if (ex.tokens.empty()) {
            throw FormatError("dataset line " + std::to_string(line_no) + ": empty text");
        }
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<LabeledSequence> encode_examples(const std::vector<RawExample>& raw,
                                             Vocabulary& vocab, bool grow_vocab) {
    std::vector<LabeledSequence> out;
    out.reserve(raw.size());
    for (const RawExample& ex : raw) {
        LabeledSequence seq;
        seq.label = ex.label;
        seq.raw_text = ex.text;
        seq.token_ids.reserve(ex.tokens.size());
        for (const std::string& tok : ex.tokens) {
            seq.token_ids.push_back(grow_vocab ? vocab.add(tok) : vocab.lookup(tok));
        }
        out.push_back(std::move(seq));
    }
    return out;
}

std::vector<LabeledSequence> load_dataset(const std::string& path, int num_classes,
                                          Vocabulary& vocab) {
    auto raw = read_dataset(path, num_classes);
    return encode_examples(raw, vocab, /*grow_vocab=*/true);
}

std::pair<std::vector<LabeledSequence>, std::vector<LabeledSequence>>
split_dataset(const std::vector<LabeledSequence>& data, std::size_t train_count,
              std::size_t valid_count, std::uint64_t seed) {
    if (train_count + valid_count != data.size()) {
        std::ostringstream os;
        os << "split counts " << train_count << " + " << valid_count
           << " do not cover dataset of " << data.size();
        throw ProtocolError(os.str());
    }
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed, 0);
    rng.shuffle(order);
    std::pair<std::vector<LabeledSequence>, std::vector<LabeledSequence>> out;
    out.first.reserve(train_count);
    out.second.reserve(valid_count);
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < train_count ? out.first : out.second).push_back(data[order[i]]);
    }
    return out;
}

std::vector<LabeledSequence> truncate_sequences(std::vector<LabeledSequence> data,
                                                std::size_t max_len, TruncateSide side) {
    if (max_len == 0) {
        throw ConfigError("truncation length must be >= 1");
    }
    for (auto& seq : data) {
        if (seq.token_ids.size() <= max_len) {
            continue;
        }
        if (side == TruncateSide::Right) {
            seq.token_ids.resize(max_len);
        } else {
            seq.token_ids.erase(seq.token_ids.begin(),
                                seq.token_ids.end() - static_cast<std::ptrdiff_t>(max_len));
        }
    }
    return data;
}

SyntheticTask synthetic_task_from_name(const std::string& name) {
    if (name == "first_token_class") return SyntheticTask::FirstTokenClass;
    if (name == "majority_token") return SyntheticTask::MajorityToken;
    if (name == "long_range_flag") return SyntheticTask::LongRangeFlag;
    throw ConfigError("unknown synthetic task: " + name);
}

const char* synthetic_task_name(SyntheticTask task) {
    switch (task) {
        case SyntheticTask::FirstTokenClass: return "first_token_class";
        case SyntheticTask::MajorityToken: return "majority_token";
        case SyntheticTask::LongRangeFlag: return "long_range_flag";
    }
    return "first_token_class";
}

std::vector<LabeledSequence> gen_synthetic(SyntheticTask task, std::size_t n_examples,
                                           std::size_t seq_len, int vocab_size,
                                           int num_classes, std::uint64_t seed) {
    if (seq_len < 1) {
        throw ConfigError("seq_len must be >= 1");
    }
    if (num_classes < 2) {
        throw ConfigError("num_classes must be >= 2");
    }
    const int first_marker = 2;  // ids 0/1 are reserved for specials
    const int first_filler = first_marker + num_classes;
    if (vocab_size < first_filler + (task == SyntheticTask::MajorityToken ? 0 : 1)) {
        throw ConfigError("vocab_size too small for " + std::string(synthetic_task_name(task)));
    }
    Rng rng(seed, 0);
    auto random_filler = [&]() {
        return first_filler + static_cast<int>(rng.below(static_cast<std::uint32_t>(vocab_size - first_filler)));
    };

    std::vector<LabeledSequence> out;
    out.reserve(n_examples);
    for (std::size_t e = 0; e < n_examples; ++e) {
        int label = static_cast<int>(rng.below(static_cast<std::uint32_t>(num_classes)));
        LabeledSequence seq;
        seq.label = label;
        seq.token_ids.resize(seq_len);
        switch (task) {
            case SyntheticTask::FirstTokenClass: {
                seq.token_ids[0] = first_marker + label;
                for (std::size_t t = 1; t < seq_len; ++t) {
                    seq.token_ids[t] = random_filler();
                }
                break;
            }
            case SyntheticTask::MajorityToken: {
                // Strict majority of the label's marker; remaining slots are
                // other classes' markers.
                std::size_t majority = seq_len / 2 + 1;
                if (seq_len > majority) {
                    majority += rng.below(static_cast<std::uint32_t>(seq_len - majority + 1));
                }
                std::vector<int> tokens(seq_len);
                for (std::size_t t = 0; t < seq_len; ++t) {
                    if (t < majority) {
                        tokens[t] = first_marker + label;
                    } else {
                        int other = static_cast<int>(rng.below(static_cast<std::uint32_t>(num_classes - 1)));
                        if (other >= label) {
                            ++other;
                        }
                        tokens[t] = first_marker + other;
                    }
                }
                rng.shuffle(tokens);
                seq.token_ids = std::move(tokens);
                break;
            }
            case SyntheticTask::LongRangeFlag: {
                for (std::size_t t = 0; t < seq_len; ++t) {
                    seq.token_ids[t] = random_filler();
                }
                std::size_t window = std::min<std::size_t>(5, seq_len);
                std::size_t pos = rng.below(static_cast<std::uint32_t>(window));
                seq.token_ids[pos] = first_marker + label;
                break;
            }
        }
        out.push_back(std::move(seq));
    }
    return out;
}

Vocabulary synthetic_vocab(int vocab_size) {
    Vocabulary v;
    for (int i = 2; i < vocab_size; ++i) {
        v.add("w" + std::to_string(i));
    }
    return v;
}

}  // namespace lstmkit
