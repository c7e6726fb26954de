#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lstmkit/rng.hpp"
#include "lstmkit/tensor.hpp"

namespace lstmkit {

// Token <-> id map with fixed special ids. Lookups of unseen tokens return the
// unknown id; they never fail.
class Vocabulary {
public:
    static constexpr int kUnknownId = 0;
    static constexpr int kPaddingId = 1;

    Vocabulary();

    // Adds a token if absent; returns its id either way.
    int add(const std::string& token);
    int lookup(const std::string& token) const;
    bool contains(const std::string& token) const;
    const std::string& token(int id) const;
    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    static Vocabulary from_tokens(const std::vector<std::string>& tokens);

private:
    std::unordered_map<std::string, int> ids_;
    std::vector<std::string> tokens_;
};

struct LabeledSequence {
    std::vector<int> token_ids;  // length >= 1
    int label = 0;
    std::string raw_text;
};

struct EmbeddingTable {
    std::int64_t dim = 0;
    Tensor matrix;  // [vocab_size x dim]
    bool trainable = true;
    int coverage = 0;  // vocab tokens found in the embeddings file

    // Uniform [-range, range] rows; unknown/padding rows zero.
    static EmbeddingTable random(int vocab_size, std::int64_t dim, Rng& rng,
                                 bool trainable = true, double range = 0.08);
};

// Lowercases, splits punctuation marks . , ! ? ; : " ' ( ) into standalone
// tokens, then splits on whitespace. Whitespace-only input yields an empty
// list.
std::vector<std::string> tokenize(const std::string& text);

// GloVe text format: one token per line followed by expected_dim reals. Rows
// for vocabulary tokens are filled from the file; remaining non-special rows
// are initialized uniform [-0.08, 0.08] from rng. Special rows stay zero.
EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab,
                               std::int64_t expected_dim, Rng& rng,
                               bool trainable = true);

struct RawExample {
    int label = 0;
    std::vector<std::string> tokens;
    std::string text;
};

// Parses `label<TAB>text` lines; tokenizes and range-checks labels. Malformed
// lines (bad label, missing tab, empty token list) raise FormatError with the
// line number.
std::vector<RawExample> read_dataset(const std::string& path, int num_classes);

std::vector<LabeledSequence> encode_examples(const std::vector<RawExample>& raw,
                                             Vocabulary& vocab, bool grow_vocab);

// Convenience: read + encode, growing the vocabulary.
std::vector<LabeledSequence> load_dataset(const std::string& path, int num_classes,
                                          Vocabulary& vocab);

// Deterministic shuffle by seed, then partition. train_count + valid_count
// must equal the dataset size.
std::pair<std::vector<LabeledSequence>, std::vector<LabeledSequence>>
split_dataset(const std::vector<LabeledSequence>& data, std::size_t train_count,
              std::size_t valid_count, std::uint64_t seed);

enum class TruncateSide { Left, Right };

// Explicit length cap; never applied implicitly.
std::vector<LabeledSequence> truncate_sequences(std::vector<LabeledSequence> data,
                                                std::size_t max_len, TruncateSide side);

enum class SyntheticTask {
    FirstTokenClass,  // label = class of the first token, rest random
    MajorityToken,    // label = the strictly most frequent marker token
    LongRangeFlag,    // label = marker planted in the first 5 positions
};

SyntheticTask synthetic_task_from_name(const std::string& name);
const char* synthetic_task_name(SyntheticTask task);

// Deterministic generators over marker token ids 2 .. 2+num_classes-1 with
// filler ids above. vocab_size must cover the markers (and one filler token
// for LongRangeFlag).
std::vector<LabeledSequence> gen_synthetic(SyntheticTask task, std::size_t n_examples,
                                           std::size_t seq_len, int vocab_size,
                                           int num_classes, std::uint64_t seed);

// Vocabulary whose token "w<i>" has id i, matching generator output.
Vocabulary synthetic_vocab(int vocab_size);

}  // namespace lstmkit
