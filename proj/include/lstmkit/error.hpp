#pragma once

#include <stdexcept>
#include <string>

namespace lstmkit {

// Base for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shapes don't line up (matmul inner dims, elementwise operands, ...).
struct DimensionError : Error {
    using Error::Error;
};

// Invalid configuration detected at construction time.
struct ConfigError : Error {
    using Error::Error;
};

// Index out of range (class labels, tensor rows).
struct IndexError : Error {
    using Error::Error;
};

// NaN/Inf surfaced by a forward op, or a non-finite loss.
struct NumericError : Error {
    using Error::Error;
};

// Malformed input file contents (embeddings, datasets, checkpoints).
struct FormatError : Error {
    using Error::Error;
};

// Filesystem-level failure.
struct IoError : Error {
    using Error::Error;
};

// Experiment protocol misuse (p > k, empty sample subset, bad split counts).
struct ProtocolError : Error {
    using Error::Error;
};

// Token id with no embedding row.
struct VocabError : Error {
    using Error::Error;
};

}  // namespace lstmkit
