#pragma once

#include <span>
#include <vector>

#include "lstmkit/rng.hpp"
#include "lstmkit/tensor.hpp"

namespace lstmkit {

// Forward ops. Every op validates shapes, rejects non-finite outputs, and, when
// a tape is supplied and any input is recorded, registers its backward rule.
// Binary elementwise ops require identical shapes; the only broadcasting is
// scalar-with-tensor (add_scalar / scale).

// [m x k] * [k x n] -> [m x n]
Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);

// [k] * [k x n] -> [n]; the row-vector product used for per-timestep affine maps.
Tensor vecmat(Tape* tape, const Tensor& x, const Tensor& w);

Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor add_scalar(Tape* tape, const Tensor& a, double c);
Tensor scale(Tape* tape, const Tensor& a, double c);

Tensor tanh_op(Tape* tape, const Tensor& a);
Tensor sigmoid(Tape* tape, const Tensor& a);

// Sum of all entries -> scalar.
Tensor sum_all(Tape* tape, const Tensor& a);

// Concatenation of two rank-1 tensors.
Tensor concat(Tape* tape, const Tensor& a, const Tensor& b);

// Arithmetic mean of same-shaped rank-1 tensors.
Tensor mean_of(Tape* tape, const std::vector<Tensor>& xs);

// Row i of a rank-2 tensor as a rank-1 tensor.
Tensor row(Tape* tape, const Tensor& m, std::int64_t i);

// Gathers table rows by id into a [n x dim] tensor. Backward scatters into the
// table, accumulating over duplicate ids. Out-of-range ids raise VocabError.
Tensor gather_rows(Tape* tape, const Tensor& table, std::span<const int> ids);

struct SoftmaxLoss {
    Tensor loss;   // scalar, -log probs[label]
    Tensor probs;  // normalized, detached from the tape
};

// Max-subtracted stable softmax with fused cross-entropy backward
// (probs - onehot(label)).
SoftmaxLoss softmax_cross_entropy(Tape* tape, const Tensor& logits, int label);

// Inverted-dropout mask: entries are 1/keep_prob with probability keep_prob,
// else 0. keep_prob == 1 yields exact ones. keep_prob outside (0,1] is a
// ConfigError. Masks are constants; they never join a tape.
Tensor dropout_mask(Rng& rng, std::vector<std::int64_t> shape, double keep_prob);

}  // namespace lstmkit
