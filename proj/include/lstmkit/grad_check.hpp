#pragma once

#include <functional>

#include "lstmkit/tensor.hpp"

namespace lstmkit {

// A pure, deterministic scalar function of one tensor. When called with a tape
// the argument is already watched; the scalar result must be recorded on that
// tape. Called with tape == nullptr for plain evaluation.
using ScalarFn = std::function<Tensor(Tape*, const Tensor&)>;

// Compares the tape gradient of f at x against central finite differences with
// step h. Returns max over entries of
//   |analytic - numeric| / max(1, |analytic|, |numeric|).
// Any stochastic pieces of f (dropout masks) must be frozen by the caller.
double grad_check(const ScalarFn& f, const Tensor& x, double h = 1e-5);

}  // namespace lstmkit
