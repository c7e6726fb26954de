#include "lstmkit/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "lstmkit/error.hpp"

namespace lstmkit {

namespace {

double eval_scalar(const ScalarFn& f, const Tensor& x) {
    Tensor y = f(nullptr, x);
    if (y.size() != 1) {
        throw Error("grad_check: f must return a scalar");
    }
    double v = y[0];
    if (!std::isfinite(v)) {
        throw NumericError("grad_check: f(x) is not finite");
    }
    return v;
}

}  // namespace

double grad_check(const ScalarFn& f, const Tensor& x, double h) {
    Tape tape;
    Tensor watched = tape.watch(x);
    Tensor y = f(&tape, watched);
    if (y.size() != 1) {
        throw Error("grad_check: f must return a scalar");
    }
    if (!std::isfinite(y[0])) {
        throw NumericError("grad_check: f(x) is not finite");
    }
    tape.backward(y);
    auto analytic = tape.adjoint_view(watched.node());

    std::vector<double> base(x.values().begin(), x.values().end());
    double max_rel = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) {
        std::vector<double> bumped = base;
        bumped[i] = base[i] + h;
        double up = eval_scalar(f, Tensor::from(bumped, x.shape()));
        bumped[i] = base[i] - h;
        double down = eval_scalar(f, Tensor::from(bumped, x.shape()));
        double numeric = (up - down) / (2.0 * h);
        double a = analytic.empty() ? 0.0 : analytic[i];
        double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
        max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
    }
    return max_rel;
}

}  // namespace lstmkit
