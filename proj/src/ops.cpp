#include "lstmkit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lstmkit {

namespace {

void check_finite(std::span<const double> v, const char* op) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string("non-finite value produced by ") + op);
        }
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        std::ostringstream os;
        os << op << ": shape mismatch " << a.shape_str() << " vs " << b.shape_str();
        throw DimensionError(os.str());
    }
}

bool recording(Tape* tape, std::initializer_list<const Tensor*> ins) {
    if (!tape) {
        return false;
    }
    bool any = false;
    for (const Tensor* t : ins) {
        tape->check_owned(*t);
        any = any || t->node() >= 0;
    }
    return any;
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw DimensionError("matmul expects rank-2 tensors, got " + a.shape_str() + " and " + b.shape_str());
    }
    if (a.dim(1) != b.dim(0)) {
        std::ostringstream os;
        os << "matmul: inner dimensions disagree, " << a.shape_str() << " vs " << b.shape_str();
        throw DimensionError(os.str());
    }
    const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    auto av = a.values();
    auto bv = b.values();
    std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t p = 0; p < k; ++p) {
            const double aip = av[static_cast<std::size_t>(i * k + p)];
            const double* brow = &bv[static_cast<std::size_t>(p * n)];
            double* orow = &out[static_cast<std::size_t>(i * n)];
            for (std::int64_t j = 0; j < n; ++j) {
                orow[j] += aip * brow[j];
            }
        }
    }
    check_finite(out, "matmul");
    Tensor result = Tensor::from(std::move(out), {m, n});
    if (recording(tape, {&a, &b})) {
        const int an = a.node(), bn = b.node();
        int node = tape->record({an, bn}, m * n, [an, bn, a, b, m, k, n](Tape& t, std::span<const double> g) {
            auto av2 = a.values();
            auto bv2 = b.values();
            if (an >= 0) {
                auto& ga = t.adjoint(an);  // dA = dC * B^T
                for (std::int64_t i = 0; i < m; ++i) {
                    for (std::int64_t p = 0; p < k; ++p) {
                        double s = 0.0;
                        for (std::int64_t j = 0; j < n; ++j) {
                            s += g[static_cast<std::size_t>(i * n + j)] * bv2[static_cast<std::size_t>(p * n + j)];
                        }
                        ga[static_cast<std::size_t>(i * k + p)] += s;
                    }
                }
            }
            if (bn >= 0) {
                auto& gb = t.adjoint(bn);  // dB = A^T * dC
                for (std::int64_t p = 0; p < k; ++p) {
                    for (std::int64_t j = 0; j < n; ++j) {
                        double s = 0.0;
                        for (std::int64_t i = 0; i < m; ++i) {
                            s += av2[static_cast<std::size_t>(i * k + p)] * g[static_cast<std::size_t>(i * n + j)];
                        }
                        gb[static_cast<std::size_t>(p * n + j)] += s;
                    }
                }
            }
        });
        result = result.with_node(node, tape->id());
    }
    return result;
}

Tensor vecmat(Tape* tape, const Tensor& x, const Tensor& w) {
    if (x.rank() != 1 || w.rank() != 2) {
        throw DimensionError("vecmat expects [k] and [k x n], got " + x.shape_str() + " and " + w.shape_str());
    }
    if (x.dim(0) != w.dim(0)) {
        std::ostringstream os;
        os << "vecmat: inner dimensions disagree, " << x.shape_str() << " vs " << w.shape_str();
        throw DimensionError(os.str());
    }
    const std::int64_t k = x.dim(0), n = w.dim(1);
    auto xv = x.values();
    auto wv = w.values();
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (std::int64_t p = 0; p < k; ++p) {
        const double xp = xv[static_cast<std::size_t>(p)];
        const double* wrow = &wv[static_cast<std::size_t>(p * n)];
        for (std::int64_t j = 0; j < n; ++j) {
            out[static_cast<std::size_t>(j)] += xp * wrow[j];
        }
    }
    check_finite(out, "vecmat");
    Tensor result = Tensor::from(std::move(out), {n});
    if (recording(tape, {&x, &w})) {
        const int xn = x.node(), wn = w.node();
        int node = tape->record({xn, wn}, n, [xn, wn, x, w, k, n](Tape& t, std::span<const double> g) {
            auto xv2 = x.values();
            auto wv2 = w.values();
            if (xn >= 0) {
                auto& gx = t.adjoint(xn);  // dx = W * dy
                for (std::int64_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    const double* wrow = &wv2[static_cast<std::size_t>(p * n)];
                    for (std::int64_t j = 0; j < n; ++j) {
                        s += wrow[j] * g[static_cast<std::size_t>(j)];
                    }
                    gx[static_cast<std::size_t>(p)] += s;
                }
            }
            if (wn >= 0) {
                auto& gw = t.adjoint(wn);  // dW = outer(x, dy)
                for (std::int64_t p = 0; p < k; ++p) {
                    const double xp = xv2[static_cast<std::size_t>(p)];
                    double* grow = &gw[static_cast<std::size_t>(p * n)];
                    for (std::int64_t j = 0; j < n; ++j) {
                        grow[j] += xp * g[static_cast<std::size_t>(j)];
                    }
                }
            }
        });
        result = result.with_node(node, tape->id());
    }
    return result;
}

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    auto av = a.values();
    auto bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = av[i] + bv[i];
    }
    check_finite(out, "add");
    Tensor result = Tensor::from(std::move(out), a.shape());
    if (recording(tape, {&a, &b})) {
        const int an = a.node(), bn = b.node();
        int node = tape->record({an, bn}, a.size(), [an, bn](Tape& t, std::span<const double> g) {
            for (int target : {an, bn}) {
                if (target < 0) continue;
                auto& gt = t.adjoint(target);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    gt[i] += g[i];
                }
            }
        });
        result = result.with_node(node, tape->id());
    }
    return result;
}

Tensor sub(Tape* tape, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    auto av = a.values();
    auto bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = av[i] - bv[i];
    }
    check_finite(out, "sub");
    Tensor result = Tensor::from(std::move(out), a.shape());
    if (recording(tape, {&a, &b})) {
        const int an = a.node(), bn = b.node();
        int node = tape->record({an, bn}, a.size(), [an, bn](Tape& t, std::span<const double> g) {
            if (an >= 0) {
                auto& ga = t.adjoint(an);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] += g[i];
                }
            }
            if (bn >= 0) {
                auto& gb = t.adjoint(bn);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    gb[i] -= g[i];
                }
            }
        });
        result = result.with_node(node, tape->id());
    }
    return result;
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    auto av = a.values();
    auto bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = av[i] * bv[i];
    }
    check_finite(out, "mul");
    Tensor result = Tensor::from(std::move(out), a.shape());
    if (recording(tape, {&a, &b})) {
        const int an = a.node(), bn = b.node();
        int node = tape->record({an, bn}, a.size(), [an, bn, a, b](Tape& t, std::span<const double> g) {
            auto av2 = a.values();
            auto bv2 = b.values();
            if (an >= 0) {
                auto& ga = t.adjoint(an);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    ga[i] += bv2[i] * g[i];
                }
            }
            if (bn >= 0) {
                auto& gb = t.adjoint(bn);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    gb[i] += av2[i] * g[i];
                }
            }
        });
        result = result.with_node(node, tape->id());
    }
    return result;
}

Tensor add_scalar(Tape* tape, const Tensor& a, double c) {
    auto av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = av[i] + c;
    }
    check_finite(out, "add_scalar");
    Tensor result = Tensor::from(std::move(out), a.shape());
    if (recording(tape, {&a})) {
        const int an = a.node();
        int node = tape->record({an}, a.size(), [an](Tape& t, std::span<const double> g) {
            auto& ga = t.adjoint(an);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
            }
        });
        result = result.with_node(node, tape->id());
    }
    return result;
}

Tensor scale(Tape* tape, const Tensor& a, double c) {
    auto av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = av[i] * c;
    }
    check_finite(out, "scale");
    Tensor result = Tensor::from(std::move(out), a.shape());
    if (recording(tape, {&a})) {
        const int an = a.node();
        int node = tape->record({an}, a.size(), [an, c](Tape& t, std::span<const double> g) {
            auto& ga = t.adjoint(an);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += c * g[i];
            }
        });
        result = result.with_node(node, tape->id());
    }
    return result;
}

Tensor tanh_op(Tape* tape, const Tensor& a) {
    auto av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::tanh(av[i]);
    }
    check_finite(out, "tanh");
    Tensor result = Tensor::from(std::move(out), a.shape());
    if (recording(tape, {&a})) {
        const int an = a.node();
        // d tanh = 1 - tanh^2, read off the output values.
        int node = tape->record({an}, a.size(), [an, result](Tape& t, std::span<const double> g) {
            auto y = result.values();
            auto& ga = t.adjoint(an);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += (1.0 - y[i] * y[i]) * g[i];
            }
        });
        result = result.with_node(node, tape->id());
    }
    return result;
}

Tensor sigmoid(Tape* tape, const Tensor& a) {
    auto av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = stable_sigmoid(av[i]);
    }
    check_finite(out, "sigmoid");
    Tensor result = Tensor::from(std::move(out), a.shape());
    if (recording(tape, {&a})) {
        const int an = a.node();
        int node = tape->record({an}, a.size(), [an, result](Tape& t, std::span<const double> g) {
            auto y = result.values();
            auto& ga = t.adjoint(an);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += y[i] * (1.0 - y[i]) * g[i];
            }
        });
        result = result.with_node(node, tape->id());
    }
    return result;
}

Tensor sum_all(Tape* tape, const Tensor& a) {
    auto av = a.values();
    double s = 0.0;
    for (double v : av) {
        s += v;
    }
    if (!std::isfinite(s)) {
        throw NumericError("non-finite value produced by sum");
    }
    Tensor result = Tensor::scalar(s);
    if (recording(tape, {&a})) {
        const int an = a.node();
        const std::int64_t n = a.size();
        int node = tape->record({an}, 1, [an, n](Tape& t, std::span<const double> g) {
            auto& ga = t.adjoint(an);
            for (std::int64_t i = 0; i < n; ++i) {
                ga[static_cast<std::size_t>(i)] += g[0];
            }
        });
        result = result.with_node(node, tape->id());
    }
    return result;
}

Tensor concat(Tape* tape, const Tensor& a, const Tensor& b) {
    if (a.rank() != 1 || b.rank() != 1) {
        throw DimensionError("concat expects rank-1 tensors");
    }
    auto av = a.values();
    auto bv = b.values();
    std::vector<double> out;
    out.reserve(av.size() + bv.size());
    out.insert(out.end(), av.begin(), av.end());
    out.insert(out.end(), bv.begin(), bv.end());
    Tensor result = Tensor::from(std::move(out), {a.size() + b.size()});
    if (recording(tape, {&a, &b})) {
        const int an = a.node(), bn = b.node();
        const std::int64_t na = a.size(), nb = b.size();
        int node = tape->record({an, bn}, na + nb, [an, bn, na, nb](Tape& t, std::span<const double> g) {
            if (an >= 0) {
                auto& ga = t.adjoint(an);
                for (std::int64_t i = 0; i < na; ++i) {
                    ga[static_cast<std::size_t>(i)] += g[static_cast<std::size_t>(i)];
                }
            }
            if (bn >= 0) {
                auto& gb = t.adjoint(bn);
                for (std::int64_t i = 0; i < nb; ++i) {
                    gb[static_cast<std::size_t>(i)] += g[static_cast<std::size_t>(na + i)];
                }
            }
        });
        result = result.with_node(node, tape->id());
    }
    return result;
}

Tensor mean_of(Tape* tape, const std::vector<Tensor>& xs) {
    if (xs.empty()) {
        throw ProtocolError("mean_of: empty input list");
    }
    for (const Tensor& x : xs) {
        require_same_shape(xs.front(), x, "mean_of");
        if (x.rank() != 1) {
            throw DimensionError("mean_of expects rank-1 tensors");
        }
    }
    const std::size_t n = static_cast<std::size_t>(xs.front().size());
    const double inv = 1.0 / static_cast<double>(xs.size());
    std::vector<double> out(n, 0.0);
    for (const Tensor& x : xs) {
        auto xv = x.values();
        for (std::size_t i = 0; i < n; ++i) {
            out[i] += xv[i];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        out[i] *= inv;
    }
    check_finite(out, "mean_of");
    Tensor result = Tensor::from(std::move(out), xs.front().shape());

    bool any = false;
    std::vector<int> in_nodes;
    in_nodes.reserve(xs.size());
    for (const Tensor& x : xs) {
        if (tape) tape->check_owned(x);
        in_nodes.push_back(x.node());
        any = any || x.node() >= 0;
    }
    if (tape && any) {
        int node = tape->record(in_nodes, static_cast<std::int64_t>(n),
                                [in_nodes, inv](Tape& t, std::span<const double> g) {
                                    for (int target : in_nodes) {
                                        if (target < 0) continue;
                                        auto& gt = t.adjoint(target);
                                        for (std::size_t i = 0; i < g.size(); ++i) {
                                            gt[i] += inv * g[i];
                                        }
                                    }
                                });
        result = result.with_node(node, tape->id());
    }
    return result;
}

Tensor row(Tape* tape, const Tensor& m, std::int64_t i) {
    if (m.rank() != 2) {
        throw DimensionError("row expects a rank-2 tensor");
    }
    if (i < 0 || i >= m.dim(0)) {
        throw IndexError("row index out of range");
    }
    const std::int64_t cols = m.dim(1);
    auto mv = m.values();
    std::vector<double> out(mv.begin() + static_cast<std::ptrdiff_t>(i * cols),
                            mv.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols));
    Tensor result = Tensor::from(std::move(out), {cols});
    if (recording(tape, {&m})) {
        const int mn = m.node();
        int node = tape->record({mn}, cols, [mn, i, cols](Tape& t, std::span<const double> g) {
            auto& gm = t.adjoint(mn);
            for (std::int64_t j = 0; j < cols; ++j) {
                gm[static_cast<std::size_t>(i * cols + j)] += g[static_cast<std::size_t>(j)];
            }
        });
        result = result.with_node(node, tape->id());
    }
    return result;
}

Tensor gather_rows(Tape* tape, const Tensor& table, std::span<const int> ids) {
    if (table.rank() != 2) {
        throw DimensionError("gather_rows expects a rank-2 table");
    }
    if (ids.empty()) {
        throw ProtocolError("gather_rows: empty id list");
    }
    const std::int64_t rows = table.dim(0), cols = table.dim(1);
    for (int id : ids) {
        if (id < 0 || id >= rows) {
            std::ostringstream os;
            os << "token id " << id << " has no embedding row (table has " << rows << ")";
            throw VocabError(os.str());
        }
    }
    auto tv = table.values();
    std::vector<double> out;
    out.reserve(ids.size() * static_cast<std::size_t>(cols));
    for (int id : ids) {
        const double* src = &tv[static_cast<std::size_t>(id) * static_cast<std::size_t>(cols)];
        out.insert(out.end(), src, src + cols);
    }
    Tensor result = Tensor::from(std::move(out), {static_cast<std::int64_t>(ids.size()), cols});
    if (recording(tape, {&table})) {
        const int tn = table.node();
        std::vector<int> ids_copy(ids.begin(), ids.end());
        int node = tape->record({tn}, result.size(),
                                [tn, ids_copy, cols](Tape& t, std::span<const double> g) {
                                    auto& gt = t.adjoint(tn);
                                    for (std::size_t r = 0; r < ids_copy.size(); ++r) {
                                        double* dst = &gt[static_cast<std::size_t>(ids_copy[r]) * static_cast<std::size_t>(cols)];
                                        const double* src = &g[r * static_cast<std::size_t>(cols)];
                                        for (std::int64_t j = 0; j < cols; ++j) {
                                            dst[j] += src[j];
                                        }
                                    }
                                });
        result = result.with_node(node, tape->id());
    }
    return result;
}

SoftmaxLoss softmax_cross_entropy(Tape* tape, const Tensor& logits, int label) {
    if (logits.rank() != 1 || logits.size() < 2) {
        throw DimensionError("softmax_cross_entropy expects rank-1 logits with >= 2 classes");
    }
    if (label < 0 || label >= logits.size()) {
        std::ostringstream os;
        os << "label " << label << " out of range for " << logits.size() << " classes";
        throw IndexError(os.str());
    }
    auto lv = logits.values();
    double mx = lv[0];
    for (double v : lv) {
        mx = std::max(mx, v);
    }
    std::vector<double> p(lv.size());
    double z = 0.0;
    for (std::size_t i = 0; i < lv.size(); ++i) {
        p[i] = std::exp(lv[i] - mx);
        z += p[i];
    }
    for (double& v : p) {
        v /= z;
    }
    // log-sum-exp form keeps the loss exact even when probs[label] underflows
    double loss_val = std::log(z) + mx - lv[static_cast<std::size_t>(label)];
    if (!std::isfinite(loss_val)) {
        throw NumericError("non-finite value produced by softmax_cross_entropy");
    }
    check_finite(p, "softmax_cross_entropy");

    SoftmaxLoss out;
    out.probs = Tensor::from(std::vector<double>(p), logits.shape());
    out.loss = Tensor::scalar(loss_val);
    if (recording(tape, {&logits})) {
        const int ln = logits.node();
        std::vector<double> probs_copy = std::move(p);
        int node = tape->record({ln}, 1, [ln, probs_copy, label](Tape& t, std::span<const double> g) {
            auto& gl = t.adjoint(ln);
            for (std::size_t i = 0; i < probs_copy.size(); ++i) {
                double onehot = (static_cast<int>(i) == label) ? 1.0 : 0.0;
                gl[i] += (probs_copy[i] - onehot) * g[0];
            }
        });
        out.loss = out.loss.with_node(node, tape->id());
    }
    return out;
}

Tensor dropout_mask(Rng& rng, std::vector<std::int64_t> shape, double keep_prob) {
    if (!(keep_prob > 0.0) || keep_prob > 1.0) {
        std::ostringstream os;
        os << "keep_prob must be in (0, 1], got " << keep_prob;
        throw ConfigError(os.str());
    }
    if (keep_prob == 1.0) {
        return Tensor::full(std::move(shape), 1.0);
    }
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
        n *= d;
    }
    const double inv_keep = 1.0 / keep_prob;
    std::vector<double> out(static_cast<std::size_t>(n));
    for (double& v : out) {
        v = rng.uniform01() < keep_prob ? inv_keep : 0.0;
    }
    return Tensor::from(std::move(out), std::move(shape));
}

}  // namespace lstmkit
