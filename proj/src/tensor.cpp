#include "lstmkit/tensor.hpp"

#include <atomic>
#include <sstream>
#include <utility>

namespace lstmkit {

namespace {

std::int64_t shape_product(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
        n *= d;
    }
    return n;
}

std::atomic<std::uint64_t> g_next_tape_id{1};

}  // namespace

Tensor Tensor::from(std::vector<double> data, std::vector<std::int64_t> shape) {
    if (shape.empty() || shape.size() > 3) {
        throw DimensionError("tensor rank must be 1, 2 or 3");
    }
    for (std::int64_t d : shape) {
        if (d < 1) {
            throw DimensionError("tensor dimensions must be positive");
        }
    }
    Tensor t;
    t.size_ = shape_product(shape);
    if (static_cast<std::int64_t>(data.size()) != t.size_) {
        std::ostringstream os;
        os << "tensor data length " << data.size() << " does not match shape product " << t.size_;
        throw DimensionError(os.str());
    }
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<const std::vector<double>>(std::move(data));
    return t;
}

Tensor Tensor::zeros(std::vector<std::int64_t> shape) {
    std::int64_t n = shape_product(shape);
    return from(std::vector<double>(static_cast<std::size_t>(n), 0.0), std::move(shape));
}

Tensor Tensor::full(std::vector<std::int64_t> shape, double value) {
    std::int64_t n = shape_product(shape);
    return from(std::vector<double>(static_cast<std::size_t>(n), value), std::move(shape));
}

Tensor Tensor::row_vector(std::vector<double> data) {
    std::int64_t n = static_cast<std::int64_t>(data.size());
    return from(std::move(data), {n});
}

std::span<const double> Tensor::values() const {
    if (!data_) {
        return {};
    }
    return {data_->data(), data_->size()};
}

Tensor Tensor::with_node(int node, std::uint64_t tape_id) const {
    Tensor t = *this;
    t.node_ = node;
    t.tape_id_ = tape_id;
    return t;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << "x";
        os << shape_[i];
    }
    os << "]";
    return os.str();
}

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) {}

Tensor Tape::watch(const Tensor& t) {
    int node = record({}, t.size(), [](Tape&, std::span<const double>) {});
    return t.with_node(node, id_);
}

int Tape::record(std::vector<int> inputs, std::int64_t out_size, BackwardFn fn) {
    std::vector<int> kept;
    kept.reserve(inputs.size());
    for (int in : inputs) {
        if (in >= 0) {
            if (in >= static_cast<int>(nodes_.size())) {
                throw Error("tape input node recorded out of order");
            }
            kept.push_back(in);
        }
    }
    nodes_.push_back(Node{std::move(kept), out_size, std::move(fn)});
    adjoints_.emplace_back();
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::backward(const Tensor& root) {
    check_owned(root);
    if (root.node() < 0) {
        throw Error("backward root is not recorded on the tape");
    }
    if (root.size() != 1) {
        throw Error("backward root must be a scalar");
    }
    adjoint(root.node()) = {1.0};
    int visited = 0;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
        ++visited;
        auto& adj = adjoints_[static_cast<std::size_t>(i)];
        if (adj.empty()) {
            continue;  // no gradient reached this node; contribution is zero
        }
        nodes_[static_cast<std::size_t>(i)].fn(*this, adj);
    }
    return visited;
}

std::vector<double>& Tape::adjoint(int node) {
    auto& adj = adjoints_.at(static_cast<std::size_t>(node));
    if (adj.empty()) {
        adj.assign(static_cast<std::size_t>(nodes_[static_cast<std::size_t>(node)].out_size), 0.0);
    }
    return adj;
}

std::span<const double> Tape::adjoint_view(int node) const {
    const auto& adj = adjoints_.at(static_cast<std::size_t>(node));
    return {adj.data(), adj.size()};
}

const std::vector<int>& Tape::node_inputs(int node) const {
    return nodes_.at(static_cast<std::size_t>(node)).inputs;
}

void Tape::check_owned(const Tensor& t) const {
    if (t.node() >= 0 && t.tape_id() != id_) {
        throw Error("tensor belongs to a different tape; tapes are per-pass");
    }
}

}  // namespace lstmkit
