#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lstmkit/error.hpp"

namespace lstmkit {

class Tape;

// Dense rank-1/2/3 tensor of 64-bit floats. Immutable once built; copies share
// the underlying buffer. An optional node handle ties the value into the tape
// that produced it.
class Tensor {
public:
    Tensor() = default;

    static Tensor from(std::vector<double> data, std::vector<std::int64_t> shape);
    static Tensor zeros(std::vector<std::int64_t> shape);
    static Tensor full(std::vector<std::int64_t> shape, double value);
    static Tensor scalar(double value) { return from({value}, {1}); }
    static Tensor row_vector(std::vector<double> data);

    const std::vector<std::int64_t>& shape() const { return shape_; }
    std::int64_t size() const { return size_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }

    std::span<const double> values() const;
    double operator[](std::int64_t i) const { return (*data_)[static_cast<std::size_t>(i)]; }
    // Row-major access for rank-2 tensors.
    double at(std::int64_t r, std::int64_t c) const { return (*data_)[static_cast<std::size_t>(r * shape_[1] + c)]; }

    bool defined() const { return data_ != nullptr; }

    // Tape linkage. node < 0 means not recorded.
    int node() const { return node_; }
    std::uint64_t tape_id() const { return tape_id_; }
    Tensor with_node(int node, std::uint64_t tape_id) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;

private:
    std::vector<std::int64_t> shape_;
    std::int64_t size_ = 0;
    std::shared_ptr<const std::vector<double>> data_;
    int node_ = -1;
    std::uint64_t tape_id_ = 0;
};

// Records the operations of one forward pass so gradients can be propagated in
// exact reverse recording order. Topological order holds by construction: a
// node's inputs must already exist when it is recorded. One forward/backward
// pass owns one tape; tapes are not shared across threads or reused across
// passes.
class Tape {
public:
    // Receives the tape so the rule can read its own adjoint and accumulate
    // into its inputs' adjoints.
    using BackwardFn = std::function<void(Tape&, std::span<const double> out_adjoint)>;

    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::uint64_t id() const { return id_; }
    int size() const { return static_cast<int>(nodes_.size()); }

    // Registers a leaf so downstream ops record gradients for it; the backward
    // rule is a no-op. Returns the same value wired to this tape.
    Tensor watch(const Tensor& t);

    // Records an op node. Input ids < 0 (constants) are dropped from the
    // structural input list. Returns the new node id.
    int record(std::vector<int> inputs, std::int64_t out_size, BackwardFn fn);

    // Propagates from a scalar root; seeds its adjoint with 1 and walks every
    // node in exact reverse recording order. Returns the number of nodes
    // visited (always the full tape).
    int backward(const Tensor& root);

    // Adjoint accumulator for a node, allocated to zeros on first touch.
    std::vector<double>& adjoint(int node);
    // Read-only view; empty when no gradient reached the node.
    std::span<const double> adjoint_view(int node) const;

    const std::vector<int>& node_inputs(int node) const;

    // Verifies a tensor was produced by this tape before its node id is used.
    void check_owned(const Tensor& t) const;

private:
    struct Node {
        std::vector<int> inputs;
        std::int64_t out_size;
        BackwardFn fn;
    };

    std::uint64_t id_;
    std::vector<Node> nodes_;
    std::vector<std::vector<double>> adjoints_;
};

}  // namespace lstmkit
