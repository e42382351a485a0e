#pragma once

#include <functional>
#include <vector>

#include "usln/tensor.hpp"

namespace usln {

// Gradients produced by one backward pass, keyed by tape node id. Only
// requires_grad leaves are retained.
class Gradients {
public:
    bool contains(NodeId id) const {
        return id < slots_.size() && !slots_[id].empty();
    }

    const Tensor& at(NodeId id) const {
        if (!contains(id)) throw std::out_of_range("no gradient recorded for node");
        return slots_[id];
    }

    // Gradient of the loss w.r.t. a tensor that was registered as a leaf.
    const Tensor& wrt(const Tensor& t) const { return at(t.node()); }

private:
    friend class Tape;
    std::vector<Tensor> slots_;
};

// Record of one forward computation. Nodes are appended in execution order,
// so node ids are already a topological order; the backward pass walks them
// once, in reverse, with a fixed accumulation order.
class Tape {
public:
    // input_grads[i] is the gradient buffer of input i, pre-zeroed, to be
    // accumulated into; a null entry means that input needs no gradient and
    // the rule may skip the work.
    using BackwardFn =
        std::function<void(const double* upstream, const std::vector<double*>& input_grads)>;

    // Registers `values` as a leaf node and returns the tape-bound tensor.
    Tensor leaf(const Tensor& values, bool requires_grad);

    // Emits an op node. `backward` may be empty when no input needs gradients.
    Tensor emit(Shape shape, std::vector<double> values, std::vector<NodeId> inputs,
                BackwardFn backward);

    bool needs_grad(NodeId id) const { return nodes_[id].needs_grad; }
    bool needs_grad(const Tensor& t) const { return t.on_tape() && needs_grad(t.node()); }
    std::size_t size() const { return nodes_.size(); }

    // Reverse-mode sweep from a scalar (1x1x1) loss node.
    Gradients backward(const Tensor& loss) const;

private:
    struct Node {
        Shape shape;
        std::vector<NodeId> inputs;
        BackwardFn backward;
        bool needs_grad = false;
        bool is_leaf = false;
    };

    std::vector<Node> nodes_;
};

}  // namespace usln
