#include "usln/tape.hpp"

#include <cmath>
#include <utility>

namespace usln {

bool Tensor::all_finite() const {
    if (!data_) return true;
    for (double v : *data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor Tape::leaf(const Tensor& values, bool requires_grad) {
    if (values.empty()) throw ShapeError("cannot register an empty tensor as a leaf");
    Node node;
    node.shape = values.shape();
    node.needs_grad = requires_grad;
    node.is_leaf = true;
    const NodeId id = static_cast<NodeId>(nodes_.size());
    nodes_.push_back(std::move(node));

    Tensor bound = values;
    bound.node_ = id;
    return bound;
}

Tensor Tape::emit(Shape shape, std::vector<double> values, std::vector<NodeId> inputs,
                  BackwardFn backward) {
    Node node;
    node.shape = shape;
    for (NodeId in : inputs) {
        if (in >= nodes_.size()) throw std::out_of_range("tape input id out of range");
        node.needs_grad = node.needs_grad || nodes_[in].needs_grad;
    }
    node.inputs = std::move(inputs);
    if (node.needs_grad) node.backward = std::move(backward);
    const NodeId id = static_cast<NodeId>(nodes_.size());
    nodes_.push_back(std::move(node));

    Tensor out = Tensor(shape, std::move(values));
    out.node_ = id;
    return out;
}

Gradients Tape::backward(const Tensor& loss) const {
    if (!loss.on_tape() || loss.node() >= nodes_.size())
        throw std::invalid_argument("loss tensor is not on this tape");
    if (loss.shape().numel() != 1) throw ShapeError("backward requires a scalar loss");

    const NodeId root = loss.node();
    // Per-node gradient buffers, allocated on demand and released as soon as
    // a node has been processed so peak memory tracks the live frontier.
    std::vector<std::vector<double>> grads(nodes_.size());
    std::vector<bool> engaged(nodes_.size(), false);
    grads[root] = {1.0};
    engaged[root] = true;

    Gradients result;
    result.slots_.resize(nodes_.size());

    for (NodeId id = root + 1; id-- > 0;) {
        if (!engaged[id] || !nodes_[id].needs_grad) continue;
        const Node& node = nodes_[id];
        if (node.is_leaf) {
            result.slots_[id] = Tensor(node.shape, std::move(grads[id]));
            continue;
        }
        if (node.backward) {
            std::vector<double*> input_grads(node.inputs.size(), nullptr);
            for (std::size_t k = 0; k < node.inputs.size(); ++k) {
                const NodeId in = node.inputs[k];
                if (!nodes_[in].needs_grad) continue;
                if (!engaged[in]) {
                    grads[in].assign(static_cast<std::size_t>(nodes_[in].shape.numel()), 0.0);
                    engaged[in] = true;
                }
                input_grads[k] = grads[in].data();
            }
            node.backward(grads[id].data(), input_grads);
        }
        grads[id].clear();
        grads[id].shrink_to_fit();
    }
    return result;
}

}  // namespace usln
