#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace usln {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

// Raised on shape/structure violations (mismatched operands, bad ranks, ...).
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Shape {
    int channels = 0;
    int height = 0;
    int width = 0;

    std::int64_t plane() const { return static_cast<std::int64_t>(height) * width; }
    std::int64_t numel() const { return static_cast<std::int64_t>(channels) * plane(); }
    bool operator==(const Shape&) const = default;
};

// A rank-3 (channels x height x width) array of doubles, row-major. Data is
// immutable once the tensor is built and shared between copies; a tensor may
// carry the id of the tape node that produced it.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape) { return full(shape, 0.0); }

    static Tensor full(Shape shape, double value) {
        check(shape);
        return Tensor(shape, std::vector<double>(static_cast<std::size_t>(shape.numel()), value));
    }

    static Tensor from_vector(Shape shape, std::vector<double> values) {
        check(shape);
        if (static_cast<std::int64_t>(values.size()) != shape.numel())
            throw ShapeError("tensor data length does not match shape");
        return Tensor(shape, std::move(values));
    }

    bool empty() const { return data_ == nullptr; }
    Shape shape() const { return shape_; }
    std::int64_t numel() const { return shape_.numel(); }

    double at(int c, int y, int x) const {
        return (*data_)[static_cast<std::size_t>((static_cast<std::int64_t>(c) * shape_.height + y) * shape_.width + x)];
    }

    std::span<const double> values() const {
        return data_ ? std::span<const double>(data_->data(), data_->size()) : std::span<const double>();
    }
    const double* data() const { return data_ ? data_->data() : nullptr; }
    const double* plane(int c) const { return data() + static_cast<std::size_t>(c) * shape_.plane(); }

    bool on_tape() const { return node_ != kNoNode; }
    NodeId node() const { return node_; }

    // Same data, no tape association.
    Tensor detached() const {
        Tensor t = *this;
        t.node_ = kNoNode;
        return t;
    }

    bool all_finite() const;

private:
    friend class Tape;

    Tensor(Shape shape, std::vector<double> values)
        : shape_(shape), data_(std::make_shared<const std::vector<double>>(std::move(values))) {}

    static void check(Shape s) {
        if (s.channels <= 0 || s.height <= 0 || s.width <= 0)
            throw ShapeError("tensor dimensions must be positive");
    }

    Shape shape_{};
    std::shared_ptr<const std::vector<double>> data_;
    NodeId node_ = kNoNode;
};

}  // namespace usln
