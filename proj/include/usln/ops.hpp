#pragma once

#include <span>
#include <vector>

#include "usln/tape.hpp"

namespace usln {

inline constexpr double kStatEpsilon = 1e-6;

enum class StatKind { kAverage, kMaximum, kMinimum };

// Per-channel reduction of a tensor. `values` is a [C,1,1] tensor on the
// tape; for max/min, arg_index holds the flat spatial index of the first
// extremum per channel, which is also where the backward pass routes the
// gradient.
struct ChannelStat {
    Tensor values;
    StatKind kind;
    std::vector<std::int64_t> arg_index;
};

// out[c] = sum_k weight[c,k] * in[k] + bias[c], applied per pixel.
// weight is [1,C,C] (row = output channel), bias is [C,1,1]; C in {2,3}.
Tensor pointwise_conv(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias);

// 3x3 cross-correlation, stride 1, zero padding, 3 channels in and out.
// weight is [3,3,9] indexed (out, in, ky*3+kx), bias is [3,1,1].
Tensor conv3x3(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias);

ChannelStat global_stat(Tape& tape, const Tensor& input, StatKind kind);

// Elementwise add/mul. `b` is either the same shape as `a` or a per-channel
// [C,1,1] tensor broadcast over the plane.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);

Tensor tanh_act(Tape& tape, const Tensor& input);

// out = 1 / (in + shift), used for the white-balance reciprocal statistics.
Tensor reciprocal_shift(Tape& tape, const Tensor& input, double shift = kStatEpsilon);

// Clamp to [0,1]; gradient passes through inside the range, zero outside.
Tensor clamp01(Tape& tape, const Tensor& input);

// Per-channel min-max stretch: (v - min_c) / (max_c - min_c). A channel
// whose range is below `eps` becomes the constant 0.5 with zero gradient.
Tensor stretch_channels(Tape& tape, const Tensor& input, double eps = kStatEpsilon);

Tensor scale_const(Tape& tape, const Tensor& input, double k);

Tensor slice_channels(Tape& tape, const Tensor& input, int first, int count);
Tensor concat_channels(Tape& tape, std::span<const Tensor> parts);

// Scalar [1,1,1] sum of all elements.
Tensor sum_all(Tape& tape, const Tensor& input);

}  // namespace usln
