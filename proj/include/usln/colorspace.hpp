#pragma once

#include <array>

#include "usln/tape.hpp"

namespace usln {

// Differentiable conversions between color spaces, as [3,H,W] tape ops.
// Channel conventions:
//   RGB  — all channels in [0,1], sRGB-encoded values as stored in files.
//   HSI  — H in [0,1) (angle over 2*pi), S in [0,1], I in [0,1].
//   Lab  — normalized: L/100, a/110, b/110.
//
// rgb_to_hsi clamps its input to [eps,1] first; achromatic pixels get H = 0
// with zero gradient into H. hsi_to_rgb and lab_to_rgb clamp out-of-range
// inputs/outputs with pass-through gradients inside the valid range, so the
// round trips are exact on valid pixels.

Tensor rgb_to_hsi(Tape& tape, const Tensor& rgb);
Tensor hsi_to_rgb(Tape& tape, const Tensor& hsi);
Tensor rgb_to_lab(Tape& tape, const Tensor& rgb);
Tensor lab_to_rgb(Tape& tape, const Tensor& lab);

// Plain per-pixel converters for metrics and tools (no tape, no clamping of
// the Lab magnitudes). Lab here is unnormalized: L in [0,100].
std::array<double, 3> srgb_pixel_to_lab(double r, double g, double b);

}  // namespace usln
