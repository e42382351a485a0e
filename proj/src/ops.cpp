#include "usln/ops.hpp"

#include <algorithm>
#include <cmath>

#include "usln/kernels.hpp"

namespace usln {
namespace {

namespace ker = kernels;

std::size_t idx(Shape s, int c, int y, int x) {
    return static_cast<std::size_t>((static_cast<std::int64_t>(c) * s.height + y) * s.width + x);
}

void require(bool ok, const char* message) {
    if (!ok) throw ShapeError(message);
}

}  // namespace

Tensor pointwise_conv(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias) {
    const Shape in_shape = input.shape();
    const int c = in_shape.channels;
    require(c == 2 || c == 3, "pointwise_conv supports 2 or 3 channels");
    require(weight.shape() == Shape{1, c, c}, "pointwise_conv weight must be CxC");
    require(bias.shape() == Shape{c, 1, 1}, "pointwise_conv bias must have length C");

    const std::size_t plane = static_cast<std::size_t>(in_shape.plane());
    const auto& k = ker::active();

    std::vector<double> out(static_cast<std::size_t>(in_shape.numel()));
    for (int oc = 0; oc < c; ++oc) {
        double* dst = out.data() + oc * plane;
        std::fill(dst, dst + plane, bias.at(oc, 0, 0));
        for (int ic = 0; ic < c; ++ic) k.axpy(weight.at(0, oc, ic), input.plane(ic), dst, plane);
    }

    auto backward = [input, weight, c, plane, &k](const double* up,
                                                  const std::vector<double*>& gin) {
        double* g_input = gin[0];
        double* g_weight = gin[1];
        double* g_bias = gin[2];
        for (int oc = 0; oc < c; ++oc) {
            const double* up_plane = up + oc * plane;
            if (g_bias != nullptr) g_bias[oc] += k.sum(up_plane, plane);
            for (int ic = 0; ic < c; ++ic) {
                if (g_input != nullptr)
                    k.axpy(weight.at(0, oc, ic), up_plane, g_input + ic * plane, plane);
                if (g_weight != nullptr)
                    g_weight[oc * c + ic] += k.dot(up_plane, input.plane(ic), plane);
            }
        }
    };
    return tape.emit(in_shape, std::move(out), {input.node(), weight.node(), bias.node()},
                     std::move(backward));
}

Tensor conv3x3(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias) {
    const Shape in_shape = input.shape();
    require(in_shape.channels == 3, "conv3x3 requires 3 input channels");
    require(weight.shape() == Shape{3, 3, 9}, "conv3x3 weight must be 3x3x3x3");
    require(bias.shape() == Shape{3, 1, 1}, "conv3x3 bias must have length 3");

    const int h = in_shape.height;
    const int w = in_shape.width;
    const std::size_t plane = static_cast<std::size_t>(in_shape.plane());
    const auto& k = ker::active();

    std::vector<double> out(static_cast<std::size_t>(in_shape.numel()));
    for (int oc = 0; oc < 3; ++oc) {
        double* dst = out.data() + oc * plane;
        std::fill(dst, dst + plane, bias.at(oc, 0, 0));
        for (int ic = 0; ic < 3; ++ic) {
            const double* src = input.plane(ic);
            for (int tap = 0; tap < 9; ++tap) {
                const double wv = weight.at(oc, ic, tap);
                if (wv == 0.0) continue;
                const int dy = tap / 3 - 1;
                const int dx = tap % 3 - 1;
                const int x0 = std::max(0, -dx);
                const int x1 = std::min(w, w - dx);
                if (x0 >= x1) continue;
                for (int y = std::max(0, -dy); y < std::min(h, h - dy); ++y) {
                    k.axpy(wv, src + static_cast<std::size_t>(y + dy) * w + (x0 + dx),
                           dst + static_cast<std::size_t>(y) * w + x0,
                           static_cast<std::size_t>(x1 - x0));
                }
            }
        }
    }

    auto backward = [input, weight, h, w, plane, &k](const double* up,
                                                     const std::vector<double*>& gin) {
        double* g_input = gin[0];
        double* g_weight = gin[1];
        double* g_bias = gin[2];
        for (int oc = 0; oc < 3; ++oc) {
            const double* up_plane = up + oc * plane;
            if (g_bias != nullptr) g_bias[oc] += k.sum(up_plane, plane);
            for (int ic = 0; ic < 3; ++ic) {
                for (int tap = 0; tap < 9; ++tap) {
                    const int dy = tap / 3 - 1;
                    const int dx = tap % 3 - 1;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(w, w - dx);
                    if (x0 >= x1) continue;
                    const int y0 = std::max(0, -dy);
                    const int y1 = std::min(h, h - dy);
                    if (g_weight != nullptr) {
                        double acc = 0.0;
                        for (int y = y0; y < y1; ++y) {
                            acc += k.dot(up_plane + static_cast<std::size_t>(y) * w + x0,
                                         input.plane(ic) + static_cast<std::size_t>(y + dy) * w +
                                             (x0 + dx),
                                         static_cast<std::size_t>(x1 - x0));
                        }
                        g_weight[(oc * 3 + ic) * 9 + tap] += acc;
                    }
                    if (g_input != nullptr) {
                        const double wv = weight.at(oc, ic, tap);
                        if (wv == 0.0) continue;
                        double* gsrc = g_input + ic * plane;
                        for (int y = y0; y < y1; ++y) {
                            k.axpy(wv, up_plane + static_cast<std::size_t>(y) * w + x0,
                                   gsrc + static_cast<std::size_t>(y + dy) * w + (x0 + dx),
                                   static_cast<std::size_t>(x1 - x0));
                        }
                    }
                }
            }
        }
    };
    return tape.emit(in_shape, std::move(out), {input.node(), weight.node(), bias.node()},
                     std::move(backward));
}

ChannelStat global_stat(Tape& tape, const Tensor& input, StatKind kind) {
    const Shape in_shape = input.shape();
    require(in_shape.plane() >= 1, "global_stat needs at least one pixel");
    const int c = in_shape.channels;
    const std::size_t plane = static_cast<std::size_t>(in_shape.plane());

    std::vector<double> values(static_cast<std::size_t>(c));
    std::vector<std::int64_t> args;
    if (kind != StatKind::kAverage) args.resize(static_cast<std::size_t>(c));

    for (int ch = 0; ch < c; ++ch) {
        const double* src = input.plane(ch);
        switch (kind) {
            case StatKind::kAverage:
                values[ch] = ker::active().sum(src, plane) / static_cast<double>(plane);
                break;
            case StatKind::kMaximum: {
                const std::size_t a = ker::argmax(src, plane);
                args[ch] = static_cast<std::int64_t>(a);
                values[ch] = src[a];
                break;
            }
            case StatKind::kMinimum: {
                const std::size_t a = ker::argmin(src, plane);
                args[ch] = static_cast<std::int64_t>(a);
                values[ch] = src[a];
                break;
            }
        }
    }

    Tape::BackwardFn backward;
    if (kind == StatKind::kAverage) {
        backward = [c, plane](const double* up, const std::vector<double*>& gin) {
            if (gin[0] == nullptr) return;
            const double inv = 1.0 / static_cast<double>(plane);
            for (int ch = 0; ch < c; ++ch) {
                double* g = gin[0] + ch * plane;
                const double v = up[ch] * inv;
                for (std::size_t i = 0; i < plane; ++i) g[i] += v;
            }
        };
    } else {
        backward = [c, plane, args](const double* up, const std::vector<double*>& gin) {
            if (gin[0] == nullptr) return;
            for (int ch = 0; ch < c; ++ch)
                gin[0][ch * plane + static_cast<std::size_t>(args[ch])] += up[ch];
        };
    }

    ChannelStat stat;
    stat.values = tape.emit(Shape{c, 1, 1}, std::move(values), {input.node()}, std::move(backward));
    stat.kind = kind;
    stat.arg_index = std::move(args);
    return stat;
}

namespace {

enum class EwKind { kAdd, kMul };

Tensor elementwise(Tape& tape, const Tensor& a, const Tensor& b, EwKind op) {
    const Shape sa = a.shape();
    const Shape sb = b.shape();
    const bool broadcast = sb == Shape{sa.channels, 1, 1} && !(sa == sb);
    require(sa == sb || broadcast, "elementwise operands have incompatible shapes");

    const std::size_t plane = static_cast<std::size_t>(sa.plane());
    const std::size_t n = static_cast<std::size_t>(sa.numel());
    const auto& k = ker::active();

    std::vector<double> out(n);
    if (!broadcast) {
        if (op == EwKind::kAdd)
            k.add(a.data(), b.data(), out.data(), n);
        else
            k.mul(a.data(), b.data(), out.data(), n);
    } else {
        for (int ch = 0; ch < sa.channels; ++ch) {
            const double bv = b.at(ch, 0, 0);
            double* dst = out.data() + ch * plane;
            if (op == EwKind::kAdd) {
                const double* src = a.plane(ch);
                for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] + bv;
            } else {
                k.scale(a.plane(ch), bv, dst, plane);
            }
        }
    }

    auto backward = [a, b, sa, broadcast, plane, n, op, &k](const double* up,
                                                            const std::vector<double*>& gin) {
        double* ga = gin[0];
        double* gb = gin[1];
        if (op == EwKind::kAdd) {
            if (ga != nullptr)
                for (std::size_t i = 0; i < n; ++i) ga[i] += up[i];
            if (gb != nullptr) {
                if (!broadcast)
                    for (std::size_t i = 0; i < n; ++i) gb[i] += up[i];
                else
                    for (int ch = 0; ch < sa.channels; ++ch)
                        gb[ch] += k.sum(up + ch * plane, plane);
            }
        } else {
            if (!broadcast) {
                if (ga != nullptr)
                    for (std::size_t i = 0; i < n; ++i) ga[i] += up[i] * b.data()[i];
                if (gb != nullptr)
                    for (std::size_t i = 0; i < n; ++i) gb[i] += up[i] * a.data()[i];
            } else {
                for (int ch = 0; ch < sa.channels; ++ch) {
                    if (ga != nullptr) k.axpy(b.at(ch, 0, 0), up + ch * plane, ga + ch * plane, plane);
                    if (gb != nullptr) gb[ch] += k.dot(up + ch * plane, a.plane(ch), plane);
                }
            }
        }
    };
    return tape.emit(sa, std::move(out), {a.node(), b.node()}, std::move(backward));
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    return elementwise(tape, a, b, EwKind::kAdd);
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    return elementwise(tape, a, b, EwKind::kMul);
}

Tensor tanh_act(Tape& tape, const Tensor& input) {
    const std::size_t n = static_cast<std::size_t>(input.numel());
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(input.data()[i]);

    // The derivative reuses the forward output: d tanh = 1 - tanh^2.
    std::vector<double> saved = out;
    auto backward = [saved = std::move(saved), n](const double* up,
                                                  const std::vector<double*>& gin) {
        if (gin[0] == nullptr) return;
        for (std::size_t i = 0; i < n; ++i) gin[0][i] += up[i] * (1.0 - saved[i] * saved[i]);
    };
    return tape.emit(input.shape(), std::move(out), {input.node()}, std::move(backward));
}

Tensor reciprocal_shift(Tape& tape, const Tensor& input, double shift) {
    const std::size_t n = static_cast<std::size_t>(input.numel());
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / (input.data()[i] + shift);

    std::vector<double> saved = out;
    auto backward = [saved = std::move(saved), n](const double* up,
                                                  const std::vector<double*>& gin) {
        if (gin[0] == nullptr) return;
        for (std::size_t i = 0; i < n; ++i) gin[0][i] -= up[i] * saved[i] * saved[i];
    };
    return tape.emit(input.shape(), std::move(out), {input.node()}, std::move(backward));
}

Tensor clamp01(Tape& tape, const Tensor& input) {
    const std::size_t n = static_cast<std::size_t>(input.numel());
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::clamp(input.data()[i], 0.0, 1.0);

    auto backward = [input, n](const double* up, const std::vector<double*>& gin) {
        if (gin[0] == nullptr) return;
        const double* src = input.data();
        for (std::size_t i = 0; i < n; ++i)
            if (src[i] >= 0.0 && src[i] <= 1.0) gin[0][i] += up[i];
    };
    return tape.emit(input.shape(), std::move(out), {input.node()}, std::move(backward));
}

Tensor stretch_channels(Tape& tape, const Tensor& input, double eps) {
    const Shape shape = input.shape();
    const int c = shape.channels;
    const std::size_t plane = static_cast<std::size_t>(shape.plane());

    struct ChannelCtx {
        bool degenerate;
        double min, max, inv_range;
        std::size_t argmin, argmax;
    };
    std::vector<ChannelCtx> ctx(static_cast<std::size_t>(c));
    std::vector<double> out(static_cast<std::size_t>(shape.numel()));

    for (int ch = 0; ch < c; ++ch) {
        const double* src = input.plane(ch);
        ChannelCtx& cc = ctx[ch];
        cc.argmin = kernels::argmin(src, plane);
        cc.argmax = kernels::argmax(src, plane);
        cc.min = src[cc.argmin];
        cc.max = src[cc.argmax];
        const double range = cc.max - cc.min;
        cc.degenerate = range < eps;
        cc.inv_range = cc.degenerate ? 0.0 : 1.0 / range;
        double* dst = out.data() + ch * plane;
        if (cc.degenerate) {
            std::fill(dst, dst + plane, 0.5);
        } else {
            for (std::size_t i = 0; i < plane; ++i) dst[i] = (src[i] - cc.min) * cc.inv_range;
        }
    }

    auto backward = [input, ctx, c, plane](const double* up, const std::vector<double*>& gin) {
        if (gin[0] == nullptr) return;
        const auto& k = ker::active();
        for (int ch = 0; ch < c; ++ch) {
            const ChannelCtx& cc = ctx[ch];
            if (cc.degenerate) continue;
            const double* src = input.plane(ch);
            const double* g = up + ch * plane;
            double* dst = gin[0] + ch * plane;
            // Direct term: d out_i / d x_i = 1/r.
            k.axpy(cc.inv_range, g, dst, plane);
            // Terms through the channel extrema:
            //   d out_i / d min = (x_i - max) / r^2
            //   d out_i / d max = (min - x_i) / r^2
            double dmin = 0.0;
            double dmax = 0.0;
            const double inv_r2 = cc.inv_range * cc.inv_range;
            for (std::size_t i = 0; i < plane; ++i) {
                dmin += g[i] * (src[i] - cc.max) * inv_r2;
                dmax += g[i] * (cc.min - src[i]) * inv_r2;
            }
            dst[cc.argmin] += dmin;
            dst[cc.argmax] += dmax;
        }
    };
    return tape.emit(shape, std::move(out), {input.node()}, std::move(backward));
}

Tensor scale_const(Tape& tape, const Tensor& input, double kconst) {
    const std::size_t n = static_cast<std::size_t>(input.numel());
    std::vector<double> out(n);
    ker::active().scale(input.data(), kconst, out.data(), n);

    auto backward = [kconst, n](const double* up, const std::vector<double*>& gin) {
        if (gin[0] != nullptr) ker::active().axpy(kconst, up, gin[0], n);
    };
    return tape.emit(input.shape(), std::move(out), {input.node()}, std::move(backward));
}

Tensor slice_channels(Tape& tape, const Tensor& input, int first, int count) {
    const Shape shape = input.shape();
    require(first >= 0 && count >= 1 && first + count <= shape.channels,
            "channel slice out of range");
    const std::size_t plane = static_cast<std::size_t>(shape.plane());
    const Shape out_shape{count, shape.height, shape.width};

    std::vector<double> out(static_cast<std::size_t>(out_shape.numel()));
    std::copy(input.plane(first), input.plane(first) + count * plane, out.data());

    auto backward = [first, count, plane](const double* up, const std::vector<double*>& gin) {
        if (gin[0] == nullptr) return;
        double* dst = gin[0] + first * plane;
        const std::size_t n = count * plane;
        for (std::size_t i = 0; i < n; ++i) dst[i] += up[i];
    };
    return tape.emit(out_shape, std::move(out), {input.node()}, std::move(backward));
}

Tensor concat_channels(Tape& tape, std::span<const Tensor> parts) {
    require(!parts.empty(), "concat_channels needs at least one part");
    const int h = parts[0].shape().height;
    const int w = parts[0].shape().width;
    int channels = 0;
    std::vector<NodeId> inputs;
    for (const Tensor& p : parts) {
        require(p.shape().height == h && p.shape().width == w,
                "concat_channels parts must share spatial dims");
        channels += p.shape().channels;
        inputs.push_back(p.node());
    }

    const Shape out_shape{channels, h, w};
    const std::size_t plane = static_cast<std::size_t>(out_shape.plane());
    std::vector<double> out(static_cast<std::size_t>(out_shape.numel()));
    std::vector<std::size_t> part_sizes;
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
        const std::size_t sz = static_cast<std::size_t>(p.numel());
        std::copy(p.data(), p.data() + sz, out.data() + offset);
        part_sizes.push_back(sz);
        offset += sz;
    }
    (void)plane;

    auto backward = [part_sizes](const double* up, const std::vector<double*>& gin) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < part_sizes.size(); ++p) {
            if (gin[p] != nullptr)
                for (std::size_t i = 0; i < part_sizes[p]; ++i) gin[p][i] += up[offset + i];
            offset += part_sizes[p];
        }
    };
    return tape.emit(out_shape, std::move(out), std::move(inputs), std::move(backward));
}

Tensor sum_all(Tape& tape, const Tensor& input) {
    const std::size_t n = static_cast<std::size_t>(input.numel());
    std::vector<double> out{ker::active().sum(input.data(), n)};

    auto backward = [n](const double* up, const std::vector<double*>& gin) {
        if (gin[0] == nullptr) return;
        for (std::size_t i = 0; i < n; ++i) gin[0][i] += up[0];
    };
    return tape.emit(Shape{1, 1, 1}, std::move(out), {input.node()}, std::move(backward));
}

}  // namespace usln
