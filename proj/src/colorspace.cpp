#include "usln/colorspace.hpp"

#include <algorithm>
#include <cmath>

namespace usln {
namespace {

constexpr double kEps = 1e-6;
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPi = 3.141592653589793238462643383279;
// A pixel with a channel range below this is treated as achromatic: H = 0
// and no gradient into H.
constexpr double kAchromatic = 1e-9;

// sRGB <-> linear transfer function and its derivative.
double srgb_decode(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}
double srgb_decode_deriv(double c) {
    return c <= 0.04045 ? 1.0 / 12.92 : (2.4 / 1.055) * std::pow((c + 0.055) / 1.055, 1.4);
}
double srgb_encode(double u) {
    return u <= 0.0031308 ? 12.92 * u : 1.055 * std::pow(u, 1.0 / 2.4) - 0.055;
}
double srgb_encode_deriv(double u) {
    return u <= 0.0031308 ? 12.92 : (1.055 / 2.4) * std::pow(u, 1.0 / 2.4 - 1.0);
}

// sRGB D65 primaries.
constexpr double kM[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                             {0.2126729, 0.7151522, 0.0721750},
                             {0.0193339, 0.1191920, 0.9503041}};
constexpr double kMInv[3][3] = {{3.2404542, -1.5371385, -0.4985314},
                                {-0.9692660, 1.8760108, 0.0415560},
                                {0.0556434, -0.2040259, 1.0572252}};
constexpr double kWhite[3] = {0.95047, 1.0, 1.08883};

// CIE f(t) with the cube-root / linear split at delta = 6/29.
constexpr double kDelta = 6.0 / 29.0;
constexpr double kDelta2 = kDelta * kDelta;
constexpr double kDelta3 = kDelta * kDelta * kDelta;

double lab_f(double t) { return t > kDelta3 ? std::cbrt(t) : t / (3.0 * kDelta2) + 4.0 / 29.0; }
double lab_f_deriv(double t) {
    if (t > kDelta3) {
        const double r = std::cbrt(t);
        return 1.0 / (3.0 * r * r);
    }
    return 1.0 / (3.0 * kDelta2);
}
double lab_f_inv(double t) { return t > kDelta ? t * t * t : 3.0 * kDelta2 * (t - 4.0 / 29.0); }
double lab_f_inv_deriv(double t) { return t > kDelta ? 3.0 * t * t : 3.0 * kDelta2; }

void require_rgb_shape(const Tensor& t, const char* what) {
    if (t.shape().channels != 3) throw ShapeError(what);
}

}  // namespace

Tensor rgb_to_hsi(Tape& tape, const Tensor& rgb) {
    require_rgb_shape(rgb, "rgb_to_hsi expects a 3-channel tensor");
    const Shape shape = rgb.shape();
    const std::size_t plane = static_cast<std::size_t>(shape.plane());
    const double* in = rgb.data();

    std::vector<double> out(static_cast<std::size_t>(shape.numel()));
    for (std::size_t p = 0; p < plane; ++p) {
        const double r = std::clamp(in[p], kEps, 1.0);
        const double g = std::clamp(in[plane + p], kEps, 1.0);
        const double b = std::clamp(in[2 * plane + p], kEps, 1.0);
        const double sum = r + g + b;
        const double m = std::min({r, g, b});
        const double i = sum / 3.0;
        const double s = 1.0 - 3.0 * m / (sum + kEps);

        double h = 0.0;
        const double range = std::max({r, g, b}) - m;
        if (range >= kAchromatic) {
            const double u = 0.5 * ((r - g) + (r - b));
            const double w = (r - g) * (r - g) + (r - b) * (g - b);
            const double v = std::sqrt(w);
            const double q = std::clamp(u / v, -1.0 + kEps, 1.0 - kEps);
            const double theta = std::acos(q) / kTwoPi;
            h = b <= g ? theta : 1.0 - theta;
        }
        out[p] = h;
        out[plane + p] = s;
        out[2 * plane + p] = i;
    }

    auto backward = [rgb, plane](const double* up, const std::vector<double*>& gin) {
        if (gin[0] == nullptr) return;
        const double* in = rgb.data();
        for (std::size_t p = 0; p < plane; ++p) {
            const double raw[3] = {in[p], in[plane + p], in[2 * plane + p]};
            double c[3];
            for (int k = 0; k < 3; ++k) c[k] = std::clamp(raw[k], kEps, 1.0);
            const double gh = up[p];
            const double gs = up[plane + p];
            const double gi = up[2 * plane + p];

            const double sum = c[0] + c[1] + c[2];
            int arg_min = 0;
            for (int k = 1; k < 3; ++k)
                if (c[k] < c[arg_min]) arg_min = k;
            const double m = c[arg_min];
            const double denom = sum + kEps;

            double grad[3] = {0.0, 0.0, 0.0};
            for (int k = 0; k < 3; ++k) {
                grad[k] += gi / 3.0;
                double ds = 3.0 * m / (denom * denom);
                if (k == arg_min) ds -= 3.0 / denom;
                grad[k] += gs * ds;
            }

            const double range = std::max({c[0], c[1], c[2]}) - m;
            if (gh != 0.0 && range >= kAchromatic) {
                const double r = c[0], g = c[1], b = c[2];
                const double u = 0.5 * ((r - g) + (r - b));
                const double w = (r - g) * (r - g) + (r - b) * (g - b);
                const double v = std::sqrt(w);
                const double q = u / v;
                if (q > -1.0 + kEps && q < 1.0 - kEps) {
                    const double dtheta_dq = -1.0 / std::sqrt(1.0 - q * q);
                    const double sign = b <= g ? 1.0 : -1.0;
                    const double scale = gh * sign * dtheta_dq / kTwoPi;
                    const double du[3] = {1.0, -0.5, -0.5};
                    const double dw[3] = {2.0 * (r - g) + (g - b), -2.0 * (r - g) + (r - b),
                                          -(g - b) - (r - b)};
                    for (int k = 0; k < 3; ++k) {
                        const double dv = dw[k] / (2.0 * v);
                        grad[k] += scale * (du[k] - q * dv) / v;
                    }
                }
            }

            // Pass-through clamp: gradient only where the raw value was in [0,1].
            for (int k = 0; k < 3; ++k)
                if (raw[k] >= 0.0 && raw[k] <= 1.0) gin[0][k * plane + p] += grad[k];
        }
    };
    return tape.emit(shape, std::move(out), {rgb.node()}, std::move(backward));
}

Tensor hsi_to_rgb(Tape& tape, const Tensor& hsi) {
    require_rgb_shape(hsi, "hsi_to_rgb expects a 3-channel tensor");
    const Shape shape = hsi.shape();
    const std::size_t plane = static_cast<std::size_t>(shape.plane());
    const double* in = hsi.data();

    std::vector<double> out(static_cast<std::size_t>(shape.numel()));
    for (std::size_t p = 0; p < plane; ++p) {
        const double hw = in[p] - std::floor(in[p]);
        const double s = std::clamp(in[plane + p], 0.0, 1.0);
        const double i = std::clamp(in[2 * plane + p], 0.0, 1.0);
        const int sector = std::min(2, static_cast<int>(hw * 3.0));
        const double h_local = (hw - sector / 3.0) * kTwoPi;

        const double a0 = i * (1.0 - s);
        const double k = std::cos(h_local) / std::cos(kPi / 3.0 - h_local);
        const double pk = i * (1.0 + s * k);
        const double t = 3.0 * i - a0 - pk;

        double rgb[3];
        switch (sector) {
            case 0: rgb[0] = pk; rgb[1] = t; rgb[2] = a0; break;
            case 1: rgb[0] = a0; rgb[1] = pk; rgb[2] = t; break;
            default: rgb[0] = t; rgb[1] = a0; rgb[2] = pk; break;
        }
        for (int ch = 0; ch < 3; ++ch) out[ch * plane + p] = rgb[ch];
    }

    auto backward = [hsi, plane](const double* up, const std::vector<double*>& gin) {
        if (gin[0] == nullptr) return;
        const double* in = hsi.data();
        for (std::size_t p = 0; p < plane; ++p) {
            const double raw_s = in[plane + p];
            const double raw_i = in[2 * plane + p];
            const double hw = in[p] - std::floor(in[p]);
            const double s = std::clamp(raw_s, 0.0, 1.0);
            const double i = std::clamp(raw_i, 0.0, 1.0);
            const int sector = std::min(2, static_cast<int>(hw * 3.0));
            const double h_local = (hw - sector / 3.0) * kTwoPi;

            const double c2 = std::cos(kPi / 3.0 - h_local);
            const double k = std::cos(h_local) / c2;
            const double dk_dh = -std::sin(kPi / 3.0) / (c2 * c2) * kTwoPi;

            // Rows: partials of (a0, p, t) w.r.t. (H, S, I).
            const double da0[3] = {0.0, -i, 1.0 - s};
            const double dp[3] = {i * s * dk_dh, i * k, 1.0 + s * k};
            const double dt[3] = {-da0[0] - dp[0], -da0[1] - dp[1], 3.0 - da0[2] - dp[2]};

            const double* rows[3];
            switch (sector) {
                case 0: rows[0] = dp; rows[1] = dt; rows[2] = da0; break;
                case 1: rows[0] = da0; rows[1] = dp; rows[2] = dt; break;
                default: rows[0] = dt; rows[1] = da0; rows[2] = dp; break;
            }

            double gh = 0.0, gs = 0.0, gi = 0.0;
            for (int ch = 0; ch < 3; ++ch) {
                const double g = up[ch * plane + p];
                gh += g * rows[ch][0];
                gs += g * rows[ch][1];
                gi += g * rows[ch][2];
            }
            gin[0][p] += gh;
            if (raw_s >= 0.0 && raw_s <= 1.0) gin[0][plane + p] += gs;
            if (raw_i >= 0.0 && raw_i <= 1.0) gin[0][2 * plane + p] += gi;
        }
    };
    return tape.emit(shape, std::move(out), {hsi.node()}, std::move(backward));
}

Tensor rgb_to_lab(Tape& tape, const Tensor& rgb) {
    require_rgb_shape(rgb, "rgb_to_lab expects a 3-channel tensor");
    const Shape shape = rgb.shape();
    const std::size_t plane = static_cast<std::size_t>(shape.plane());
    const double* in = rgb.data();

    std::vector<double> out(static_cast<std::size_t>(shape.numel()));
    for (std::size_t p = 0; p < plane; ++p) {
        double lin[3];
        for (int k = 0; k < 3; ++k) lin[k] = srgb_decode(std::clamp(in[k * plane + p], 0.0, 1.0));
        double f[3];
        for (int k = 0; k < 3; ++k) {
            const double t = (kM[k][0] * lin[0] + kM[k][1] * lin[1] + kM[k][2] * lin[2]) / kWhite[k];
            f[k] = lab_f(t);
        }
        out[p] = (116.0 * f[1] - 16.0) / 100.0;
        out[plane + p] = 500.0 * (f[0] - f[1]) / 110.0;
        out[2 * plane + p] = 200.0 * (f[1] - f[2]) / 110.0;
    }

    auto backward = [rgb, plane](const double* up, const std::vector<double*>& gin) {
        if (gin[0] == nullptr) return;
        const double* in = rgb.data();
        for (std::size_t p = 0; p < plane; ++p) {
            double raw[3], c[3], lin[3];
            for (int k = 0; k < 3; ++k) {
                raw[k] = in[k * plane + p];
                c[k] = std::clamp(raw[k], 0.0, 1.0);
                lin[k] = srgb_decode(c[k]);
            }
            double t[3];
            for (int k = 0; k < 3; ++k)
                t[k] = (kM[k][0] * lin[0] + kM[k][1] * lin[1] + kM[k][2] * lin[2]) / kWhite[k];

            const double gl = up[p] / 100.0;
            const double ga = up[plane + p] / 110.0;
            const double gb = up[2 * plane + p] / 110.0;
            const double gf[3] = {500.0 * ga, 116.0 * gl - 500.0 * ga + 200.0 * gb, -200.0 * gb};

            double glin[3] = {0.0, 0.0, 0.0};
            for (int k = 0; k < 3; ++k) {
                const double gt = gf[k] * lab_f_deriv(t[k]) / kWhite[k];
                for (int j = 0; j < 3; ++j) glin[j] += gt * kM[k][j];
            }
            for (int k = 0; k < 3; ++k)
                if (raw[k] >= 0.0 && raw[k] <= 1.0)
                    gin[0][k * plane + p] += glin[k] * srgb_decode_deriv(c[k]);
        }
    };
    return tape.emit(shape, std::move(out), {rgb.node()}, std::move(backward));
}

Tensor lab_to_rgb(Tape& tape, const Tensor& lab) {
    require_rgb_shape(lab, "lab_to_rgb expects a 3-channel tensor");
    const Shape shape = lab.shape();
    const std::size_t plane = static_cast<std::size_t>(shape.plane());
    const double* in = lab.data();

    std::vector<double> out(static_cast<std::size_t>(shape.numel()));
    for (std::size_t p = 0; p < plane; ++p) {
        const double L = 100.0 * std::clamp(in[p], 0.0, 1.0);
        const double a = 110.0 * in[plane + p];
        const double b = 110.0 * in[2 * plane + p];
        const double fy = (L + 16.0) / 116.0;
        const double f[3] = {fy + a / 500.0, fy, fy - b / 200.0};
        double xyz[3];
        for (int k = 0; k < 3; ++k) xyz[k] = kWhite[k] * lab_f_inv(f[k]);
        for (int ch = 0; ch < 3; ++ch) {
            const double u =
                kMInv[ch][0] * xyz[0] + kMInv[ch][1] * xyz[1] + kMInv[ch][2] * xyz[2];
            out[ch * plane + p] = srgb_encode(std::clamp(u, 0.0, 1.0));
        }
    }

    auto backward = [lab, plane](const double* up, const std::vector<double*>& gin) {
        if (gin[0] == nullptr) return;
        const double* in = lab.data();
        for (std::size_t p = 0; p < plane; ++p) {
            const double raw_l = in[p];
            const double L = 100.0 * std::clamp(raw_l, 0.0, 1.0);
            const double a = 110.0 * in[plane + p];
            const double b = 110.0 * in[2 * plane + p];
            const double fy = (L + 16.0) / 116.0;
            const double f[3] = {fy + a / 500.0, fy, fy - b / 200.0};
            double xyz[3];
            for (int k = 0; k < 3; ++k) xyz[k] = kWhite[k] * lab_f_inv(f[k]);

            double gxyz[3] = {0.0, 0.0, 0.0};
            for (int ch = 0; ch < 3; ++ch) {
                const double u =
                    kMInv[ch][0] * xyz[0] + kMInv[ch][1] * xyz[1] + kMInv[ch][2] * xyz[2];
                if (u < 0.0 || u > 1.0) continue;  // gamut clamp, zero gradient outside
                const double g = up[ch * plane + p] * srgb_encode_deriv(u);
                for (int j = 0; j < 3; ++j) gxyz[j] += g * kMInv[ch][j];
            }
            double gf[3];
            for (int k = 0; k < 3; ++k) gf[k] = gxyz[k] * kWhite[k] * lab_f_inv_deriv(f[k]);

            const double gfy = gf[0] + gf[1] + gf[2];
            if (raw_l >= 0.0 && raw_l <= 1.0) gin[0][p] += gfy / 116.0 * 100.0;
            gin[0][plane + p] += gf[0] / 500.0 * 110.0;
            gin[0][2 * plane + p] += -gf[2] / 200.0 * 110.0;
        }
    };
    return tape.emit(shape, std::move(out), {lab.node()}, std::move(backward));
}

std::array<double, 3> srgb_pixel_to_lab(double r, double g, double b) {
    const double lin[3] = {srgb_decode(std::clamp(r, 0.0, 1.0)),
                           srgb_decode(std::clamp(g, 0.0, 1.0)),
                           srgb_decode(std::clamp(b, 0.0, 1.0))};
    double f[3];
    for (int k = 0; k < 3; ++k) {
        const double t = (kM[k][0] * lin[0] + kM[k][1] * lin[1] + kM[k][2] * lin[2]) / kWhite[k];
        f[k] = lab_f(t);
    }
    return {116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])};
}

}  // namespace usln
