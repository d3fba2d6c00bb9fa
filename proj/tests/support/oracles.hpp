#pragma once

// Reference computations that deliberately avoid the library's own code paths.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "sqr/geometry.hpp"
#include "sqr/layers.hpp"
#include "sqr/rng.hpp"
#include "sqr/superquadric.hpp"
#include "sqr/tensor.hpp"

namespace sqr::oracle {

// Inside-outside function through exp/log instead of pow.
inline double implicit(const ParamVector& v, Point3 p) {
    auto powabs = [](double base, double e) {
        const double b = std::fabs(base);
        return b == 0.0 ? 0.0 : std::exp(e * std::log(b));
    };
    const double tx = powabs((p.x - v[5]) / v[0], 2.0 / v[4]);
    const double ty = powabs((p.y - v[6]) / v[1], 2.0 / v[4]);
    const double tz = powabs((p.z - v[7]) / v[2], 2.0 / v[3]);
    return powabs(tx + ty, v[4] / v[3]) + tz;
}

// Residual of the iterative fitting objective, transcribed independently.
inline double fit_residual(const ParamVector& v, Point3 p) {
    const double f = implicit(v, p);
    return std::sqrt(v[0] * v[1] * v[2]) * (std::exp(0.5 * v[3] * std::log(f)) - 1.0);
}

// Signed power used by the explicit surface parametrization.
inline double spow(double base, double e) {
    return std::copysign(std::pow(std::fabs(base), e), base);
}

// Point on the surface at latitude eta in [-pi/2, pi/2], longitude omega in [-pi, pi).
inline Point3 surface_point(const ParamVector& v, double eta, double omega) {
    const double ce = spow(std::cos(eta), v[3]);
    return {v[5] + v[0] * ce * spow(std::cos(omega), v[4]), v[6] + v[1] * ce * spow(std::sin(omega), v[4]),
            v[7] + v[2] * spow(std::sin(eta), v[3])};
}

// Full-surface cloud from uniformly drawn angles.
inline std::vector<Point3> surface_cloud(const ParamVector& v, std::size_t n, Philox4x32& rng) {
    std::vector<Point3> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double eta = rng.uniform(-std::numbers::pi / 2, std::numbers::pi / 2);
        const double omega = rng.uniform(-std::numbers::pi, std::numbers::pi);
        pts.push_back(surface_point(v, eta, omega));
    }
    return pts;
}

// First hit of a ray travelling along -z from the plane z = 256 with a sphere,
// reported as the z coordinate of the hit (which is the recorded depth).
inline std::optional<double> ray_sphere_depth(double px, double py, Point3 c, double r) {
    const double d2 = (px - c.x) * (px - c.x) + (py - c.y) * (py - c.y);
    if (d2 > r * r) return std::nullopt;
    return c.z + std::sqrt(r * r - d2);
}

// Direct nested-loop cross-correlation with ceil(in/s) outputs and the
// padding split (before = total/2).
inline Tensor<double> direct_conv(const Tensor<double>& in, std::span<const double> w, std::span<const double> b,
                                  std::size_t cout, std::size_t k, std::size_t s) {
    const std::size_t n = in.batch(), cin = in.channels(), h = in.height(), wd = in.width();
    const std::size_t oh = (h + s - 1) / s, ow = (wd + s - 1) / s;
    const long pad_h = static_cast<long>(std::max<long>(long((oh - 1) * s + k) - long(h), 0) / 2);
    const long pad_w = static_cast<long>(std::max<long>(long((ow - 1) * s + k) - long(wd), 0) / 2);
    Tensor<double> out({n, cout, oh, ow});
    for (std::size_t bi = 0; bi < n; ++bi)
        for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t x = 0; x < ow; ++x) {
                    double acc = b[o];
                    for (std::size_t c = 0; c < cin; ++c)
                        for (std::size_t ky = 0; ky < k; ++ky)
                            for (std::size_t kx = 0; kx < k; ++kx) {
                                const long iy = long(y * s + ky) - pad_h;
                                const long ix = long(x * s + kx) - pad_w;
                                if (iy < 0 || ix < 0 || iy >= long(h) || ix >= long(wd)) continue;
                                acc += w[((o * cin + c) * k + ky) * k + kx] * in(bi, c, std::size_t(iy), std::size_t(ix));
                            }
                    out(bi, o, y, x) = acc;
                }
    return out;
}

// Kolmogorov-Smirnov statistic of a sample against U(lo, hi).
inline double ks_uniform(std::vector<double> xs, double lo, double hi) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double cdf = std::clamp((xs[i] - lo) / (hi - lo), 0.0, 1.0);
        d = std::max({d, (i + 1) / n - cdf, cdf - i / n});
    }
    return d;
}

// Asymptotic 1% critical value of the one-sample KS statistic.
inline double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

inline Tensor<double> random_tensor(Tensor<double>::Shape shape, Philox4x32& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(shape);
    for (double& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

// Relative error with a floor on the denominator so entries whose true
// gradient is ~0 are judged on absolute error.
inline double rel_error(double analytic, double numeric, double floor) {
    return std::fabs(analytic - numeric) / std::max({std::fabs(analytic), std::fabs(numeric), floor});
}

inline constexpr double kFdStep = 1e-5;
inline constexpr double kRelFloor = 1e-6;

// Checks input and parameter gradients of a layer against central differences
// of the scalar objective sum(forward(x) * probe).
inline GradCheck check_layer(Layer<double>& layer, Tensor<double> input, Mode mode, Philox4x32& rng) {
    GradCheck r;
    const Tensor<double> out0 = layer.forward(input, mode);
    const Tensor<double> probe = random_tensor(out0.shape(), rng);
    auto objective = [&](const Tensor<double>& x) {
        const Tensor<double> y = layer.forward(x, mode);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * probe.data()[i];
        return s;
    };
    layer.forward(input, mode);
    const Tensor<double> gin = layer.backward(probe);
    std::vector<AlignedVector<double>> gparams;
    for (auto* b : layer.blocks()) gparams.push_back(b->learnable ? b->grad : AlignedVector<double>{});

    for (std::size_t i = 0; i < input.size(); ++i) {
        const double keep = input.data()[i];
        input.data()[i] = keep + kFdStep;
        const double fp = objective(input);
        input.data()[i] = keep - kFdStep;
        const double fm = objective(input);
        input.data()[i] = keep;
        r.max_rel_error = std::max(r.max_rel_error, rel_error(gin.data()[i], (fp - fm) / (2 * kFdStep), kRelFloor));
        ++r.checked;
    }
    auto blocks = layer.blocks();
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        auto* b = blocks[bi];
        if (!b->learnable) continue;
        for (std::size_t i = 0; i < b->value.size(); ++i) {
            const double keep = b->value[i];
            b->value[i] = keep + kFdStep;
            const double fp = objective(input);
            b->value[i] = keep - kFdStep;
            const double fm = objective(input);
            b->value[i] = keep;
            r.max_rel_error =
                std::max(r.max_rel_error, rel_error(gparams[bi][i], (fp - fm) / (2 * kFdStep), kRelFloor));
            ++r.checked;
        }
    }
    return r;
}

inline GradCheck check_loss(const Tensor<double>& pred, const Tensor<double>& target) {
    GradCheck r;
    const auto res = l2_loss(pred, target);
    Tensor<double> p = pred;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p.data()[i];
        p.data()[i] = keep + kFdStep;
        const double fp = l2_loss(p, target).loss;
        p.data()[i] = keep - kFdStep;
        const double fm = l2_loss(p, target).loss;
        p.data()[i] = keep;
        r.max_rel_error = std::max(r.max_rel_error, rel_error(res.grad.data()[i], (fp - fm) / (2 * kFdStep), kRelFloor));
        ++r.checked;
    }
    return r;
}

}  // namespace sqr::oracle
