#include "sqr/superquadric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sqr/error.hpp"

namespace sqr {

namespace {

void validate(const ParamVector& v) {
    for (std::size_t i = 0; i < kParamCount; ++i) {
        if (!std::isfinite(v[i])) {
            throw InvalidArgument("superquadric parameter " + std::string(kParamNames[i]) +
                                  " is not finite");
        }
    }
    for (std::size_t i = 0; i < 5; ++i) {
        if (v[i] <= 0.0) {
            throw InvalidArgument("superquadric parameter " + std::string(kParamNames[i]) +
                                  " must be positive, got " + std::to_string(v[i]));
        }
    }
}

// Floor applied to scaled extents/exponents when clamping network outputs.
constexpr double kScaledFloor = 1e-3;

}  // namespace

SuperquadricParams::SuperquadricParams(double a1, double a2, double a3, double eps1, double eps2,
                                       double x0, double y0, double z0)
    : SuperquadricParams(ParamVector{a1, a2, a3, eps1, eps2, x0, y0, z0}) {}

SuperquadricParams::SuperquadricParams(const ParamVector& values) : values_(values) {
    validate(values_);
}

SuperquadricParams SuperquadricParams::sphere(double radius, Point3 center) {
    return {radius, radius, radius, 1.0, 1.0, center.x, center.y, center.z};
}

SuperquadricParams SuperquadricParams::with_center(Point3 c) const {
    ParamVector v = values_;
    v[5] = c.x;
    v[6] = c.y;
    v[7] = c.z;
    return SuperquadricParams(v);
}

double evaluate_implicit(const SuperquadricParams& params, Point3 p) {
    const Point3 c = params.center();
    const double e1 = params.eps1();
    const double e2 = params.eps2();
    const double fx = std::pow(std::abs(p.x - c.x) / params.a1(), 2.0 / e2);
    const double fy = std::pow(std::abs(p.y - c.y) / params.a2(), 2.0 / e2);
    const double fz = std::pow(std::abs(p.z - c.z) / params.a3(), 2.0 / e1);
    const double f = std::pow(fx + fy, e2 / e1) + fz;
    if (!std::isfinite(f)) {
        throw EvaluationError("inside-outside function overflowed");
    }
    return f;
}

Side classify(const SuperquadricParams& params, Point3 p, double tol) {
    if (!(tol > 0.0)) {
        throw InvalidArgument("surface tolerance must be positive");
    }
    const double f = evaluate_implicit(params, p);
    if (std::abs(f - 1.0) <= tol) return Side::Surface;
    return f < 1.0 ? Side::Inside : Side::Outside;
}

const std::array<ParamRange, kParamCount>& param_ranges() {
    static const std::array<ParamRange, kParamCount> ranges = {
        ParamRange{0, 256}, ParamRange{0, 256}, ParamRange{0, 256},
        ParamRange{0, 1},   ParamRange{0, 1},
        ParamRange{0, 256}, ParamRange{0, 256}, ParamRange{0, 256}};
    return ranges;
}

ScaledParams scale_params(const SuperquadricParams& p) {
    const auto& ranges = param_ranges();
    ScaledParams s;
    for (std::size_t i = 0; i < kParamCount; ++i) {
        const double v = p.values()[i];
        if (v < ranges[i].lo || v > ranges[i].hi) {
            throw RangeViolation(std::string(kParamNames[i]),
                                 "parameter " + std::string(kParamNames[i]) + " = " +
                                     std::to_string(v) + " outside [" +
                                     std::to_string(ranges[i].lo) + ", " +
                                     std::to_string(ranges[i].hi) + "]");
        }
        s.values[i] = (v - ranges[i].lo) / ranges[i].width();
    }
    return s;
}

SuperquadricParams unscale_params(const ScaledParams& s) {
    const auto& ranges = param_ranges();
    ParamVector v{};
    for (std::size_t i = 0; i < kParamCount; ++i) {
        const double x = s.values[i];
        if (!(x >= 0.0 && x <= 1.0)) {
            throw RangeViolation(std::string(kParamNames[i]),
                                 "scaled parameter " + std::string(kParamNames[i]) + " = " +
                                     std::to_string(x) + " outside [0, 1]");
        }
        v[i] = ranges[i].lo + x * ranges[i].width();
    }
    return SuperquadricParams(v);
}

SuperquadricParams unscale_clamped(const ParamVector& raw) {
    ScaledParams s;
    for (std::size_t i = 0; i < kParamCount; ++i) {
        const double floor = i < 5 ? kScaledFloor : 0.0;
        const double x = std::isfinite(raw[i]) ? raw[i] : 0.5;
        s.values[i] = std::clamp(x, floor, 1.0);
    }
    return unscale_params(s);
}

}  // namespace sqr
