#pragma once

#include <array>
#include <cstddef>
#include <string_view>

#include "sqr/geometry.hpp"

namespace sqr {

inline constexpr std::size_t kParamCount = 8;
using ParamVector = std::array<double, kParamCount>;

/// Canonical parameter order: a1, a2, a3, eps1, eps2, x0, y0, z0.
enum class Param : std::size_t { A1, A2, A3, Eps1, Eps2, X0, Y0, Z0 };

inline constexpr std::array<std::string_view, kParamCount> kParamNames = {
    "a1", "a2", "a3", "eps1", "eps2", "x0", "y0", "z0"};

constexpr std::size_t index(Param p) { return static_cast<std::size_t>(p); }

/// The 8 parameters of an unrotated superquadric. Construction rejects
/// non-finite values and non-positive extents or shape exponents.
class SuperquadricParams {
public:
    SuperquadricParams(double a1, double a2, double a3, double eps1, double eps2,
                       double x0, double y0, double z0);
    explicit SuperquadricParams(const ParamVector& values);

    static SuperquadricParams sphere(double radius, Point3 center);

    const ParamVector& values() const noexcept { return values_; }
    double operator[](Param p) const noexcept { return values_[index(p)]; }

    double a1() const noexcept { return values_[0]; }
    double a2() const noexcept { return values_[1]; }
    double a3() const noexcept { return values_[2]; }
    double eps1() const noexcept { return values_[3]; }
    double eps2() const noexcept { return values_[4]; }
    Point3 center() const noexcept { return {values_[5], values_[6], values_[7]}; }
    Point3 extents() const noexcept { return {values_[0], values_[1], values_[2]}; }

    SuperquadricParams with_center(Point3 c) const;

    friend bool operator==(const SuperquadricParams&, const SuperquadricParams&) = default;

private:
    ParamVector values_;
};

/// Inside-outside function. Bases are taken in absolute value before the
/// fractional powers, so the surface is symmetric about each axis through the
/// center. Returns F >= 0, F == 0 exactly at the center, F == 1 on the surface.
/// Throws EvaluationError if the result is not finite.
double evaluate_implicit(const SuperquadricParams& params, Point3 p);

enum class Side { Inside, Surface, Outside };

inline constexpr double kDefaultSurfaceTolerance = 1e-6;

Side classify(const SuperquadricParams& params, Point3 p,
              double tol = kDefaultSurfaceTolerance);

/// Parameters mapped affinely onto [0, 1].
struct ScaledParams {
    ParamVector values{};
    friend bool operator==(const ScaledParams&, const ScaledParams&) = default;
};

struct ParamRange {
    double lo;
    double hi;
    double width() const noexcept { return hi - lo; }
};

/// Admissible range for each parameter: [0, 256] for extents and position,
/// [0, 1] for the shape exponents.
const std::array<ParamRange, kParamCount>& param_ranges();

/// Throws RangeViolation naming the first parameter outside its range.
ScaledParams scale_params(const SuperquadricParams& p);
SuperquadricParams unscale_params(const ScaledParams& s);

/// Clamps each scaled value into [0, 1] (extents and exponents get a small
/// positive floor so the result is a constructible shape) and unscales.
SuperquadricParams unscale_clamped(const ParamVector& raw);

}  // namespace sqr
