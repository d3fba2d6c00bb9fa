#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sqr/geometry.hpp"
#include "sqr/range_image.hpp"
#include "sqr/renderer.hpp"
#include "sqr/superquadric.hpp"

namespace sqr {

struct FitConfig {
    int max_iterations = 200;
    /// Stop when the accepted step is below tol * (|p| + tol).
    double param_tolerance = 1e-6;
    /// Stop when an accepted step lowers the cost by less than this fraction.
    double residual_tolerance = 1e-8;
    double damping_init = 1e-3;
    double damping_increase = 10.0;
    double damping_decrease = 10.0;
    /// Central-difference step, relative to max(|p_j|, 1).
    double jacobian_step = 1e-6;
    ParamVector lower{1.0, 1.0, 1.0, 0.05, 0.05, -128.0, -128.0, -128.0};
    ParamVector upper{256.0, 256.0, 256.0, 1.0, 1.0, 384.0, 384.0, 384.0};
};

void validate(const FitConfig& cfg);

struct FitResult {
    SuperquadricParams params;
    /// Final sum of squared residuals.
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
    double wall_ms = 0.0;
    /// Cost after the initial estimate and after every accepted step.
    std::vector<double> cost_history;
};

/// Moment-style starting point: center = centroid (pushed along the view
/// direction by half the depth extent when the cloud is one-sided), extents =
/// half the bounding-box size, eps1 = eps2 = 1. Needs at least 8 points.
SuperquadricParams initial_estimate(std::span<const Point3> points,
                                    std::optional<Point3> view_direction = std::nullopt);

/// r_i = sqrt(a1 a2 a3) * (F(p_i)^(eps1/2) - 1).
std::vector<double> residuals(const SuperquadricParams& params, std::span<const Point3> points);

/// Levenberg-Marquardt on the sum of squared residuals with a central-difference
/// Jacobian and box bounds. Non-convergence is reported through `converged`.
FitResult fit_iterative(std::span<const Point3> points, const FitConfig& cfg,
                        std::optional<SuperquadricParams> init = std::nullopt,
                        std::optional<Point3> view_direction = std::nullopt);

/// Reconstructs the visible points, fits in shape axes and maps the center back
/// to the frame. Clipped near-plane pixels are ignored. wall_ms covers the call.
FitResult fit_range_image(const RangeImage& img, const RenderConfig& render, const FitConfig& cfg);

/// Text record, fixed order: a1 a2 a3 eps1 eps2 x0 y0 z0 residual iterations
/// converged wall_ms, one "key<TAB>value" per line.
std::string format_fit_result(const FitResult& r);
FitResult parse_fit_result(const std::string& text);

}  // namespace sqr
