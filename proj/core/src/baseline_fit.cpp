#include "sqr/baseline_fit.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "sqr/error.hpp"

namespace sqr {

namespace {

using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat8 = Eigen::Matrix<double, 8, 8>;

constexpr double kMaxDamping = 1e12;

ParamVector clamp_to(const ParamVector& p, const FitConfig& cfg) {
    ParamVector out{};
    for (std::size_t i = 0; i < kParamCount; ++i) out[i] = std::clamp(p[i], cfg.lower[i], cfg.upper[i]);
    return out;
}

// Sum of squares, or +inf when the shape cannot be evaluated.
double cost_of(const ParamVector& p, std::span<const Point3> points, std::vector<double>* r_out = nullptr) {
    try {
        auto r = residuals(SuperquadricParams(p), points);
        double c = 0.0;
        for (double v : r) c += v * v;
        if (r_out) *r_out = std::move(r);
        return std::isfinite(c) ? c : std::numeric_limits<double>::infinity();
    } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
    }
}

}  // namespace

void validate(const FitConfig& c) {
    if (c.max_iterations < 1 || !(c.param_tolerance > 0) || !(c.residual_tolerance > 0) ||
        !(c.damping_init > 0) || !(c.damping_increase > 1) || !(c.damping_decrease > 1) || !(c.jacobian_step > 0)) {
        throw InvalidArgument("fit config: iterations, tolerances and damping factors must be positive");
    }
    for (std::size_t i = 0; i < kParamCount; ++i) {
        if (!(c.lower[i] < c.upper[i])) throw InvalidArgument("fit config: lower bound must be below upper bound");
    }
    for (std::size_t i = 0; i < 5; ++i) {
        if (!(c.lower[i] > 0)) throw InvalidArgument("fit config: extent and shape bounds must be positive");
    }
}

SuperquadricParams initial_estimate(std::span<const Point3> points, std::optional<Point3> view_direction) {
    if (points.size() < kParamCount) {
        throw InvalidArgument("initial_estimate needs at least 8 points, got " + std::to_string(points.size()));
    }
    Point3 sum{}, lo = points.front(), hi = points.front();
    for (const Point3& p : points) {
        sum = sum + p;
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    Point3 center = (1.0 / static_cast<double>(points.size())) * sum;
    if (view_direction) {
        const Point3 d = normalized(*view_direction);
        double dmin = std::numeric_limits<double>::infinity(), dmax = -dmin;
        for (const Point3& p : points) {
            dmin = std::min(dmin, dot(p, d));
            dmax = std::max(dmax, dot(p, d));
        }
        center = center + (0.5 * (dmax - dmin)) * d;
    }
    const Point3 half = 0.5 * (hi - lo);
    constexpr double kMinExtent = 1e-3;
    return {std::max(half.x, kMinExtent), std::max(half.y, kMinExtent), std::max(half.z, kMinExtent),
            1.0, 1.0, center.x, center.y, center.z};
}

std::vector<double> residuals(const SuperquadricParams& params, std::span<const Point3> points) {
    const double volume = std::sqrt(params.a1() * params.a2() * params.a3());
    const double power = 0.5 * params.eps1();
    std::vector<double> r(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        r[i] = volume * (std::pow(evaluate_implicit(params, points[i]), power) - 1.0);
    }
    return r;
}

FitResult fit_iterative(std::span<const Point3> points, const FitConfig& cfg,
                        std::optional<SuperquadricParams> init, std::optional<Point3> view_direction) {
    validate(cfg);
    if (points.size() < kParamCount) {
        throw InvalidArgument("fit needs at least 8 points, got " + std::to_string(points.size()));
    }
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = points.size();

    ParamVector p = clamp_to((init ? *init : initial_estimate(points, view_direction)).values(), cfg);
    std::vector<double> r;
    double cost = cost_of(p, points, &r);
    if (!std::isfinite(cost)) throw EvaluationError("fit: initial estimate cannot be evaluated");

    FitResult result{SuperquadricParams(p), 0.0, 0, false, 0.0, {}};
    result.cost_history.push_back(cost);
    double lambda = cfg.damping_init;
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(n), 8);
    std::vector<double> rp, rm;

    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        result.iterations = iter;
        if (cost == 0.0) {
            result.converged = true;
            break;
        }
        for (std::size_t j = 0; j < kParamCount; ++j) {
            const double h = cfg.jacobian_step * std::max(std::abs(p[j]), 1.0);
            ParamVector pp = p, pm = p;
            pp[j] += h;
            pm[j] -= h;
            if (!std::isfinite(cost_of(pp, points, &rp)) || !std::isfinite(cost_of(pm, points, &rm))) {
                throw EvaluationError("fit: Jacobian evaluation failed");
            }
            for (std::size_t i = 0; i < n; ++i) {
                jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        const Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(n));
        const Mat8 jtj = jac.transpose() * jac;
        const Vec8 grad = jac.transpose() * rv;

        bool accepted = false;
        bool stationary = false;
        while (!accepted && lambda <= kMaxDamping) {
            Mat8 damped = jtj;
            for (int k = 0; k < 8; ++k) damped(k, k) += lambda * std::max(jtj(k, k), 1e-12);
            Vec8 delta;
            Eigen::LDLT<Mat8> ldlt(damped);
            if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
                delta = ldlt.solve(-grad);
            }
            if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || !delta.allFinite()) {
                // Degenerate normal equations: damped gradient step.
                delta = -grad / (lambda * (jtj.trace() / 8.0 + 1.0));
            }
            ParamVector trial{};
            for (std::size_t k = 0; k < kParamCount; ++k) trial[k] = p[k] + delta[static_cast<Eigen::Index>(k)];
            trial = clamp_to(trial, cfg);

            double step_norm = 0.0, p_norm = 0.0;
            for (std::size_t k = 0; k < kParamCount; ++k) {
                step_norm += (trial[k] - p[k]) * (trial[k] - p[k]);
                p_norm += p[k] * p[k];
            }
            if (std::sqrt(step_norm) <= cfg.param_tolerance * (std::sqrt(p_norm) + cfg.param_tolerance)) {
                stationary = true;
                break;
            }
            std::vector<double> r_trial;
            const double trial_cost = cost_of(trial, points, &r_trial);
            if (trial_cost < cost) {
                const double improvement = (cost - trial_cost) / cost;
                p = trial;
                r = std::move(r_trial);
                cost = trial_cost;
                result.cost_history.push_back(cost);
                lambda = std::max(lambda / cfg.damping_decrease, 1e-15);
                accepted = true;
                if (improvement <= cfg.residual_tolerance) stationary = true;
            } else {
                lambda *= cfg.damping_increase;
            }
        }
        if (stationary) {
            result.converged = true;
            break;
        }
        if (!accepted) break;  // damping exhausted without progress
    }

    result.params = SuperquadricParams(p);
    result.residual = cost;
    result.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

FitResult fit_range_image(const RangeImage& img, const RenderConfig& render, const FitConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Point3> points;
    for (const Point3& w : range_image_to_points(img, render)) {
        if (!is_clipped_point(w, render)) points.push_back(to_shape_axes(w, render));
    }
    if (points.empty()) throw InvalidArgument("range image has no foreground pixels");
    FitResult r = fit_iterative(points, cfg, std::nullopt, render.view_direction);
    r.params = r.params.with_center(from_shape_axes(r.params.center(), render));
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::string format_fit_result(const FitResult& r) {
    std::ostringstream os;
    char buf[64];
    for (std::size_t i = 0; i < kParamCount; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", r.params.values()[i]);
        os << kParamNames[i] << '\t' << buf << '\n';
    }
    std::snprintf(buf, sizeof buf, "%.17g", r.residual);
    os << "residual\t" << buf << '\n';
    os << "iterations\t" << r.iterations << '\n';
    os << "converged\t" << (r.converged ? 1 : 0) << '\n';
    std::snprintf(buf, sizeof buf, "%.17g", r.wall_ms);
    os << "wall_ms\t" << buf << '\n';
    return os.str();
}

FitResult parse_fit_result(const std::string& text) {
    std::istringstream is(text);
    auto field = [&](std::string_view key) {
        std::string line;
        if (!std::getline(is, line)) throw FormatError("fit result: missing '" + std::string(key) + "'");
        const auto tab = line.find('\t');
        if (tab == std::string::npos || line.substr(0, tab) != key) {
            throw FormatError("fit result: expected '" + std::string(key) + "'");
        }
        return line.substr(tab + 1);
    };
    auto num = [](const std::string& s) {
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size()) throw FormatError("fit result: bad number '" + s + "'");
        return v;
    };
    ParamVector v{};
    for (std::size_t i = 0; i < kParamCount; ++i) v[i] = num(field(kParamNames[i]));
    FitResult r{SuperquadricParams(v), 0.0, 0, false, 0.0, {}};
    r.residual = num(field("residual"));
    r.iterations = static_cast<int>(num(field("iterations")));
    r.converged = num(field("converged")) != 0.0;
    r.wall_ms = num(field("wall_ms"));
    return r;
}

}  // namespace sqr
