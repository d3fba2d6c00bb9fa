#include "sqr/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <thread>

#include "sqr/error.hpp"

namespace sqr {

namespace {

constexpr Point3 kFrameCenter{kFrameSize / 2, kFrameSize / 2, kFrameSize / 2};

struct Interval {
    double lo;
    double hi;
};

// Entry/exit parameters of the ray o + t*d through the box [lo, hi].
std::optional<Interval> clip_to_box(Point3 o, Point3 d, Point3 lo, Point3 hi) {
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    const double os[3] = {o.x, o.y, o.z};
    const double ds[3] = {d.x, d.y, d.z};
    const double los[3] = {lo.x, lo.y, lo.z};
    const double his[3] = {hi.x, hi.y, hi.z};
    for (int i = 0; i < 3; ++i) {
        if (std::abs(ds[i]) < 1e-15) {
            if (os[i] < los[i] || os[i] > his[i]) return std::nullopt;
            continue;
        }
        double a = (los[i] - os[i]) / ds[i];
        double b = (his[i] - os[i]) / ds[i];
        if (a > b) std::swap(a, b);
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
    }
    if (t0 > t1) return std::nullopt;
    return Interval{t0, t1};
}

class RayMarcher {
public:
    RayMarcher(const SuperquadricParams& params, const RenderConfig& cfg)
        : params_(params), cfg_(cfg), rot_(view_rotation(cfg)), dir_(-1.0 * rot_.rows[2]) {}

    std::optional<double> trace(double x, double y) const {
        const Point3 c = params_.center();
        // Ray origin on the near plane, expressed in shape coordinates.
        const Point3 origin = c + rot_.apply_transpose(Point3{x, y, cfg_.view_hi} - c);
        const auto box = clip_to_box(origin, dir_, c - params_.extents(), c + params_.extents());
        if (!box) return std::nullopt;
        const double t_start = std::max(box->lo, 0.0);
        const double t_end = std::min(box->hi, cfg_.view_span());
        if (t_start > t_end) return std::nullopt;

        double t_prev = t_start;
        double f_prev = excess(origin, t_prev);
        if (f_prev <= 0.0) return t_prev;
        while (t_prev < t_end) {
            const double t = std::min(t_prev + cfg_.march_step, t_end);
            const double f = excess(origin, t);
            if (f <= 0.0) return bisect(origin, t_prev, f_prev, t, f);
            t_prev = t;
            f_prev = f;
        }
        return std::nullopt;
    }

private:
    double excess(Point3 origin, double t) const {
        return evaluate_implicit(params_, origin + t * dir_) - 1.0;
    }

    // Invariant: f(lo) > 0 (outside), f(hi) <= 0 (inside or on surface).
    double bisect(Point3 origin, double lo, double f_lo, double hi, double f_hi) const {
        for (int it = 0; it < cfg_.max_bisection_iterations; ++it) {
            const bool narrow = hi - lo <= cfg_.bisection_tolerance;
            const bool close = std::min(std::abs(f_lo), std::abs(f_hi)) <= cfg_.surface_tolerance;
            if (narrow && close) break;
            const double mid = 0.5 * (lo + hi);
            const double f = excess(origin, mid);
            if (f > 0.0) {
                lo = mid;
                f_lo = f;
            } else {
                hi = mid;
                f_hi = f;
            }
        }
        return std::abs(f_lo) < std::abs(f_hi) ? lo : hi;
    }

    const SuperquadricParams& params_;
    const RenderConfig& cfg_;
    Rotation3 rot_;
    Point3 dir_;
};

}  // namespace

void validate(const RenderConfig& cfg) {
    if (cfg.width <= 0 || cfg.height <= 0 || cfg.width > 65535 || cfg.height > 65535) {
        throw InvalidArgument("render size must be in [1, 65535]");
    }
    if (!is_finite(cfg.view_direction) || norm(cfg.view_direction) < 1e-12) {
        throw InvalidArgument("view direction must be a finite nonzero vector");
    }
    if (!std::isfinite(cfg.view_lo) || !std::isfinite(cfg.view_hi) || !(cfg.view_hi > cfg.view_lo)) {
        throw InvalidArgument("view volume must satisfy view_lo < view_hi");
    }
    if (!(cfg.march_step > 0.0) || !(cfg.bisection_tolerance > 0.0) ||
        !(cfg.surface_tolerance > 0.0) || cfg.max_bisection_iterations < 1) {
        throw InvalidArgument("march step, tolerances and bisection cap must be positive");
    }
}

std::string describe(const RenderConfig& cfg) {
    const Point3 d = normalized(cfg.view_direction);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "size=%dx%d view=%.17g,%.17g,%.17g volume=%.17g,%.17g tol=%.17g step=%.17g bisect=%.17g/%d",
                  cfg.width, cfg.height, d.x, d.y, d.z, cfg.view_lo, cfg.view_hi, cfg.surface_tolerance, cfg.march_step,
                  cfg.bisection_tolerance, cfg.max_bisection_iterations);
    return buf;
}

Digest render_digest(const RenderConfig& cfg) { return sha256(describe(cfg)); }

Rotation3 view_rotation(const RenderConfig& cfg) {
    const Point3 toward = -1.0 * normalized(cfg.view_direction);
    Point3 up = Point3{0, 0, 1} - dot(Point3{0, 0, 1}, toward) * toward;
    if (norm(up) < 1e-9) up = Point3{0, 1, 0} - dot(Point3{0, 1, 0}, toward) * toward;
    up = normalized(up);
    const Point3 right = cross(up, toward);
    return Rotation3{{right, up, toward}};
}

double pixel_x(const RenderConfig& cfg, int col) { return cfg.view_lo + (col + 0.5) * cfg.view_span() / cfg.width; }
double pixel_y(const RenderConfig& cfg, int row) { return cfg.view_lo + (row + 0.5) * cfg.view_span() / cfg.height; }

double depth_to_z(const RenderConfig& cfg, double depth) { return cfg.view_lo + depth * cfg.view_span() / kFrameSize; }
double z_to_depth(const RenderConfig& cfg, double z) { return (z - cfg.view_lo) * kFrameSize / cfg.view_span(); }

double evaluate_posed(const SuperquadricParams& params, Point3 frame_point, const RenderConfig& cfg) {
    const Point3 c = params.center();
    return evaluate_implicit(params, c + view_rotation(cfg).apply_transpose(frame_point - c));
}

Point3 to_shape_axes(Point3 frame_point, const RenderConfig& cfg) {
    return kFrameCenter + view_rotation(cfg).apply_transpose(frame_point - kFrameCenter);
}

Point3 from_shape_axes(Point3 shape_point, const RenderConfig& cfg) {
    return kFrameCenter + view_rotation(cfg).apply(shape_point - kFrameCenter);
}

std::optional<double> trace_pixel(const SuperquadricParams& params, const RenderConfig& cfg,
                                  int col, int row) {
    validate(cfg);
    return RayMarcher(params, cfg).trace(pixel_x(cfg, col), pixel_y(cfg, row));
}

RangeImage render_range_image(const SuperquadricParams& params, const RenderConfig& cfg,
                              int threads) {
    validate(cfg);
    RangeImage img(cfg.width, cfg.height);
    const RayMarcher marcher(params, cfg);

    auto render_rows = [&](int begin, int end) {
        for (int row = begin; row < end; ++row) {
            const double y = pixel_y(cfg, row);
            for (int col = 0; col < cfg.width; ++col) {
                if (auto t = marcher.trace(pixel_x(cfg, col), y)) {
                    img.at(col, row) = static_cast<float>(z_to_depth(cfg, cfg.view_hi - *t));
                }
            }
        }
    };

    threads = std::clamp(threads, 1, cfg.height);
    if (threads == 1) {
        render_rows(0, cfg.height);
        return img;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    {
        std::vector<std::jthread> workers;
        for (int w = 0; w < threads; ++w) {
            const int begin = cfg.height * w / threads;
            const int end = cfg.height * (w + 1) / threads;
            workers.emplace_back([&, w, begin, end] {
                try {
                    render_rows(begin, end);
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return img;
}

std::vector<Point3> range_image_to_points(const RangeImage& img, const RenderConfig& cfg) {
    if (img.width() != cfg.width || img.height() != cfg.height) {
        throw ShapeError("range image is " + std::to_string(img.width()) + "x" +
                         std::to_string(img.height()) + " but render config is " +
                         std::to_string(cfg.width) + "x" + std::to_string(cfg.height));
    }
    std::vector<Point3> points;
    for (int row = 0; row < img.height(); ++row) {
        for (int col = 0; col < img.width(); ++col) {
            const float d = img.at(col, row);
            if (d != 0.0f) points.push_back({pixel_x(cfg, col), pixel_y(cfg, row), depth_to_z(cfg, d)});
        }
    }
    return points;
}

}  // namespace sqr
