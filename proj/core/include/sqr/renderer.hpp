#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sqr/digest.hpp"
#include "sqr/geometry.hpp"
#include "sqr/range_image.hpp"
#include "sqr/superquadric.hpp"

namespace sqr {

/// Camera and ray-marching settings.
///
/// The shape is seen along `view_direction` expressed in its own axes; the
/// default (-1,-1,-1) is the isometric axonometry that shows the +x, +y and +z
/// faces at once. The superquadric is posed about its own center by the
/// rotation taking `view_direction` onto -z and then projected orthographically
/// along -z.
///
/// The image shows the view volume [view_lo, view_hi]^3 in frame voxels, so a
/// posed shape may extend past the 256^3 frame without leaving the picture.
/// That volume maps linearly onto the 256-level grid: columns and rows cover
/// x and y (rays through pixel centers), rays start at z = view_hi, and a hit
/// at height z is stored as depth 256 * (z - view_lo) / (view_hi - view_lo).
/// The default volume is the smallest cube that holds every shape the default
/// sampler can draw, posed: 460 voxels across, so 7.1875 voxels per pixel at
/// 64x64 and 1.796875 voxels per depth unit.
struct RenderConfig {
    int width = 256;
    int height = 256;
    Point3 view_direction{-1.0, -1.0, -1.0};
    double view_lo = -98.0;
    double view_hi = 362.0;
    double surface_tolerance = 1e-3;
    double march_step = 0.5;
    double bisection_tolerance = 1e-4;
    int max_bisection_iterations = 60;

    double view_span() const noexcept { return view_hi - view_lo; }

    static RenderConfig with_size(int size) {
        RenderConfig cfg;
        cfg.width = size;
        cfg.height = size;
        return cfg;
    }
};

void validate(const RenderConfig& cfg);

/// Canonical one-line description; the digest of this text identifies a config.
std::string describe(const RenderConfig& cfg);
Digest render_digest(const RenderConfig& cfg);

/// Rotation R with R * (-view_direction) = +z. Rows are the screen axes and
/// the toward-viewer axis, all in shape coordinates.
Rotation3 view_rotation(const RenderConfig& cfg);

/// Frame coordinates of the center of pixel (col, row).
double pixel_x(const RenderConfig& cfg, int col);
double pixel_y(const RenderConfig& cfg, int row);

/// Stored depth <-> frame z coordinate of the hit.
double depth_to_z(const RenderConfig& cfg, double depth);
double z_to_depth(const RenderConfig& cfg, double z);

/// Implicit function of the posed (rendered) shape at a frame point.
double evaluate_posed(const SuperquadricParams& params, Point3 frame_point,
                      const RenderConfig& cfg);

/// Frame point -> shape-axis coordinates, rotating about the frame center.
/// A posed shape with center c becomes the unrotated shape centered at
/// to_shape_axes(c), so unrotated fitting works directly on these points.
Point3 to_shape_axes(Point3 frame_point, const RenderConfig& cfg);
Point3 from_shape_axes(Point3 shape_point, const RenderConfig& cfg);

/// Casts one orthographic ray per pixel. Rays that start inside the shape at
/// the near plane are clipped and record depth 256. Throws EvaluationError on
/// a non-finite implicit value; never returns a partially written image.
RangeImage render_range_image(const SuperquadricParams& params, const RenderConfig& cfg,
                              int threads = 1);

/// Distance in voxels from the near plane to the first hit for one pixel.
std::optional<double> trace_pixel(const SuperquadricParams& params, const RenderConfig& cfg,
                                  int col, int row);

/// One frame point (x, y, z) per nonzero pixel, in row-major order.
std::vector<Point3> range_image_to_points(const RangeImage& img, const RenderConfig& cfg);

/// True for stored depths produced by near-plane clipping rather than a hit.
inline bool is_clipped_depth(float depth) { return depth >= static_cast<float>(kFrameSize); }

/// The same test for a point returned by range_image_to_points.
inline bool is_clipped_point(Point3 p, const RenderConfig& cfg) { return p.z >= cfg.view_hi; }

}  // namespace sqr
