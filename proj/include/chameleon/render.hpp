#pragma once

#include <cmath>
#include <optional>

#include "chameleon/geometry.hpp"
#include "chameleon/image.hpp"
#include "chameleon/scene.hpp"

namespace chameleon::render {

struct HighlightSpec {
    std::optional<int> green_lane_id;
    std::optional<int> blue_lane_id;
    bool draw_arrows = false;
    bool draw_all_boundaries = true;
};

/// Raster parameters. The BEV window is centred on the ego, +x up, +y left.
struct RenderConfig {
    int bev_size_px = 512;
    double bev_extent_m = 100.0;
    double boundary_width_px = 2.0;
    double highlight_width_px = 8.0;
    double arrow_length_m = 5.0;
    double arrow_head_m = 1.5;
};

inline constexpr Rgb kGreenArrow{0, 110, 0};
inline constexpr Rgb kBlueArrow{0, 0, 110};

/// Fills every pixel whose centre lies within width/2 of segment (x0,y0)-(x1,y1),
/// coordinates in continuous pixel units. Aliased on purpose: output is exact.
inline void draw_segment(Image& img, double x0, double y0, double x1, double y1, double width, Rgb color) {
    const double r = width / 2.0;
    const double fx0 = std::min(x0, x1) - r, fx1 = std::max(x0, x1) + r;
    const double fy0 = std::min(y0, y1) - r, fy1 = std::max(y0, y1) + r;
    if (fx1 < 0 || fy1 < 0 || fx0 > img.width() || fy0 > img.height()) return;
    const int cx0 = std::max(0, static_cast<int>(std::floor(fx0)));
    const int cx1 = std::min(img.width() - 1, static_cast<int>(std::ceil(fx1)));
    const int cy0 = std::max(0, static_cast<int>(std::floor(fy0)));
    const int cy1 = std::min(img.height() - 1, static_cast<int>(std::ceil(fy1)));
    const double dx = x1 - x0, dy = y1 - y0;
    const double len2 = dx * dx + dy * dy;
    for (int py = cy0; py <= cy1; ++py) {
        for (int px = cx0; px <= cx1; ++px) {
            const double cx = px + 0.5, cy = py + 0.5;
            double t = len2 > 0 ? ((cx - x0) * dx + (cy - y0) * dy) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const double ex = x0 + t * dx - cx, ey = y0 + t * dy - cy;
            if (ex * ex + ey * ey <= r * r) img.set(px, py, color);
        }
    }
}

class BevMapper {
public:
    explicit BevMapper(const RenderConfig& cfg)
        : half_(cfg.bev_extent_m / 2.0), scale_(cfg.bev_size_px / cfg.bev_extent_m) {}
    /// (column, row) in continuous pixel units.
    std::pair<double, double> operator()(double x, double y) const {
        return {(half_ - y) * scale_, (half_ - x) * scale_};
    }

private:
    double half_;
    double scale_;
};

namespace detail {

inline void check_spec(const Scene& scene, const HighlightSpec& spec) {
    if (spec.green_lane_id && !scene.has_lane(*spec.green_lane_id))
        throw UnknownIdError("highlight: unknown lane id " + std::to_string(*spec.green_lane_id));
    if (spec.blue_lane_id && !scene.has_lane(*spec.blue_lane_id))
        throw UnknownIdError("highlight: unknown lane id " + std::to_string(*spec.blue_lane_id));
    if (spec.green_lane_id && spec.blue_lane_id && *spec.green_lane_id == *spec.blue_lane_id)
        throw Error("highlight: green and blue lane must differ");
}

inline void bev_polyline(Image& img, const BevMapper& map, const Polyline& line, double width, Rgb color) {
    for (std::size_t i = 1; i < line.size(); ++i) {
        const auto [x0, y0] = map(line[i - 1].x, line[i - 1].y);
        const auto [x1, y1] = map(line[i].x, line[i].y);
        draw_segment(img, x0, y0, x1, y1, width, color);
    }
}

inline void bev_arrow(Image& img, const BevMapper& map, const LaneSegment& lane, const RenderConfig& cfg, Rgb color) {
    const Point3 mid = geometry::arc_midpoint(lane.centerline);
    const auto near = geometry::nearest_on_polyline(lane.centerline, {mid.x, mid.y});
    const auto& a = lane.centerline[near.segment];
    const auto& b = lane.centerline[near.segment + 1];
    const double n = std::hypot(b.x - a.x, b.y - a.y);
    if (!(n > 0.0)) return;
    const double dx = (b.x - a.x) / n, dy = (b.y - a.y) / n;
    const double h = cfg.arrow_length_m / 2.0;
    const double tx = mid.x + h * dx, ty = mid.y + h * dy;
    const double sx = mid.x - h * dx, sy = mid.y - h * dy;
    auto stroke = [&](double ax, double ay, double bx, double by) {
        const auto [x0, y0] = map(ax, ay);
        const auto [x1, y1] = map(bx, by);
        draw_segment(img, x0, y0, x1, y1, cfg.boundary_width_px, color);
    };
    stroke(sx, sy, tx, ty);
    // head strokes at +-30 deg from the reversed direction
    const double c = std::cos(std::numbers::pi / 6.0), s = std::sin(std::numbers::pi / 6.0);
    const double rx = -dx, ry = -dy;
    stroke(tx, ty, tx + cfg.arrow_head_m * (c * rx - s * ry), ty + cfg.arrow_head_m * (s * rx + c * ry));
    stroke(tx, ty, tx + cfg.arrow_head_m * (c * rx + s * ry), ty + cfg.arrow_head_m * (-s * rx + c * ry));
}

}  // namespace detail

/// Top-down view: black centerlines, green/blue highlight strips, optional arrows.
inline Image render_bev(const Scene& scene, const HighlightSpec& spec, const RenderConfig& cfg = {}) {
    detail::check_spec(scene, spec);
    Image img(cfg.bev_size_px, cfg.bev_size_px, kWhite);
    const BevMapper map(cfg);
    for (const auto& lane : scene.lanes) {
        const bool highlighted = lane.id == spec.green_lane_id || lane.id == spec.blue_lane_id;
        if (spec.draw_all_boundaries || highlighted)
            detail::bev_polyline(img, map, lane.centerline, cfg.boundary_width_px, kBlack);
    }
    if (spec.green_lane_id)
        detail::bev_polyline(img, map, scene.lane(*spec.green_lane_id).centerline, cfg.highlight_width_px, kGreen);
    if (spec.blue_lane_id)
        detail::bev_polyline(img, map, scene.lane(*spec.blue_lane_id).centerline, cfg.highlight_width_px, kBlue);
    if (spec.draw_arrows) {
        if (spec.green_lane_id) detail::bev_arrow(img, map, scene.lane(*spec.green_lane_id), cfg, kGreenArrow);
        if (spec.blue_lane_id) detail::bev_arrow(img, map, scene.lane(*spec.blue_lane_id), cfg, kBlueArrow);
    }
    return img;
}

namespace detail {

/// Projects a polyline with near-plane clipping in camera space, then strokes it.
inline void pv_polyline(Image& img, const CameraModel& cam, const Polyline& line, double width, Rgb color) {
    for (std::size_t i = 1; i < line.size(); ++i) {
        auto a = geometry::to_camera(line[i - 1], cam);
        auto b = geometry::to_camera(line[i], cam);
        const bool va = a[2] > geometry::kMinDepth;
        const bool vb = b[2] > geometry::kMinDepth;
        if (!va && !vb) continue;
        if (va != vb) {
            const double t = (geometry::kMinDepth + 1e-6 - a[2]) / (b[2] - a[2]);
            std::array<double, 3> c{};
            for (int k = 0; k < 3; ++k) c[k] = a[k] + t * (b[k] - a[k]);
            (va ? b : a) = c;
        }
        const auto pa = geometry::project_camera_point(a, cam);
        const auto pb = geometry::project_camera_point(b, cam);
        draw_segment(img, pa.u, pa.v, pb.u, pb.v, width, color);
    }
}

}  // namespace detail

/// Front perspective view at the camera resolution, on blank or supplied background.
inline Image render_pv(const Scene& scene, const HighlightSpec& spec, const RenderConfig& cfg = {},
                       const Image* background = nullptr) {
    detail::check_spec(scene, spec);
    if (!scene.front_camera) throw Error("render_pv: scene has no front camera");
    const auto& cam = *scene.front_camera;
    Image img = background ? scale_nearest(*background, cam.width(), cam.height())
                           : Image(cam.width(), cam.height(), kWhite);
    for (const auto& lane : scene.lanes) {
        const bool highlighted = lane.id == spec.green_lane_id || lane.id == spec.blue_lane_id;
        if (spec.draw_all_boundaries || highlighted)
            detail::pv_polyline(img, cam, lane.centerline, cfg.boundary_width_px, kBlack);
    }
    if (spec.green_lane_id)
        detail::pv_polyline(img, cam, scene.lane(*spec.green_lane_id).centerline, cfg.highlight_width_px, kGreen);
    if (spec.blue_lane_id)
        detail::pv_polyline(img, cam, scene.lane(*spec.blue_lane_id).centerline, cfg.highlight_width_px, kBlue);
    return img;
}

}  // namespace chameleon::render
