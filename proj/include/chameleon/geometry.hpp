#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "chameleon/scene.hpp"

namespace chameleon::geometry {

/// Thresholds for the primitive registry. Defaults are the shipped configuration.
struct GeometryConfig {
    double parallel_max_heading_deg = 20.0;
    double parallel_min_offset_m = 2.0;
    double parallel_max_offset_m = 8.0;
    double parallel_min_overlap = 0.5;
    double ego_max_heading_deg = 45.0;
    double ego_max_lateral_m = 2.5;
    double lateral_min_offset_m = 0.5;
    double intersection_min_fraction = 0.5;
    double turn_min_deg = 45.0;
};

/// Unit direction in the BEV plane.
struct Heading {
    double x = 1.0;
    double y = 0.0;
};

enum class LateralRelation { Left, Right, None };
enum class Tristate { Yes, No, Unknown };
enum class Turn { Left, Right, Straight };

inline double norm2(double x, double y) { return std::hypot(x, y); }

inline double distance(const Point3& a, const Point3& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

inline double cross2(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

inline Heading chord_heading(const Point3& from, const Point3& to, int lane_id) {
    const double dx = to.x - from.x, dy = to.y - from.y;
    const double n = norm2(dx, dy);
    if (!(n > 1e-9)) throw GeometryError("lane " + std::to_string(lane_id) + ": degenerate heading chord");
    return {dx / n, dy / n};
}

inline Heading start_heading(const LaneSegment& l) { return chord_heading(l.centerline[0], l.centerline[1], l.id); }

inline Heading end_heading(const LaneSegment& l) {
    const auto n = l.centerline.size();
    return chord_heading(l.centerline[n - 2], l.centerline[n - 1], l.id);
}

/// Start-to-end chord direction.
inline Heading overall_heading(const LaneSegment& l) { return chord_heading(l.start(), l.end(), l.id); }

inline double angle_deg(const Heading& a, const Heading& b) {
    const double dot = std::clamp(a.x * b.x + a.y * b.y, -1.0, 1.0);
    return std::acos(dot) * 180.0 / std::numbers::pi;
}

/// Parent end point to child start point.
inline double endpoint_distance(const LaneSegment& parent, const LaneSegment& child) {
    return distance(parent.end(), child.start());
}

/// Angle between the parent's last chord and the child's first chord, degrees in [0, 180].
inline double heading_deviation(const LaneSegment& parent, const LaneSegment& child) {
    return angle_deg(end_heading(parent), start_heading(child));
}

/// Deviation of the overall chord from the ego forward axis (+x).
inline double ego_heading_deviation(const LaneSegment& l) { return angle_deg(overall_heading(l), Heading{1.0, 0.0}); }

inline double arc_length(std::span<const Point3> poly) {
    double s = 0.0;
    for (std::size_t i = 1; i < poly.size(); ++i) s += distance(poly[i - 1], poly[i]);
    return s;
}

inline Point3 arc_midpoint(std::span<const Point3> poly) {
    const double half = arc_length(poly) / 2.0;
    double s = 0.0;
    for (std::size_t i = 1; i < poly.size(); ++i) {
        const double d = distance(poly[i - 1], poly[i]);
        if (s + d >= half && d > 0.0) {
            const double t = (half - s) / d;
            const auto& a = poly[i - 1];
            const auto& b = poly[i];
            return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.z + t * (b.z - a.z)};
        }
        s += d;
    }
    return poly.back();
}

struct NearestPoint {
    double distance = std::numeric_limits<double>::infinity();
    Point2 point;
    std::size_t segment = 0;
};

/// Closest point of a polyline to `p`, in the BEV plane. First segment wins ties.
inline NearestPoint nearest_on_polyline(std::span<const Point3> poly, Point2 p) {
    NearestPoint best;
    for (std::size_t i = 1; i < poly.size(); ++i) {
        const double ax = poly[i - 1].x, ay = poly[i - 1].y;
        const double dx = poly[i].x - ax, dy = poly[i].y - ay;
        const double len2 = dx * dx + dy * dy;
        double t = len2 > 0.0 ? ((p.x - ax) * dx + (p.y - ay) * dy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const Point2 q{ax + t * dx, ay + t * dy};
        const double d = norm2(p.x - q.x, p.y - q.y);
        if (d < best.distance) best = {d, q, i - 1};
    }
    return best;
}

/// Left if `a` lies left of `b`'s directed centerline (signed cross product at the
/// point of `b` nearest `a`'s arc midpoint). None for headings >= 90 deg apart or
/// offsets below the configured minimum.
inline LateralRelation lateral_order(const LaneSegment& a, const LaneSegment& b, const GeometryConfig& cfg = {}) {
    if (angle_deg(overall_heading(a), overall_heading(b)) >= 90.0) return LateralRelation::None;
    const Point3 mid = arc_midpoint(a.centerline);
    const auto near = nearest_on_polyline(b.centerline, {mid.x, mid.y});
    if (near.distance < cfg.lateral_min_offset_m) return LateralRelation::None;
    const auto& s0 = b.centerline[near.segment];
    const auto& s1 = b.centerline[near.segment + 1];
    const double c = cross2(s1.x - s0.x, s1.y - s0.y, mid.x - near.point.x, mid.y - near.point.y);
    if (c > 0.0) return LateralRelation::Left;
    if (c < 0.0) return LateralRelation::Right;
    return LateralRelation::None;
}

inline bool point_in_polygon(Point2 p, std::span<const Point2> poly) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const auto& a = poly[i];
        const auto& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if (p.x < x) inside = !inside;
        }
    }
    return inside;
}

/// Fraction of centerline arc length (3D) whose BEV projection is inside the polygon.
/// Exact: each piece is split at its crossings with polygon edges.
inline double fraction_inside(std::span<const Point3> line, std::span<const Point2> poly) {
    const double total = arc_length(line);
    if (total <= 0.0 || poly.size() < 3) return 0.0;
    double inside = 0.0;
    for (std::size_t i = 1; i < line.size(); ++i) {
        const auto& p = line[i - 1];
        const auto& q = line[i];
        const double rx = q.x - p.x, ry = q.y - p.y;
        std::vector<double> cuts{0.0, 1.0};
        for (std::size_t k = 0; k < poly.size(); ++k) {
            const auto& a = poly[k];
            const auto& b = poly[(k + 1) % poly.size()];
            const double sx = b.x - a.x, sy = b.y - a.y;
            const double den = cross2(rx, ry, sx, sy);
            if (std::abs(den) < 1e-15) continue;
            const double t = cross2(a.x - p.x, a.y - p.y, sx, sy) / den;
            const double u = cross2(a.x - p.x, a.y - p.y, rx, ry) / den;
            if (t > 0.0 && t < 1.0 && u >= 0.0 && u <= 1.0) cuts.push_back(t);
        }
        std::sort(cuts.begin(), cuts.end());
        const double len = distance(p, q);
        for (std::size_t c = 1; c < cuts.size(); ++c) {
            const double tm = 0.5 * (cuts[c - 1] + cuts[c]);
            if (point_in_polygon({p.x + tm * rx, p.y + tm * ry}, poly)) inside += (cuts[c] - cuts[c - 1]) * len;
        }
    }
    return inside / total;
}

/// Unknown when the scene carries no intersection polygon.
inline Tristate is_in_intersection(const LaneSegment& lane, const Scene& scene, const GeometryConfig& cfg = {}) {
    if (!scene.intersection_polygon) return Tristate::Unknown;
    return fraction_inside(lane.centerline, *scene.intersection_polygon) >= cfg.intersection_min_fraction
               ? Tristate::Yes
               : Tristate::No;
}

/// Symmetric parallel-neighbour test: chord headings within the gate, midpoint
/// offset (normal to the mean axis) inside the lateral band, and projected
/// extents overlapping by at least the configured ratio of the shorter one.
inline bool are_parallel(const LaneSegment& a, const LaneSegment& b, const GeometryConfig& cfg = {}) {
    const Heading ha = overall_heading(a);
    const Heading hb = overall_heading(b);
    if (!(angle_deg(ha, hb) < cfg.parallel_max_heading_deg)) return false;
    const double ux0 = ha.x + hb.x, uy0 = ha.y + hb.y;
    const double un = norm2(ux0, uy0);
    const double ux = ux0 / un, uy = uy0 / un;
    const Point3 ma = arc_midpoint(a.centerline);
    const Point3 mb = arc_midpoint(b.centerline);
    const double offset = std::abs(cross2(ux, uy, mb.x - ma.x, mb.y - ma.y));
    if (offset < cfg.parallel_min_offset_m || offset > cfg.parallel_max_offset_m) return false;
    auto extent = [&](const LaneSegment& l) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& p : l.centerline) {
            const double s = p.x * ux + p.y * uy;
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
        return std::pair{lo, hi};
    };
    const auto [alo, ahi] = extent(a);
    const auto [blo, bhi] = extent(b);
    const double shorter = std::min(ahi - alo, bhi - blo);
    if (!(shorter > 0.0)) return false;
    const double overlap = std::min(ahi, bhi) - std::max(alo, blo);
    return overlap / shorter >= cfg.parallel_min_overlap;
}

inline std::set<int> parallel_lanes(const Scene& scene, int lane_id, const GeometryConfig& cfg = {}) {
    const LaneSegment& self = scene.lane(lane_id);
    std::set<int> out;
    for (const auto& other : scene.lanes) {
        if (other.id == lane_id) continue;
        try {
            if (are_parallel(self, other, cfg)) out.insert(other.id);
        } catch (const GeometryError&) {
        }
    }
    return out;
}

/// Lane under the ego origin: smallest BEV distance among lanes whose local
/// heading at the nearest point is close to +x. Lower id wins exact ties.
inline std::optional<int> self_localize(const Scene& scene, const GeometryConfig& cfg = {}) {
    std::optional<int> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& lane : scene.lanes) {
        const auto near = nearest_on_polyline(lane.centerline, {0.0, 0.0});
        if (!(near.distance < cfg.ego_max_lateral_m)) continue;
        const auto& a = lane.centerline[near.segment];
        const auto& b = lane.centerline[near.segment + 1];
        const double n = norm2(b.x - a.x, b.y - a.y);
        if (!(n > 1e-9)) continue;
        if (!(angle_deg({(b.x - a.x) / n, (b.y - a.y) / n}, {1.0, 0.0}) < cfg.ego_max_heading_deg)) continue;
        if (near.distance < best_d || (near.distance == best_d && lane.id < *best)) {
            best = lane.id;
            best_d = near.distance;
        }
    }
    return best;
}

/// Left/Right when the first and last chords differ by more than the turn gate.
inline Turn turn_direction(const LaneSegment& l, const GeometryConfig& cfg = {}) {
    const Heading a = start_heading(l);
    const Heading b = end_heading(l);
    if (angle_deg(a, b) <= cfg.turn_min_deg) return Turn::Straight;
    return cross2(a.x, a.y, b.x, b.y) > 0.0 ? Turn::Left : Turn::Right;
}

/// Discrete Fréchet distance (3D Euclidean ground metric), O(|a||b|) dynamic program.
inline double discrete_frechet(std::span<const Point3> a, std::span<const Point3> b) {
    if (a.empty() || b.empty()) throw GeometryError("discrete_frechet: empty polyline");
    const std::size_t n = a.size(), m = b.size();
    std::vector<double> prev(m), cur(m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double d = distance(a[i], b[j]);
            if (i == 0 && j == 0) cur[j] = d;
            else if (i == 0) cur[j] = std::max(cur[j - 1], d);
            else if (j == 0) cur[j] = std::max(prev[0], d);
            else cur[j] = std::max(std::min({prev[j], prev[j - 1], cur[j - 1]}), d);
        }
        std::swap(prev, cur);
    }
    return prev[m - 1];
}

struct PixelPoint {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;
    bool visible = false;
};

inline constexpr double kMinDepth = 0.1;

inline std::array<double, 3> to_camera(const Point3& p, const CameraModel& cam) {
    const auto& r = cam.rotation;
    std::array<double, 3> c{};
    for (int i = 0; i < 3; ++i) c[i] = r[i][0] * p.x + r[i][1] * p.y + r[i][2] * p.z + cam.translation[i];
    return c;
}

inline PixelPoint project_camera_point(const std::array<double, 3>& c, const CameraModel& cam) {
    const auto& k = cam.intrinsics;
    PixelPoint out;
    out.depth = c[2];
    out.visible = c[2] > kMinDepth;
    const double h0 = k[0][0] * c[0] + k[0][1] * c[1] + k[0][2] * c[2];
    const double h1 = k[1][0] * c[0] + k[1][1] * c[1] + k[1][2] * c[2];
    const double h2 = k[2][0] * c[0] + k[2][1] * c[1] + k[2][2] * c[2];
    if (out.visible) {
        out.u = h0 / h2;
        out.v = h1 / h2;
    }
    return out;
}

/// Pinhole projection; points at camera depth <= 0.1 m are flagged invisible.
inline std::vector<PixelPoint> project_pv(std::span<const Point3> poly, const CameraModel& cam) {
    std::vector<PixelPoint> out;
    out.reserve(poly.size());
    for (const auto& p : poly) out.push_back(project_camera_point(to_camera(p, cam), cam));
    return out;
}

}  // namespace chameleon::geometry
