#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "chameleon/error.hpp"

namespace chameleon {

/// Ego frame: x forward, y left, z up, origin at the rear axle. Meters.
struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Point3&, const Point3&) = default;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

using Polyline = std::vector<Point3>;
using Polygon2 = std::vector<Point2>;

/// Directed lane piece; first point is the segment start in the direction of travel.
struct LaneSegment {
    int id = 0;
    Polyline centerline;
    double confidence = 1.0;

    const Point3& start() const { return centerline.front(); }
    const Point3& end() const { return centerline.back(); }

    friend bool operator==(const LaneSegment&, const LaneSegment&) = default;
};

enum class TeCategory {
    unknown_light,
    red_light,
    green_light,
    yellow_light,
    go_straight_sign,
    turn_left_sign,
    turn_right_sign,
    no_left_turn_sign,
    no_right_turn_sign,
    u_turn_sign,
    no_u_turn_sign,
    slight_left_sign,
    slight_right_sign,
};

inline constexpr std::array<std::string_view, 13> kTeCategoryNames = {
    "unknown_light",     "red_light",          "green_light",    "yellow_light",
    "go_straight_sign",  "turn_left_sign",     "turn_right_sign", "no_left_turn_sign",
    "no_right_turn_sign", "u_turn_sign",       "no_u_turn_sign", "slight_left_sign",
    "slight_right_sign",
};

inline std::string_view to_string(TeCategory c) {
    return kTeCategoryNames[static_cast<std::size_t>(c)];
}

inline std::optional<TeCategory> te_category_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kTeCategoryNames.size(); ++i) {
        if (kTeCategoryNames[i] == s) return static_cast<TeCategory>(i);
    }
    return std::nullopt;
}

inline bool is_light(TeCategory c) {
    return c == TeCategory::unknown_light || c == TeCategory::red_light ||
           c == TeCategory::green_light || c == TeCategory::yellow_light;
}

/// Pixel box in the front camera image.
struct BBox {
    double u_min = 0.0;
    double v_min = 0.0;
    double u_max = 0.0;
    double v_max = 0.0;

    friend bool operator==(const BBox&, const BBox&) = default;
};

struct TrafficElement {
    int id = 0;
    BBox bbox;
    TeCategory category = TeCategory::unknown_light;
    double confidence = 1.0;

    friend bool operator==(const TrafficElement&, const TrafficElement&) = default;
};

using Mat3 = std::array<std::array<double, 3>, 3>;

/// Pinhole camera; p_cam = rotation * p_ego + translation, camera z looks forward.
/// The image size is taken as twice the principal point.
struct CameraModel {
    Mat3 intrinsics{};
    Mat3 rotation{};
    std::array<double, 3> translation{};

    int width() const { return static_cast<int>(std::lround(2.0 * intrinsics[0][2])); }
    int height() const { return static_cast<int>(std::lround(2.0 * intrinsics[1][2])); }

    friend bool operator==(const CameraModel&, const CameraModel&) = default;
};

struct Scene {
    std::string frame_id;
    std::vector<LaneSegment> lanes;
    std::vector<TrafficElement> traffic_elements;
    std::optional<CameraModel> front_camera;
    std::optional<Polygon2> intersection_polygon;

    std::size_t lane_count() const { return lanes.size(); }
    std::size_t te_count() const { return traffic_elements.size(); }

    /// Index of the lane with the given id, or throws UnknownIdError.
    std::size_t lane_index(int id) const {
        for (std::size_t i = 0; i < lanes.size(); ++i)
            if (lanes[i].id == id) return i;
        throw UnknownIdError("unknown lane id " + std::to_string(id));
    }
    std::size_t te_index(int id) const {
        for (std::size_t i = 0; i < traffic_elements.size(); ++i)
            if (traffic_elements[i].id == id) return i;
        throw UnknownIdError("unknown traffic element id " + std::to_string(id));
    }
    const LaneSegment& lane(int id) const { return lanes[lane_index(id)]; }
    const TrafficElement& traffic_element(int id) const { return traffic_elements[te_index(id)]; }
    bool has_lane(int id) const {
        return std::any_of(lanes.begin(), lanes.end(), [id](const auto& l) { return l.id == id; });
    }

    friend bool operator==(const Scene&, const Scene&) = default;
};

/// Dense row-major matrix; used for both binary ground truth and scores.
template <typename T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    const std::vector<T>& data() const { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

/// Indices follow the lane / traffic-element order of the scene it belongs to.
struct GroundTruthTopology {
    Matrix<std::uint8_t> lsls;
    Matrix<std::uint8_t> lste;

    friend bool operator==(const GroundTruthTopology&, const GroundTruthTopology&) = default;
};

struct TopologyMatrices {
    Matrix<double> lsls;
    Matrix<double> lste;

    friend bool operator==(const TopologyMatrices&, const TopologyMatrices&) = default;
};

namespace detail {
inline bool finite(const Point3& p) {
    return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}
}  // namespace detail

/// Every broken type invariant, each naming the offending entity. Empty means valid.
inline std::vector<std::string> validate_scene(const Scene& scene) {
    std::vector<std::string> out;
    std::set<int> seen;
    for (const auto& lane : scene.lanes) {
        const std::string who = "lane " + std::to_string(lane.id);
        if (!seen.insert(lane.id).second) out.push_back(who + ": duplicate id");
        if (lane.centerline.size() < 2) out.push_back(who + ": centerline needs at least 2 points");
        for (std::size_t i = 0; i < lane.centerline.size(); ++i) {
            if (!detail::finite(lane.centerline[i])) {
                out.push_back(who + ": non-finite point " + std::to_string(i));
            } else if (i > 0 && lane.centerline[i] == lane.centerline[i - 1]) {
                out.push_back(who + ": repeated point " + std::to_string(i));
            }
        }
        if (!(lane.confidence >= 0.0 && lane.confidence <= 1.0))
            out.push_back(who + ": confidence out of range");
    }
    seen.clear();
    for (const auto& te : scene.traffic_elements) {
        const std::string who = "traffic element " + std::to_string(te.id);
        if (!seen.insert(te.id).second) out.push_back(who + ": duplicate id");
        const auto& b = te.bbox;
        if (!(b.u_min < b.u_max) || !(b.v_min < b.v_max)) out.push_back(who + ": degenerate bbox");
        if (!(te.confidence >= 0.0 && te.confidence <= 1.0))
            out.push_back(who + ": confidence out of range");
    }
    if (!scene.front_camera) {
        out.push_back("cameras: front camera missing");
    } else {
        const auto& k = scene.front_camera->intrinsics;
        const double det = k[0][0] * (k[1][1] * k[2][2] - k[1][2] * k[2][1]) -
                           k[0][1] * (k[1][0] * k[2][2] - k[1][2] * k[2][0]) +
                           k[0][2] * (k[1][0] * k[2][1] - k[1][1] * k[2][0]);
        if (!(std::abs(det) > 1e-12)) out.push_back("cameras.front: intrinsics not invertible");
        const auto& r = scene.front_camera->rotation;
        double worst = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double dot = 0.0;
                for (int c = 0; c < 3; ++c) dot += r[c][i] * r[c][j];
                worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
            }
        if (!(worst < 1e-6)) out.push_back("cameras.front: rotation not orthonormal");
        if (scene.front_camera->width() <= 0 || scene.front_camera->height() <= 0)
            out.push_back("cameras.front: principal point gives empty image");
    }
    if (scene.intersection_polygon && scene.intersection_polygon->size() < 3)
        out.push_back("intersection_polygon: needs at least 3 vertices");
    return out;
}

inline std::vector<std::string> validate_ground_truth(const GroundTruthTopology& gt, const Scene& scene) {
    std::vector<std::string> out;
    const auto m = scene.lane_count();
    const auto n = scene.te_count();
    if (gt.lsls.rows() != m || gt.lsls.cols() != m) out.push_back("ground_truth.lsls: dimension mismatch");
    if (gt.lste.rows() != m || gt.lste.cols() != n) out.push_back("ground_truth.lste: dimension mismatch");
    if (gt.lsls.rows() == gt.lsls.cols())
        for (std::size_t i = 0; i < gt.lsls.rows(); ++i)
            if (gt.lsls(i, i) != 0) out.push_back("ground_truth.lsls: nonzero diagonal at " + std::to_string(i));
    return out;
}

}  // namespace chameleon
