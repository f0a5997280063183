#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "chameleon/geometry.hpp"
#include "chameleon/scene.hpp"

namespace chameleon {

enum class Target { lsls, lste };

inline std::string_view to_string(Target t) { return t == Target::lsls ? "lsls" : "lste"; }

enum class EntityKind { Lane, TrafficElement };

/// Closed enumerations a primitive may return; values are the DSL literals.
struct EnumType {
    std::string_view name;
    std::vector<std::string_view> values;

    bool contains(std::string_view v) const { return std::find(values.begin(), values.end(), v) != values.end(); }
};

inline const EnumType& yes_no_enum() {
    static const EnumType t{"yes_no", {"yes", "no"}};
    return t;
}
inline const EnumType& tristate_enum() {
    static const EnumType t{"tristate", {"yes", "no", "unknown"}};
    return t;
}
inline const EnumType& lateral_enum() {
    static const EnumType t{"lateral", {"left", "right", "none"}};
    return t;
}
inline const EnumType& turn_enum() {
    static const EnumType t{"turn", {"left", "right", "straight"}};
    return t;
}
inline const EnumType& category_enum() {
    static const EnumType t{"category", {kTeCategoryNames.begin(), kTeCategoryNames.end()}};
    return t;
}
inline const EnumType& te_class_enum() {
    static const EnumType t{"te_class", {"light", "left_sign", "right_sign", "straight_sign"}};
    return t;
}

enum class TeClass { Light, LeftSign, RightSign, StraightSign };

inline TeClass te_class(TeCategory c) {
    switch (c) {
        case TeCategory::unknown_light:
        case TeCategory::red_light:
        case TeCategory::green_light:
        case TeCategory::yellow_light: return TeClass::Light;
        case TeCategory::go_straight_sign: return TeClass::StraightSign;
        case TeCategory::turn_left_sign:
        case TeCategory::no_left_turn_sign:
        case TeCategory::u_turn_sign:
        case TeCategory::no_u_turn_sign:
        case TeCategory::slight_left_sign: return TeClass::LeftSign;
        case TeCategory::turn_right_sign:
        case TeCategory::no_right_turn_sign:
        case TeCategory::slight_right_sign: return TeClass::RightSign;
    }
    return TeClass::Light;
}

/// Per-scene state shared by all primitive calls (the ego lane is resolved once).
class SceneContext {
public:
    explicit SceneContext(const Scene& scene, geometry::GeometryConfig cfg = {})
        : scene_(&scene), cfg_(cfg), ego_(geometry::self_localize(scene, cfg)) {}

    const Scene& scene() const { return *scene_; }
    const geometry::GeometryConfig& config() const { return cfg_; }
    std::optional<int> ego_lane() const { return ego_; }

private:
    const Scene* scene_;
    geometry::GeometryConfig cfg_;
    std::optional<int> ego_;
};

/// A bound primitive argument: index into the scene's lane or TE list.
struct EntityRef {
    EntityKind kind;
    std::size_t index;
};

using PrimitiveValue = std::variant<double, std::string_view>;

struct Primitive {
    std::string_view name;
    std::vector<EntityKind> params;
    const EnumType* enum_result = nullptr;  // null: numeric result
    std::string_view doc;
    PrimitiveValue (*fn)(const SceneContext&, std::span<const EntityRef>);

    bool numeric() const { return enum_result == nullptr; }

    std::string signature() const {
        std::string s = std::string(name) + "(";
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (i) s += ", ";
            s += params[i] == EntityKind::Lane ? "lane" : "traffic_element";
        }
        s += ") -> ";
        if (numeric()) {
            s += "number";
        } else {
            s += "{";
            for (std::size_t i = 0; i < enum_result->values.size(); ++i) {
                if (i) s += "|";
                s += enum_result->values[i];
            }
            s += "}";
        }
        return s;
    }
};

namespace detail {

inline const LaneSegment& lane_arg(const SceneContext& c, EntityRef r) { return c.scene().lanes[r.index]; }
inline const TrafficElement& te_arg(const SceneContext& c, EntityRef r) { return c.scene().traffic_elements[r.index]; }

inline std::string_view yes_no(bool b) { return b ? "yes" : "no"; }

}  // namespace detail

/// The closed world of callable functions. Order is the manifest order.
inline const std::vector<Primitive>& primitive_registry() {
    using K = EntityKind;
    using namespace detail;
    static const std::vector<Primitive> reg = {
        {"dist_end_start", {K::Lane, K::Lane}, nullptr,
         "Euclidean distance in meters from the end point of the first lane to the start point of the second lane.",
         [](const SceneContext& c, std::span<const EntityRef> a) -> PrimitiveValue {
             return geometry::endpoint_distance(lane_arg(c, a[0]), lane_arg(c, a[1]));
         }},
        {"heading_dev", {K::Lane, K::Lane}, nullptr,
         "Angle in degrees [0,180] between the first lane's final direction and the second lane's initial "
         "direction. Fails on a degenerate chord.",
         [](const SceneContext& c, std::span<const EntityRef> a) -> PrimitiveValue {
             return geometry::heading_deviation(lane_arg(c, a[0]), lane_arg(c, a[1]));
         }},
        {"frechet", {K::Lane, K::Lane}, nullptr, "Discrete Frechet distance in meters between two centerlines.",
         [](const SceneContext& c, std::span<const EntityRef> a) -> PrimitiveValue {
             return geometry::discrete_frechet(lane_arg(c, a[0]).centerline, lane_arg(c, a[1]).centerline);
         }},
        {"lateral", {K::Lane, K::Lane}, &lateral_enum(),
         "Whether the first lane lies left or right of the second lane; none if headings differ by 90 degrees "
         "or more, or the lanes overlap laterally.",
         [](const SceneContext& c, std::span<const EntityRef> a) -> PrimitiveValue {
             switch (geometry::lateral_order(lane_arg(c, a[0]), lane_arg(c, a[1]), c.config())) {
                 case geometry::LateralRelation::Left: return std::string_view("left");
                 case geometry::LateralRelation::Right: return std::string_view("right");
                 default: return std::string_view("none");
             }
         }},
        {"parallel", {K::Lane, K::Lane}, &yes_no_enum(),
         "Whether the two lanes are parallel neighbours (similar heading, one lane width or so apart, "
         "overlapping longitudinally).",
         [](const SceneContext& c, std::span<const EntityRef> a) -> PrimitiveValue {
             return yes_no(geometry::are_parallel(lane_arg(c, a[0]), lane_arg(c, a[1]), c.config()));
         }},
        {"length", {K::Lane}, nullptr, "Centerline arc length in meters.",
         [](const SceneContext& c, std::span<const EntityRef> a) -> PrimitiveValue {
             return geometry::arc_length(lane_arg(c, a[0]).centerline);
         }},
        {"ego_dev", {K::Lane}, nullptr,
         "Angle in degrees between the lane's start-to-end direction and the ego vehicle's forward axis.",
         [](const SceneContext& c, std::span<const EntityRef> a) -> PrimitiveValue {
             return geometry::ego_heading_deviation(lane_arg(c, a[0]));
         }},
        {"in_intersection", {K::Lane}, &tristate_enum(),
         "Whether at least half of the lane lies inside the intersection area; unknown when the area is not "
         "available.",
         [](const SceneContext& c, std::span<const EntityRef> a) -> PrimitiveValue {
             switch (geometry::is_in_intersection(lane_arg(c, a[0]), c.scene(), c.config())) {
                 case geometry::Tristate::Yes: return std::string_view("yes");
                 case geometry::Tristate::No: return std::string_view("no");
                 default: return std::string_view("unknown");
             }
         }},
        {"is_ego", {K::Lane}, &yes_no_enum(), "Whether the lane is the one the ego vehicle is driving on (self-localization).",
         [](const SceneContext& c, std::span<const EntityRef> a) -> PrimitiveValue {
             return yes_no(c.ego_lane() == lane_arg(c, a[0]).id);
         }},
        {"turn", {K::Lane}, &turn_enum(), "Turning direction of the lane from its first to its last chord.",
         [](const SceneContext& c, std::span<const EntityRef> a) -> PrimitiveValue {
             switch (geometry::turn_direction(lane_arg(c, a[0]), c.config())) {
                 case geometry::Turn::Left: return std::string_view("left");
                 case geometry::Turn::Right: return std::string_view("right");
                 default: return std::string_view("straight");
             }
         }},
        {"lane_confidence", {K::Lane}, nullptr, "Detection confidence of the lane in [0,1].",
         [](const SceneContext& c, std::span<const EntityRef> a) -> PrimitiveValue {
             return lane_arg(c, a[0]).confidence;
         }},
        {"category", {K::TrafficElement}, &category_enum(), "Category of the traffic element.",
         [](const SceneContext& c, std::span<const EntityRef> a) -> PrimitiveValue {
             return to_string(te_arg(c, a[0]).category);
         }},
        {"te_class", {K::TrafficElement}, &te_class_enum(),
         "Coarse class of the traffic element: light, left_sign, right_sign or straight_sign.",
         [](const SceneContext& c, std::span<const EntityRef> a) -> PrimitiveValue {
             return te_class_enum().values[static_cast<std::size_t>(te_class(te_arg(c, a[0]).category))];
         }},
        {"te_confidence", {K::TrafficElement}, nullptr, "Detection confidence of the traffic element in [0,1].",
         [](const SceneContext& c, std::span<const EntityRef> a) -> PrimitiveValue {
             return te_arg(c, a[0]).confidence;
         }},
    };
    return reg;
}

inline const Primitive* find_primitive(std::string_view name) {
    for (const auto& p : primitive_registry())
        if (p.name == name) return &p;
    return nullptr;
}

/// Machine-readable manifest, used verbatim in the synthesis prompt.
inline nlohmann::json registry_manifest() {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : primitive_registry())
        out.push_back({{"name", p.name}, {"signature", p.signature()}, {"doc", p.doc}});
    return out;
}

inline std::string registry_prompt_text() {
    std::string s = "Available functions (A is the subject lane, B the object lane or traffic element):\n";
    for (const auto& p : primitive_registry()) {
        s += "- ";
        s += p.signature();
        s += ": ";
        s += p.doc;
        s += "\n";
    }
    return s;
}

}  // namespace chameleon
