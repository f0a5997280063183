#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "chameleon/scene.hpp"

namespace chameleon {

using json = nlohmann::json;

/// A scene file: the detections plus the optional ground truth it may carry.
struct SceneDocument {
    Scene scene;
    std::optional<GroundTruthTopology> ground_truth;

    friend bool operator==(const SceneDocument&, const SceneDocument&) = default;
};

namespace detail {

inline const json& require(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) throw SchemaError(path, "expected object");
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(path + "." + key, "missing field");
    return *it;
}

inline double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw SchemaError(path, "expected number");
    return j.get<double>();
}

inline int as_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw SchemaError(path, "expected integer");
    return j.get<int>();
}

inline const json& as_array(const json& j, const std::string& path, std::optional<std::size_t> arity = {}) {
    if (!j.is_array()) throw SchemaError(path, "expected array");
    if (arity && j.size() != *arity)
        throw SchemaError(path, "expected " + std::to_string(*arity) + " elements, got " + std::to_string(j.size()));
    return j;
}

inline Mat3 parse_mat3(const json& j, const std::string& path) {
    Mat3 m{};
    as_array(j, path, 3);
    for (std::size_t r = 0; r < 3; ++r) {
        const auto rp = path + "[" + std::to_string(r) + "]";
        as_array(j[r], rp, 3);
        for (std::size_t c = 0; c < 3; ++c) m[r][c] = as_number(j[r][c], rp + "[" + std::to_string(c) + "]");
    }
    return m;
}

inline Matrix<std::uint8_t> parse_binary_matrix(const json& j, const std::string& path, std::size_t rows,
                                                std::size_t cols) {
    as_array(j, path, rows);
    Matrix<std::uint8_t> m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto rp = path + "[" + std::to_string(r) + "]";
        as_array(j[r], rp, cols);
        for (std::size_t c = 0; c < cols; ++c) {
            const int v = as_int(j[r][c], rp + "[" + std::to_string(c) + "]");
            if (v != 0 && v != 1) throw SchemaError(rp + "[" + std::to_string(c) + "]", "expected 0 or 1");
            m(r, c) = static_cast<std::uint8_t>(v);
        }
    }
    return m;
}

inline json mat3_json(const Mat3& m) {
    json j = json::array();
    for (const auto& row : m) j.push_back(json::array({row[0], row[1], row[2]}));
    return j;
}

template <typename T>
json matrix_json(const Matrix<T>& m) {
    json j = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        j.push_back(std::move(row));
    }
    return j;
}

}  // namespace detail

inline SceneDocument scene_document_from_json(const json& doc) {
    using namespace detail;
    SceneDocument out;
    Scene& s = out.scene;
    const auto& fid = require(doc, "frame_id", "");
    if (!fid.is_string()) throw SchemaError(".frame_id", "expected string");
    s.frame_id = fid.get<std::string>();

    const auto& lanes = as_array(require(doc, "lanes", ""), ".lanes");
    std::set<int> ids;
    for (std::size_t i = 0; i < lanes.size(); ++i) {
        const auto p = ".lanes[" + std::to_string(i) + "]";
        LaneSegment lane;
        lane.id = as_int(require(lanes[i], "id", p), p + ".id");
        if (!ids.insert(lane.id).second) throw SchemaError(p + ".id", "duplicate id " + std::to_string(lane.id));
        const auto& cl = as_array(require(lanes[i], "centerline", p), p + ".centerline");
        if (cl.size() < 2) throw SchemaError(p + ".centerline", "needs at least 2 points");
        for (std::size_t k = 0; k < cl.size(); ++k) {
            const auto pp = p + ".centerline[" + std::to_string(k) + "]";
            as_array(cl[k], pp, 3);
            lane.centerline.push_back({as_number(cl[k][0], pp + "[0]"), as_number(cl[k][1], pp + "[1]"),
                                       as_number(cl[k][2], pp + "[2]")});
        }
        lane.confidence = as_number(require(lanes[i], "confidence", p), p + ".confidence");
        s.lanes.push_back(std::move(lane));
    }

    const auto& tes = as_array(require(doc, "traffic_elements", ""), ".traffic_elements");
    ids.clear();
    for (std::size_t i = 0; i < tes.size(); ++i) {
        const auto p = ".traffic_elements[" + std::to_string(i) + "]";
        TrafficElement te;
        te.id = as_int(require(tes[i], "id", p), p + ".id");
        if (!ids.insert(te.id).second) throw SchemaError(p + ".id", "duplicate id " + std::to_string(te.id));
        const auto& bb = as_array(require(tes[i], "bbox", p), p + ".bbox", 4);
        te.bbox = {as_number(bb[0], p + ".bbox[0]"), as_number(bb[1], p + ".bbox[1]"),
                   as_number(bb[2], p + ".bbox[2]"), as_number(bb[3], p + ".bbox[3]")};
        const auto& cat = require(tes[i], "category", p);
        if (!cat.is_string()) throw SchemaError(p + ".category", "expected string");
        auto c = te_category_from_string(cat.get<std::string>());
        if (!c) throw SchemaError(p + ".category", "unknown category '" + cat.get<std::string>() + "'");
        te.category = *c;
        te.confidence = as_number(require(tes[i], "confidence", p), p + ".confidence");
        s.traffic_elements.push_back(te);
    }

    const auto& cams = require(doc, "cameras", "");
    const auto& front = require(cams, "front", ".cameras");
    CameraModel cam;
    cam.intrinsics = parse_mat3(require(front, "intrinsics", ".cameras.front"), ".cameras.front.intrinsics");
    cam.rotation = parse_mat3(require(front, "rotation", ".cameras.front"), ".cameras.front.rotation");
    const auto& t = as_array(require(front, "translation", ".cameras.front"), ".cameras.front.translation", 3);
    for (std::size_t k = 0; k < 3; ++k)
        cam.translation[k] = as_number(t[k], ".cameras.front.translation[" + std::to_string(k) + "]");
    s.front_camera = cam;

    if (auto it = doc.find("intersection_polygon"); it != doc.end() && !it->is_null()) {
        const auto& poly = as_array(*it, ".intersection_polygon");
        Polygon2 pg;
        for (std::size_t k = 0; k < poly.size(); ++k) {
            const auto pp = ".intersection_polygon[" + std::to_string(k) + "]";
            as_array(poly[k], pp, 2);
            pg.push_back({as_number(poly[k][0], pp + "[0]"), as_number(poly[k][1], pp + "[1]")});
        }
        s.intersection_polygon = std::move(pg);
    }

    if (auto violations = validate_scene(s); !violations.empty()) throw SchemaError("", violations.front());

    if (auto it = doc.find("ground_truth"); it != doc.end() && !it->is_null()) {
        GroundTruthTopology gt;
        gt.lsls = parse_binary_matrix(require(*it, "lsls", ".ground_truth"), ".ground_truth.lsls", s.lane_count(),
                                      s.lane_count());
        gt.lste = parse_binary_matrix(require(*it, "lste", ".ground_truth"), ".ground_truth.lste", s.lane_count(),
                                      s.te_count());
        if (auto v = validate_ground_truth(gt, s); !v.empty()) throw SchemaError(".ground_truth", v.front());
        out.ground_truth = std::move(gt);
    }
    return out;
}

/// Parses and validates a scene document; ground truth, if present, is dropped.
inline Scene parse_scene(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("", std::string("malformed JSON: ") + e.what());
    }
    return scene_document_from_json(doc).scene;
}

inline SceneDocument parse_scene_document(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("", std::string("malformed JSON: ") + e.what());
    }
    return scene_document_from_json(doc);
}

inline json scene_to_json(const Scene& s, const std::optional<GroundTruthTopology>& gt = std::nullopt) {
    json doc;
    doc["frame_id"] = s.frame_id;
    doc["lanes"] = json::array();
    for (const auto& lane : s.lanes) {
        json cl = json::array();
        for (const auto& p : lane.centerline) cl.push_back(json::array({p.x, p.y, p.z}));
        doc["lanes"].push_back({{"id", lane.id}, {"centerline", std::move(cl)}, {"confidence", lane.confidence}});
    }
    doc["traffic_elements"] = json::array();
    for (const auto& te : s.traffic_elements) {
        doc["traffic_elements"].push_back(
            {{"id", te.id},
             {"bbox", json::array({te.bbox.u_min, te.bbox.v_min, te.bbox.u_max, te.bbox.v_max})},
             {"category", std::string(to_string(te.category))},
             {"confidence", te.confidence}});
    }
    if (s.front_camera) {
        const auto& c = *s.front_camera;
        doc["cameras"]["front"] = {{"intrinsics", detail::mat3_json(c.intrinsics)},
                                   {"rotation", detail::mat3_json(c.rotation)},
                                   {"translation", json::array({c.translation[0], c.translation[1], c.translation[2]})}};
    } else {
        doc["cameras"] = json::object();
    }
    if (s.intersection_polygon) {
        json poly = json::array();
        for (const auto& p : *s.intersection_polygon) poly.push_back(json::array({p.x, p.y}));
        doc["intersection_polygon"] = std::move(poly);
    }
    if (gt) doc["ground_truth"] = {{"lsls", detail::matrix_json(gt->lsls)}, {"lste", detail::matrix_json(gt->lste)}};
    return doc;
}

inline std::string serialize_scene(const Scene& s, const std::optional<GroundTruthTopology>& gt = std::nullopt) {
    return scene_to_json(s, gt).dump(1) + "\n";
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace chameleon
