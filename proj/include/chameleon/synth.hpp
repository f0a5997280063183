#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chameleon/scene.hpp"

namespace chameleon::synth {

enum class Layout { corridor, four_way_intersection };

/// Which lanes a generated traffic element is tied to in the ground truth.
enum class TeRule {
    automatic,           // derived from the category
    approach_lanes,      // every ego-direction lane entering the intersection that can go straight
    leftmost_approach,
    rightmost_approach,
    ego_chain,           // the ego segment and its successors up to the intersection
};

struct TeSpec {
    TeCategory category = TeCategory::green_light;
    TeRule rule = TeRule::automatic;
};

struct NoiseConfig {
    double endpoint_sigma_m = 0.0;
    double dropout = 0.0;
};

struct SynthConfig {
    Layout layout = Layout::corridor;
    int lanes_per_direction = 1;
    int segments = 3;              // per lane chain (per approach and per exit at intersections)
    double segment_length_m = 10.0;
    double lane_width_m = 3.5;
    int points_per_segment = 5;
    bool opposite_direction = false;       // corridor: add the oncoming carriageway
    bool ego_passed_intersection = false;  // four-way: ego already beyond the junction
    bool right_turn_only_rightmost = false;
    std::optional<int> ego_lane_index;     // 0 = leftmost; default is the middle lane
    double ego_to_junction_m = 12.0;
    std::vector<TeSpec> te_spec;
    NoiseConfig noise;
};

inline std::vector<std::string> validate_config(const SynthConfig& c) {
    std::vector<std::string> out;
    if (c.lanes_per_direction < 1) out.push_back("lanes_per_direction must be >= 1");
    if (c.segments < 1) out.push_back("segments must be >= 1");
    if (!(c.segment_length_m > 0)) out.push_back("segment_length_m must be > 0");
    if (!(c.lane_width_m > 0)) out.push_back("lane_width_m must be > 0");
    if (c.points_per_segment < 2) out.push_back("points_per_segment must be >= 2");
    if (!(c.noise.endpoint_sigma_m >= 0)) out.push_back("noise.endpoint_sigma_m must be >= 0");
    if (!(c.noise.dropout >= 0 && c.noise.dropout < 1)) out.push_back("noise.dropout must be in [0,1)");
    if (c.ego_lane_index && (*c.ego_lane_index < 0 || *c.ego_lane_index >= c.lanes_per_direction))
        out.push_back("ego_lane_index out of range");
    return out;
}

inline TeRule resolve_rule(const TeSpec& t) {
    if (t.rule != TeRule::automatic) return t.rule;
    switch (t.category) {
        case TeCategory::go_straight_sign: return TeRule::ego_chain;
        case TeCategory::turn_left_sign:
        case TeCategory::no_left_turn_sign:
        case TeCategory::u_turn_sign:
        case TeCategory::no_u_turn_sign:
        case TeCategory::slight_left_sign: return TeRule::leftmost_approach;
        case TeCategory::turn_right_sign:
        case TeCategory::no_right_turn_sign:
        case TeCategory::slight_right_sign: return TeRule::rightmost_approach;
        default: return TeRule::approach_lanes;
    }
}

/// Front camera used by generated scenes: 800x450, 1.5 m ahead of the rear axle,
/// 1.6 m high, looking along +x.
inline CameraModel default_front_camera() {
    CameraModel cam;
    cam.intrinsics = {{{500.0, 0.0, 400.0}, {0.0, 500.0, 225.0}, {0.0, 0.0, 1.0}}};
    cam.rotation = {{{0.0, -1.0, 0.0}, {0.0, 0.0, -1.0}, {1.0, 0.0, 0.0}}};
    const double c[3] = {1.5, 0.0, 1.6};
    for (int i = 0; i < 3; ++i) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += cam.rotation[i][k] * c[k];
        cam.translation[i] = -s;
    }
    return cam;
}

namespace detail {

struct V2 {
    double x, y;
};
inline V2 operator+(V2 a, V2 b) { return {a.x + b.x, a.y + b.y}; }
inline V2 operator-(V2 a, V2 b) { return {a.x - b.x, a.y - b.y}; }
inline V2 operator*(double s, V2 a) { return {s * a.x, s * a.y}; }

inline Polyline straight(V2 a, V2 b, int n) {
    Polyline p;
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / (n - 1);
        p.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), 0.0});
    }
    return p;
}

inline Polyline bezier(V2 p0, V2 p1, V2 p2, int n) {
    Polyline p;
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / (n - 1);
        const double a = (1 - t) * (1 - t), b = 2 * (1 - t) * t, c = t * t;
        p.push_back({a * p0.x + b * p1.x + c * p2.x, a * p0.y + b * p1.y + c * p2.y, 0.0});
    }
    return p;
}

/// Lane bookkeeping during construction (before noise and id assignment).
struct Proto {
    Polyline line;
    bool ego_direction = false;
    bool in_junction = false;
};

struct Builder {
    std::vector<Proto> lanes;
    std::vector<std::pair<std::size_t, std::size_t>> edges;

    std::size_t add(Polyline line, bool ego_dir, bool junction = false) {
        lanes.push_back({std::move(line), ego_dir, junction});
        return lanes.size() - 1;
    }
    /// Chain of `n` segments from a to b; returns segment indices in travel order.
    std::vector<std::size_t> chain(V2 a, V2 b, int n, int pts, bool ego_dir) {
        std::vector<std::size_t> ids;
        for (int i = 0; i < n; ++i) {
            const V2 s = a + (static_cast<double>(i) / n) * (b - a);
            const V2 e = a + (static_cast<double>(i + 1) / n) * (b - a);
            ids.push_back(add(straight(s, e, pts), ego_dir));
            if (i > 0) edges.emplace_back(ids[i - 1], ids[i]);
        }
        return ids;
    }
};

}  // namespace detail

/// Deterministic (scene, ground truth) for a config and seed. Ground truth is
/// fixed on the clean geometry; noise (endpoint jitter, dropout) is applied after.
inline std::pair<Scene, GroundTruthTopology> synth_scene(const SynthConfig& cfg, std::uint64_t seed) {
    using detail::V2;
    if (auto v = validate_config(cfg); !v.empty()) throw Error("synth config: " + v.front());
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 0x1234567ULL);

    const int L = cfg.lanes_per_direction;
    const int S = cfg.segments;
    const double w = cfg.lane_width_m;
    const double len = cfg.segment_length_m;
    const int pts = cfg.points_per_segment;
    const int e = cfg.ego_lane_index.value_or((L - 1) / 2);

    detail::Builder b;
    std::vector<std::size_t> ego_chain_idx;               // ego segment and downstream, before the junction
    std::vector<std::size_t> approach_last(L, SIZE_MAX);  // ego-direction lanes entering the junction
    std::vector<bool> right_only(L, false);
    std::optional<Polygon2> polygon;

    // ego-direction lane k sits at y = (e - k) w, so the ego lane passes through y = 0
    auto lane_y = [&](int k) { return (e - k) * w; };

    if (cfg.layout == Layout::corridor) {
        const double x0 = -0.5 * S * len + 0.3 * len;
        const double x1 = x0 + S * len;
        for (int k = 0; k < L; ++k) {
            auto ids = b.chain({x0, lane_y(k)}, {x1, lane_y(k)}, S, pts, true);
            if (k == e) {
                for (int i = 0; i < S; ++i)
                    if (x0 + (i + 1) * len > 0.0) ego_chain_idx.push_back(ids[i]);
            }
        }
        if (cfg.opposite_direction)
            for (int j = 0; j < L; ++j)
                b.chain({x1, (e + 1 + j) * w}, {x0, (e + 1 + j) * w}, S, pts, false);
    } else {
        const double H = L * w + 1.0;
        const double yr = (e + 0.5) * w;
        const double xc = cfg.ego_passed_intersection ? -cfg.ego_to_junction_m - H : cfg.ego_to_junction_m + H;
        const V2 C{xc, yr};
        polygon = Polygon2{{xc - H, yr - H}, {xc + H, yr - H}, {xc + H, yr + H}, {xc - H, yr + H}};

        // index [dir][k]: approach chains (travel order) and exit chains
        std::vector<std::vector<std::vector<std::size_t>>> approach(4), exits(4);
        const V2 dirs[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        auto right_of = [](V2 d) { return V2{d.y, -d.x}; };
        const double reach = H + S * len;
        for (int di = 0; di < 4; ++di) {
            const V2 d = dirs[di];
            const V2 r = right_of(d);
            for (int k = 0; k < L; ++k) {
                const V2 off = ((k + 0.5) * w) * r;
                approach[di].push_back(b.chain(C - reach * d + off, C - H * d + off, S, pts, di == 0));
                exits[di].push_back(b.chain(C + H * d + off, C + reach * d + off, S, pts, di == 0));
            }
        }
        const int cpts = std::max(pts, 10);
        for (int di = 0; di < 4; ++di) {
            const V2 d = dirs[di];
            const V2 r = right_of(d);
            const int li = (di + 1) % 4, ri = (di + 3) % 4;
            for (int k = 0; k < L; ++k) {
                const std::size_t from = approach[di][k].back();
                const V2 p0 = C - H * d + ((k + 0.5) * w) * r;
                const bool rto = cfg.right_turn_only_rightmost && k == L - 1 && L > 1;
                if (di == 0) right_only[k] = rto;
                if (!rto) {
                    const std::size_t c = b.add(detail::straight(p0, C + H * d + ((k + 0.5) * w) * r, cpts), false, true);
                    b.edges.emplace_back(from, c);
                    b.edges.emplace_back(c, exits[di][k].front());
                }
                auto turn = [&](int to_dir, int to_lane) {
                    const V2 d2 = dirs[to_dir];
                    const V2 p2 = C + H * d2 + ((to_lane + 0.5) * w) * right_of(d2);
                    // control point: where the entry and exit lines meet
                    const double t = ((p2.x - p0.x) * d2.y - (p2.y - p0.y) * d2.x) / (d.x * d2.y - d.y * d2.x);
                    const std::size_t c = b.add(detail::bezier(p0, p0 + t * d, p2, cpts), false, true);
                    b.edges.emplace_back(from, c);
                    b.edges.emplace_back(c, exits[to_dir][to_lane].front());
                };
                if (k == 0) turn(li, 0);
                if (k == L - 1) turn(ri, L - 1);
            }
        }
        for (int k = 0; k < L; ++k) approach_last[k] = approach[0][k].back();

        // ego chain: segment under the ego and its successors before the junction
        const auto& ego_lane = cfg.ego_passed_intersection ? exits[0][e] : approach[0][e];
        bool started = false;
        for (std::size_t id : ego_lane) {
            const auto& line = b.lanes[id].line;
            if (!started && line.back().x > 0.0) started = true;
            if (started) ego_chain_idx.push_back(id);
        }
    }

    const std::size_t m = b.lanes.size();
    const std::size_t n = cfg.te_spec.size();
    Matrix<std::uint8_t> lsls(m, m), lste(m, n);
    for (auto [p, c] : b.edges) lsls(p, c) = 1;
    for (std::size_t t = 0; t < n; ++t) {
        // approach-lane rules only apply while the junction is still ahead
        const bool junction = cfg.layout == Layout::four_way_intersection && !cfg.ego_passed_intersection;
        switch (resolve_rule(cfg.te_spec[t])) {
            case TeRule::approach_lanes:
                if (junction)
                    for (int k = 0; k < L; ++k)
                        if (!right_only[k]) lste(approach_last[k], t) = 1;
                break;
            case TeRule::leftmost_approach:
                if (junction) lste(approach_last[0], t) = 1;
                break;
            case TeRule::rightmost_approach:
                if (junction) lste(approach_last[L - 1], t) = 1;
                break;
            case TeRule::ego_chain:
                for (auto id : ego_chain_idx) lste(id, t) = 1;
                break;
            case TeRule::automatic: break;
        }
    }

    // noise: dropout then endpoint jitter, drawn in a fixed order
    std::vector<std::size_t> keep;
    std::bernoulli_distribution drop(cfg.noise.dropout);
    std::normal_distribution<double> jitter(0.0, 1.0);
    for (std::size_t i = 0; i < m; ++i) {
        const bool dropped = cfg.noise.dropout > 0 && drop(rng);
        if (!dropped) keep.push_back(i);
    }
    Scene scene;
    scene.frame_id = std::string(cfg.layout == Layout::corridor ? "corridor" : "four_way") + "_" + std::to_string(seed);
    scene.front_camera = default_front_camera();
    scene.intersection_polygon = polygon;
    for (std::size_t i : keep) {
        LaneSegment lane;
        lane.id = static_cast<int>(i) + 1;
        lane.centerline = b.lanes[i].line;
        lane.confidence = 1.0;
        if (cfg.noise.endpoint_sigma_m > 0) {
            const double s = cfg.noise.endpoint_sigma_m;
            auto& f = lane.centerline.front();
            auto& l = lane.centerline.back();
            f.x += s * jitter(rng);
            f.y += s * jitter(rng);
            l.x += s * jitter(rng);
            l.y += s * jitter(rng);
        }
        scene.lanes.push_back(std::move(lane));
    }
    for (std::size_t t = 0; t < n; ++t) {
        TrafficElement te;
        te.id = static_cast<int>(t) + 1;
        te.category = cfg.te_spec[t].category;
        const double u0 = 40.0 + 70.0 * static_cast<double>(t % 10);
        const double v0 = 30.0 + 60.0 * static_cast<double>(t / 10);
        te.bbox = {u0, v0, u0 + 30.0, v0 + 45.0};
        te.confidence = 1.0;
        scene.traffic_elements.push_back(te);
    }
    GroundTruthTopology gt;
    gt.lsls = Matrix<std::uint8_t>(keep.size(), keep.size());
    gt.lste = Matrix<std::uint8_t>(keep.size(), n);
    for (std::size_t r = 0; r < keep.size(); ++r) {
        for (std::size_t c = 0; c < keep.size(); ++c) gt.lsls(r, c) = lsls(keep[r], keep[c]);
        for (std::size_t t = 0; t < n; ++t) gt.lste(r, t) = lste(keep[r], t);
    }
    return {std::move(scene), std::move(gt)};
}

/// Clean counterpart of a noisy config (same seed gives the same layout and ids).
inline SynthConfig without_noise(SynthConfig c) {
    c.noise = {};
    return c;
}

// ---- JSON config ----

inline std::string_view to_string(Layout l) { return l == Layout::corridor ? "corridor" : "four_way_intersection"; }

inline std::string_view to_string(TeRule r) {
    switch (r) {
        case TeRule::approach_lanes: return "approach_lanes";
        case TeRule::leftmost_approach: return "leftmost_approach";
        case TeRule::rightmost_approach: return "rightmost_approach";
        case TeRule::ego_chain: return "ego_chain";
        default: return "automatic";
    }
}

inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
    SynthConfig c;
    const auto layout = j.value("layout", std::string("corridor"));
    if (layout == "corridor") c.layout = Layout::corridor;
    else if (layout == "four_way_intersection" || layout == "four_way") c.layout = Layout::four_way_intersection;
    else throw SchemaError(".layout", "unknown layout '" + layout + "'");
    c.lanes_per_direction = j.value("lanes_per_direction", c.lanes_per_direction);
    c.segments = j.value("segments", c.segments);
    c.segment_length_m = j.value("segment_length", c.segment_length_m);
    c.lane_width_m = j.value("lane_width", c.lane_width_m);
    c.points_per_segment = j.value("points_per_segment", c.points_per_segment);
    c.opposite_direction = j.value("opposite_direction", c.opposite_direction);
    c.ego_passed_intersection = j.value("ego_passed_intersection", c.ego_passed_intersection);
    c.right_turn_only_rightmost = j.value("right_turn_only_rightmost", c.right_turn_only_rightmost);
    c.ego_to_junction_m = j.value("ego_to_junction", c.ego_to_junction_m);
    if (j.contains("ego_lane_index")) c.ego_lane_index = j.at("ego_lane_index").get<int>();
    if (j.contains("te_spec")) {
        for (std::size_t i = 0; i < j.at("te_spec").size(); ++i) {
            const auto& t = j.at("te_spec")[i];
            const std::string path = ".te_spec[" + std::to_string(i) + "]";
            TeSpec s;
            const auto cat = t.value("category", std::string());
            auto cc = te_category_from_string(cat);
            if (!cc) throw SchemaError(path + ".category", "unknown category '" + cat + "'");
            s.category = *cc;
            const auto rule = t.value("rule", std::string("automatic"));
            bool found = false;
            for (auto r : {TeRule::automatic, TeRule::approach_lanes, TeRule::leftmost_approach,
                           TeRule::rightmost_approach, TeRule::ego_chain})
                if (to_string(r) == rule) {
                    s.rule = r;
                    found = true;
                }
            if (!found) throw SchemaError(path + ".rule", "unknown rule '" + rule + "'");
            c.te_spec.push_back(s);
        }
    }
    if (j.contains("noise")) {
        c.noise.endpoint_sigma_m = j.at("noise").value("endpoint_sigma", 0.0);
        c.noise.dropout = j.at("noise").value("dropout", 0.0);
    }
    if (auto v = validate_config(c); !v.empty()) throw SchemaError("", v.front());
    return c;
}

inline nlohmann::json synth_config_to_json(const SynthConfig& c) {
    nlohmann::json j = {{"layout", to_string(c.layout)},
                        {"lanes_per_direction", c.lanes_per_direction},
                        {"segments", c.segments},
                        {"segment_length", c.segment_length_m},
                        {"lane_width", c.lane_width_m},
                        {"points_per_segment", c.points_per_segment},
                        {"opposite_direction", c.opposite_direction},
                        {"ego_passed_intersection", c.ego_passed_intersection},
                        {"right_turn_only_rightmost", c.right_turn_only_rightmost},
                        {"ego_to_junction", c.ego_to_junction_m},
                        {"noise", {{"endpoint_sigma", c.noise.endpoint_sigma_m}, {"dropout", c.noise.dropout}}}};
    if (c.ego_lane_index) j["ego_lane_index"] = *c.ego_lane_index;
    j["te_spec"] = nlohmann::json::array();
    for (const auto& t : c.te_spec) j["te_spec"].push_back({{"category", to_string(t.category)}, {"rule", to_string(t.rule)}});
    return j;
}

// ---- fixtures ----

/// Passed-junction frame: the green light governs lanes behind the ego, so no edges.
inline SynthConfig fixture_passed_intersection() {
    SynthConfig c;
    c.layout = Layout::four_way_intersection;
    c.lanes_per_direction = 2;
    c.segments = 2;
    c.ego_passed_intersection = true;
    c.ego_to_junction_m = 8.0;
    c.te_spec = {{TeCategory::green_light, TeRule::automatic}};
    return c;
}

/// Left-turn signal ahead: tied to the leftmost approach lane only.
inline SynthConfig fixture_left_turn_light() {
    SynthConfig c;
    c.layout = Layout::four_way_intersection;
    c.lanes_per_direction = 3;
    c.segments = 2;
    c.te_spec = {{TeCategory::turn_left_sign, TeRule::automatic}, {TeCategory::red_light, TeRule::automatic}};
    return c;
}

/// Straight-ahead marking: own lane and its successors, not the parallel lanes.
inline SynthConfig fixture_straight_sign() {
    SynthConfig c;
    c.layout = Layout::four_way_intersection;
    c.lanes_per_direction = 3;
    c.segments = 3;
    c.ego_to_junction_m = 16.0;
    c.te_spec = {{TeCategory::go_straight_sign, TeRule::automatic}};
    return c;
}

/// Ego on a right-turn-only lane: the straight-traffic lights do not govern it.
inline SynthConfig fixture_right_turn_only() {
    SynthConfig c;
    c.layout = Layout::four_way_intersection;
    c.lanes_per_direction = 3;
    c.segments = 2;
    c.ego_lane_index = 2;
    c.right_turn_only_rightmost = true;
    c.te_spec = {{TeCategory::green_light, TeRule::automatic}, {TeCategory::green_light, TeRule::automatic}};
    return c;
}

/// Mixed suite config for seed i: alternates corridor / four-way and varies size and signals.
inline SynthConfig suite_config(std::uint64_t i, NoiseConfig noise = {}) {
    SynthConfig c;
    std::mt19937_64 rng(i * 7919 + 17);
    c.layout = i % 2 == 0 ? Layout::corridor : Layout::four_way_intersection;
    c.lanes_per_direction = 1 + static_cast<int>(rng() % 3);
    c.segments = 2 + static_cast<int>(rng() % 2);
    c.noise = noise;
    static constexpr TeCategory cats[] = {TeCategory::green_light,    TeCategory::red_light,
                                          TeCategory::turn_left_sign, TeCategory::turn_right_sign,
                                          TeCategory::go_straight_sign, TeCategory::yellow_light,
                                          TeCategory::no_u_turn_sign, TeCategory::slight_right_sign};
    if (c.layout == Layout::corridor) {
        c.opposite_direction = rng() % 2 == 0;
        const int k = static_cast<int>(rng() % 3);
        for (int t = 0; t < k; ++t) c.te_spec.push_back({cats[rng() % 8], TeRule::automatic});
    } else {
        c.ego_passed_intersection = rng() % 4 == 0;
        c.right_turn_only_rightmost = c.lanes_per_direction > 1 && rng() % 3 == 0;
        if (c.right_turn_only_rightmost && rng() % 2 == 0) c.ego_lane_index = c.lanes_per_direction - 1;
        const int k = 1 + static_cast<int>(rng() % 4);
        for (int t = 0; t < k; ++t) c.te_spec.push_back({cats[rng() % 8], TeRule::automatic});
    }
    return c;
}

}  // namespace chameleon::synth
