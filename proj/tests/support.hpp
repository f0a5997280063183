#pragma once

#include <filesystem>
#include <mutex>
#include <random>
#include <string>

#include "chameleon/chameleon.hpp"

namespace chameleon::testing {

inline LaneSegment line_lane(int id, double x0, double y0, double x1, double y1, int points = 5) {
    LaneSegment l;
    l.id = id;
    for (int i = 0; i < points; ++i) {
        const double t = static_cast<double>(i) / (points - 1);
        l.centerline.push_back({x0 + t * (x1 - x0), y0 + t * (y1 - y0), 0.0});
    }
    return l;
}

inline TrafficElement te(int id, TeCategory c) {
    return {id, {300.0, 50.0, 320.0, 90.0}, c, 1.0};
}

inline Scene make_scene(std::vector<LaneSegment> lanes, std::vector<TrafficElement> tes = {},
                        std::string frame_id = "test") {
    Scene s;
    s.frame_id = std::move(frame_id);
    s.lanes = std::move(lanes);
    s.traffic_elements = std::move(tes);
    s.front_camera = synth::default_front_camera();
    return s;
}

inline GroundTruthTopology empty_gt(const Scene& s) {
    return {Matrix<std::uint8_t>(s.lanes.size(), s.lanes.size()),
            Matrix<std::uint8_t>(s.lanes.size(), s.traffic_elements.size())};
}

/// Random polyline with `n` distinct points inside a box.
inline Polyline random_polyline(std::mt19937_64& rng, int n, double extent = 20.0, bool flat = true) {
    std::uniform_real_distribution<double> u(-extent, extent);
    Polyline p;
    while (static_cast<int>(p.size()) < n) {
        Point3 q{u(rng), u(rng), flat ? 0.0 : u(rng) * 0.1};
        if (p.empty() || !(q == p.back())) p.push_back(q);
    }
    return p;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("chameleon_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Replies from a fixed script in order, repeating the last entry. An entry
/// starting with '!' throws TransportError instead. Records every request.
class ScriptedClient : public ChatClient {
public:
    explicit ScriptedClient(std::vector<std::string> script) : script_(std::move(script)) {}

    std::string complete(const ChatRequest& req) override {
        std::lock_guard lock(mu_);
        requests_.push_back(req);
        const std::string& r = script_[std::min(next_++, script_.size() - 1)];
        if (!r.empty() && r[0] == '!') throw TransportError(r.substr(1));
        return r;
    }

    std::vector<ChatRequest> requests() const {
        std::lock_guard lock(mu_);
        return requests_;
    }

private:
    mutable std::mutex mu_;
    std::vector<std::string> script_;
    std::size_t next_ = 0;
    std::vector<ChatRequest> requests_;
};

}  // namespace chameleon::testing
