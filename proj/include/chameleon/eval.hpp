#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chameleon/mock.hpp"
#include "chameleon/pipeline.hpp"

namespace chameleon::eval {

inline constexpr double kDefaultTau = 1.5;
inline constexpr double kDefaultPerCallMs = 1447.0;

struct Matching {
    std::map<int, int> pred_to_gt;
    std::map<int, double> distance;  // keyed by predicted id

    std::size_t size() const { return pred_to_gt.size(); }
};

/// Minimum-cost assignment of an n x k cost matrix (n <= k), Jonker-Volgenant
/// style shortest augmenting paths. Returns the column for each row.
inline std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
    const std::size_t n = cost.size();
    if (n == 0) return {};
    const std::size_t k = cost[0].size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(k + 1, 0.0);
    std::vector<std::size_t> p(k + 1, 0), way(k + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(k + 1, inf);
        std::vector<bool> used(k + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= k; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= k; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<std::size_t> row_to_col(n, 0);
    for (std::size_t j = 1; j <= k; ++j)
        if (p[j]) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

/// One-to-one matching under discrete Fréchet distance. Maximises the number of
/// pairs closer than `tau`, then minimises their summed distance.
inline Matching match_lanes(std::span<const LaneSegment> pred, std::span<const LaneSegment> gt,
                            double tau = kDefaultTau) {
    if (!(tau > 0)) throw Error("match_lanes: tau must be > 0");
    Matching out;
    if (pred.empty() || gt.empty()) return out;
    const bool transpose = pred.size() > gt.size();
    const auto& rows = transpose ? gt : pred;
    const auto& cols = transpose ? pred : gt;
    const double big = (static_cast<double>(std::max(pred.size(), gt.size())) + 1.0) * tau + 1.0;
    std::vector<std::vector<double>> dist(rows.size(), std::vector<double>(cols.size()));
    std::vector<std::vector<double>> cost(rows.size(), std::vector<double>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c) {
            dist[r][c] = geometry::discrete_frechet(rows[r].centerline, cols[c].centerline);
            cost[r][c] = dist[r][c] < tau ? dist[r][c] - big : 0.0;
        }
    const auto assign = hungarian(cost);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t c = assign[r];
        if (!(dist[r][c] < tau)) continue;
        const int pid = transpose ? cols[c].id : rows[r].id;
        const int gid = transpose ? rows[r].id : cols[c].id;
        out.pred_to_gt[pid] = gid;
        out.distance[pid] = dist[r][c];
    }
    return out;
}

/// Area under the step precision-recall curve over distinct positive scores.
/// Zero scores are not predictions. With no positives the result is 1 when
/// nothing was predicted and 0 otherwise.
inline double average_precision(std::vector<std::pair<double, bool>> scored, std::size_t total_positives) {
    scored.erase(std::remove_if(scored.begin(), scored.end(), [](const auto& e) { return !(e.first > 0.0); }),
                 scored.end());
    if (total_positives == 0) return scored.empty() ? 1.0 : 0.0;
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    double ap = 0.0, prev_recall = 0.0;
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scored.size();) {
        const double t = scored[i].first;
        for (; i < scored.size() && scored[i].first == t; ++i) (scored[i].second ? tp : fp) += 1;
        const double recall = static_cast<double>(tp) / static_cast<double>(total_positives);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

struct TopScores {
    double top_lsls = 0.0;
    double top_lste = 0.0;
};

/// Predicted scores for one frame plus the ids their rows/columns refer to.
struct FramePrediction {
    std::vector<int> lane_ids;
    std::vector<int> te_ids;
    TopologyMatrices matrices;
};

inline FramePrediction frame_prediction(const pipeline::OutputDocument& d) {
    FramePrediction p;
    for (const auto& l : d.lanes) p.lane_ids.push_back(l.id);
    p.te_ids = d.te_ids;
    p.matrices = d.matrices;
    return p;
}

/// Per-frame AP of both targets. Traffic elements are matched by id.
inline TopScores top_map(const FramePrediction& pred, const Scene& gt_scene, const GroundTruthTopology& gt,
                         const Matching& matching) {
    const std::size_t m = pred.lane_ids.size();
    const std::size_t n = pred.te_ids.size();
    if (pred.matrices.lsls.rows() != m || pred.matrices.lsls.cols() != m || pred.matrices.lste.rows() != m ||
        pred.matrices.lste.cols() != n)
        throw Error("top_map: dimension mismatch");
    if (gt.lsls.rows() != gt_scene.lanes.size() || gt.lste.cols() != gt_scene.traffic_elements.size())
        throw Error("top_map: ground truth does not match its scene");
    std::vector<std::optional<std::size_t>> lane_gt(m);
    for (std::size_t i = 0; i < m; ++i)
        if (auto it = matching.pred_to_gt.find(pred.lane_ids[i]); it != matching.pred_to_gt.end())
            lane_gt[i] = gt_scene.lane_index(it->second);
    std::vector<std::optional<std::size_t>> te_gt(n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < gt_scene.traffic_elements.size(); ++k)
            if (gt_scene.traffic_elements[k].id == pred.te_ids[j]) te_gt[j] = k;

    std::size_t pos_ll = 0, pos_lt = 0;
    for (std::size_t a = 0; a < gt.lsls.rows(); ++a)
        for (std::size_t b = 0; b < gt.lsls.cols(); ++b) pos_ll += gt.lsls(a, b) != 0;
    for (std::size_t a = 0; a < gt.lste.rows(); ++a)
        for (std::size_t b = 0; b < gt.lste.cols(); ++b) pos_lt += gt.lste(a, b) != 0;

    std::vector<std::pair<double, bool>> ll, lt;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) continue;
            const bool hit = lane_gt[i] && lane_gt[j] && gt.lsls(*lane_gt[i], *lane_gt[j]);
            ll.emplace_back(pred.matrices.lsls(i, j), hit);
        }
        for (std::size_t j = 0; j < n; ++j) {
            const bool hit = lane_gt[i] && te_gt[j] && gt.lste(*lane_gt[i], *te_gt[j]);
            lt.emplace_back(pred.matrices.lste(i, j), hit);
        }
    }
    return {average_precision(std::move(ll), pos_ll), average_precision(std::move(lt), pos_lt)};
}

inline double vqa_accuracy(std::span<const vqa::VqaLabel> preds, std::span<const vqa::VqaLabel> gts) {
    if (preds.size() != gts.size()) throw Error("vqa_accuracy: length mismatch");
    if (preds.empty()) throw Error("vqa_accuracy: no items");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == gts[i];
    return static_cast<double>(hit) / static_cast<double>(preds.size());
}

struct LatencyFrame {
    std::string frame_id;
    int vlm_calls = 0;
    double fast_ms = 0.0;
    double slow_ms = 0.0;
    double total_ms = 0.0;
    double dense_ms = 0.0;  // one query per lane pair and lane / element pair
};

struct LatencyReport {
    std::vector<LatencyFrame> frames;
    double mean_ms = 0.0;
    double mean_counterfactual_dense_ms = 0.0;
};

inline LatencyFrame frame_latency(const pipeline::Trace& t, double per_call_ms) {
    LatencyFrame f;
    f.frame_id = t.frame_id;
    f.vlm_calls = t.vlm_calls;
    f.fast_ms = t.fast_ms;
    f.slow_ms = t.vlm_calls * per_call_ms;
    f.total_ms = f.slow_ms + f.fast_ms;
    const double m = static_cast<double>(t.lanes), n = static_cast<double>(t.traffic_elements);
    f.dense_ms = (m * m + m * n) * per_call_ms;
    return f;
}

inline LatencyReport latency_report(std::span<const pipeline::Trace> traces, double per_call_ms = kDefaultPerCallMs) {
    if (!(per_call_ms > 0)) throw Error("latency_report: per_call_ms must be > 0");
    LatencyReport r;
    for (const auto& t : traces) r.frames.push_back(frame_latency(t, per_call_ms));
    if (!r.frames.empty()) {
        for (const auto& f : r.frames) {
            r.mean_ms += f.total_ms;
            r.mean_counterfactual_dense_ms += f.dense_ms;
        }
        r.mean_ms /= static_cast<double>(r.frames.size());
        r.mean_counterfactual_dense_ms /= static_cast<double>(r.frames.size());
    }
    return r;
}

/// Ground-truth frame as stored by `synth` (clean scene plus full topology).
struct GtFrame {
    Scene scene;
    GroundTruthTopology gt;
};

struct Report {
    std::size_t frames = 0;
    double top_lsls = 0.0;
    double top_lste = 0.0;
    std::map<std::string, double> vqa;
    std::map<std::string, std::size_t> vqa_items;
    LatencyReport latency;
    double unresolved_rate = 0.0;
    double parse_failure_rate = 0.0;
};

/// Truth for a recorded VQA exchange, re-derived from the ground-truth frame
/// through the lane matching; empty when a subject has no counterpart.
inline std::optional<vqa::VqaLabel> recorded_truth(const slow::VqaRecord& r, const GtFrame& gt, const Matching& mt) {
    auto map_id = [&](int id) -> std::optional<int> {
        auto it = mt.pred_to_gt.find(id);
        if (it == mt.pred_to_gt.end()) return std::nullopt;
        return it->second;
    };
    const auto g = map_id(r.green);
    if (!g) return std::nullopt;
    std::optional<int> b;
    if (r.blue) {
        b = map_id(*r.blue);
        if (!b) return std::nullopt;
    }
    return harness::true_label(r.kind, harness::MockTruth{gt.scene, gt.gt}, *g, b);
}

inline Report evaluate(const std::vector<pipeline::OutputDocument>& preds, const std::map<std::string, GtFrame>& gts,
                       double tau = kDefaultTau, double per_call_ms = kDefaultPerCallMs) {
    Report rep;
    std::vector<pipeline::Trace> traces;
    std::size_t pairs = 0, unresolved = 0, calls = 0, parse_failures = 0;
    std::map<std::string, std::pair<std::vector<vqa::VqaLabel>, std::vector<vqa::VqaLabel>>> vq;
    for (const auto& d : preds) {
        auto it = gts.find(d.frame_id);
        if (it == gts.end()) throw Error("evaluate: no ground truth for frame '" + d.frame_id + "'");
        const auto mt = match_lanes(d.lanes, it->second.scene.lanes, tau);
        const auto s = top_map(frame_prediction(d), it->second.scene, it->second.gt, mt);
        rep.top_lsls += s.top_lsls;
        rep.top_lste += s.top_lste;
        ++rep.frames;
        traces.push_back(d.trace);
        pairs += d.trace.pairs.size();
        unresolved += static_cast<std::size_t>(d.trace.unresolved);
        calls += static_cast<std::size_t>(d.trace.vlm_calls);
        parse_failures += static_cast<std::size_t>(d.trace.parse_failures);
        for (const auto& r : d.trace.vqa) {
            if (!r.label) continue;
            const auto truth = recorded_truth(r, it->second, mt);
            if (!truth) continue;
            auto& slot = vq[std::string(vqa::to_string(r.kind))];
            slot.first.push_back(*r.label);
            slot.second.push_back(*truth);
        }
    }
    if (rep.frames) {
        rep.top_lsls /= static_cast<double>(rep.frames);
        rep.top_lste /= static_cast<double>(rep.frames);
    }
    for (const auto& [kind, lists] : vq) {
        rep.vqa[kind] = vqa_accuracy(lists.first, lists.second);
        rep.vqa_items[kind] = lists.first.size();
    }
    rep.latency = latency_report(traces, per_call_ms);
    rep.unresolved_rate = pairs ? static_cast<double>(unresolved) / static_cast<double>(pairs) : 0.0;
    rep.parse_failure_rate = calls ? static_cast<double>(parse_failures) / static_cast<double>(calls) : 0.0;
    return rep;
}

inline nlohmann::json report_json(const Report& r) {
    nlohmann::json vq = nlohmann::json::object();
    for (const auto& [k, v] : r.vqa) vq[k] = v;
    return {{"frames", r.frames},
            {"metric", "TOP (artifact variant)"},
            {"top_lsls", r.top_lsls},
            {"top_lste", r.top_lste},
            {"vqa", vq},
            {"latency",
             {{"mean_ms", r.latency.mean_ms}, {"counterfactual_dense_ms", r.latency.mean_counterfactual_dense_ms}}},
            {"unresolved_rate", r.unresolved_rate},
            {"parse_failure_rate", r.parse_failure_rate}};
}

}  // namespace chameleon::eval
