#pragma once

#include <algorithm>
#include <deque>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "chameleon/fast_system.hpp"
#include "chameleon/vqa.hpp"

namespace chameleon::slow {

using dsl::Verdict;
using vqa::VqaKind;
using vqa::VqaLabel;

/// One client exchange as it appears in the transcript.
struct VqaRecord {
    VqaKind kind = VqaKind::Adjacency;
    int green = 0;
    std::optional<int> blue;
    std::string image_sha256;
    std::string description;
    std::string question;
    std::string reply;
    std::optional<VqaLabel> label;
    bool parse_failed = false;
    std::string error;  // transport failure text
};

/// Per-frame call accounting. Every attempted call counts, failed or not.
struct CallLedger {
    int budget = 6;
    int calls = 0;
    int transport_failures = 0;
    int parse_failures = 0;
    std::vector<VqaRecord> records;

    int remaining() const { return std::max(0, budget - calls); }
};

struct VqaOutcome {
    std::optional<VqaLabel> label;  // empty: transport failure or not asked
    bool parse_failed = false;
};

namespace detail {

inline VqaRecord run_query(ChatClient& client, const vqa::VqaQuery& q, const std::string& model) {
    VqaRecord rec;
    rec.kind = q.kind;
    rec.green = q.green_lane_id;
    rec.blue = q.blue_lane_id;
    rec.image_sha256 = sha256_hex(q.image_png);
    rec.description = q.description_text;
    rec.question = q.question_text;
    try {
        rec.reply = client.complete(vqa::to_chat_request(q, model));
        const auto parsed = vqa::parse_vqa_answer(q.kind, rec.reply);
        rec.label = parsed.label;
        rec.parse_failed = parsed.parse_failed;
    } catch (const TransportError& e) {
        rec.error = e.what();
    }
    return rec;
}

inline VqaOutcome book(CallLedger& ledger, VqaRecord rec) {
    ++ledger.calls;
    if (!rec.error.empty()) ++ledger.transport_failures;
    if (rec.parse_failed) ++ledger.parse_failures;
    VqaOutcome out{rec.label, rec.parse_failed};
    ledger.records.push_back(std::move(rec));
    return out;
}

}  // namespace detail

/// Asks one question if budget remains; otherwise returns an empty outcome without calling.
inline VqaOutcome ask(ChatClient& client, const vqa::VqaQuery& q, CallLedger& ledger, const std::string& model) {
    if (ledger.remaining() == 0) return {};
    return detail::book(ledger, detail::run_query(client, q, model));
}

/// Issues the queries with at most `max_in_flight` outstanding. Results and
/// ledger entries follow query order, independent of completion order.
inline std::vector<VqaOutcome> ask_batch(ChatClient& client, const std::vector<vqa::VqaQuery>& queries,
                                         CallLedger& ledger, const std::string& model, int max_in_flight) {
    std::vector<VqaOutcome> out(queries.size());
    const std::size_t n = std::min<std::size_t>(queries.size(), static_cast<std::size_t>(ledger.remaining()));
    if (max_in_flight <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = detail::book(ledger, detail::run_query(client, queries[i], model));
        return out;
    }
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(max_in_flight)) {
        const std::size_t end = std::min(n, start + static_cast<std::size_t>(max_in_flight));
        std::vector<std::future<VqaRecord>> fut;
        for (std::size_t i = start; i < end; ++i)
            fut.push_back(std::async(std::launch::async, [&, i] { return detail::run_query(client, queries[i], model); }));
        for (std::size_t i = start; i < end; ++i) out[i] = detail::book(ledger, fut[i - start].get());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Six-step chain for lane / traffic-element topology
// ---------------------------------------------------------------------------

inline constexpr std::array<std::string_view, 6> kCotSteps = {
    "self_localization", "te_category", "intersection_membership", "parallel_expansion", "spatial_association",
    "summarize"};

struct CotConfig {
    /// Optional steps (membership, expansion, association) may be dropped; the others always run.
    std::vector<std::string> steps{kCotSteps.begin(), kCotSteps.end()};
    std::string model = "gpt-4o";
    render::RenderConfig render;

    bool enabled(std::string_view step) const { return std::find(steps.begin(), steps.end(), step) != steps.end(); }
};

inline std::vector<std::string> validate_cot_config(const CotConfig& c) {
    std::vector<std::string> out;
    for (const auto& s : c.steps)
        if (std::find(kCotSteps.begin(), kCotSteps.end(), s) == kCotSteps.end()) out.push_back("unknown step '" + s + "'");
    for (auto required : {kCotSteps[0], kCotSteps[1], kCotSteps[5]})
        if (!c.enabled(required)) out.push_back("step '" + std::string(required) + "' cannot be disabled");
    return out;
}

struct CotDecision {
    Verdict verdict = Verdict::AMB;  // AMB: unresolved
    std::string step;                // step whose result decided the pair
    std::string note;
};

struct CotResult {
    std::map<std::pair<std::size_t, std::size_t>, CotDecision> decisions;  // keyed by (lane index, TE index)
    std::vector<std::string> steps_run;
    std::optional<int> ego_lane;
    std::optional<int> approach_lane;
    std::vector<int> ego_chain;
    std::set<int> parallel_set;
};

namespace detail {

/// Intersection membership with geometry first and a cached VQA fallback.
class Membership {
public:
    Membership(const SceneContext& ctx, ChatClient& client, CallLedger& ledger, const CotConfig& cfg, bool use_vqa)
        : ctx_(ctx), client_(client), ledger_(ledger), cfg_(cfg), use_vqa_(use_vqa) {}

    /// Yes / No, or empty when the answer could not be obtained.
    std::optional<bool> inside(int lane_id) {
        if (auto it = cache_.find(lane_id); it != cache_.end()) return it->second;
        std::optional<bool> v;
        switch (geometry::is_in_intersection(ctx_.scene().lane(lane_id), ctx_.scene(), ctx_.config())) {
            case geometry::Tristate::Yes: v = true; break;
            case geometry::Tristate::No: v = false; break;
            default:
                if (!use_vqa_) {
                    v = false;
                } else if (ledger_.remaining() > 0) {
                    const auto q = vqa::build_vqa_query(VqaKind::IsInIntersection, ctx_.scene(), lane_id, std::nullopt,
                                                        cfg_.render);
                    const auto r = ask(client_, q, ledger_, cfg_.model);
                    if (r.label) v = *r.label == VqaLabel::Yes;
                }
        }
        cache_[lane_id] = v;
        return v;
    }

private:
    const SceneContext& ctx_;
    ChatClient& client_;
    CallLedger& ledger_;
    const CotConfig& cfg_;
    bool use_vqa_;
    std::map<int, std::optional<bool>> cache_;
};

inline std::vector<int> successors(const SceneContext& ctx, const fast::VerdictMatrix& lsls, int lane_id) {
    const auto& s = ctx.scene();
    const std::size_t i = s.lane_index(lane_id);
    std::vector<int> out;
    for (std::size_t j = 0; j < s.lanes.size(); ++j)
        if (lsls.verdict(i, j) == Verdict::POS) out.push_back(s.lanes[j].id);
    std::sort(out.begin(), out.end());
    return out;
}

inline double heading_dev_or_max(const LaneSegment& a, const LaneSegment& b) {
    try {
        return geometry::heading_deviation(a, b);
    } catch (const GeometryError&) {
        return 180.0;
    }
}

inline bool right_turn_only(const SceneContext& ctx, const fast::VerdictMatrix& lsls, int lane_id) {
    const auto succ = successors(ctx, lsls, lane_id);
    if (succ.empty()) return false;
    for (int s : succ) {
        try {
            if (geometry::turn_direction(ctx.scene().lane(s), ctx.config()) != geometry::Turn::Right) return false;
        } catch (const GeometryError&) {
            return false;
        }
    }
    return true;
}

}  // namespace detail

/// Decides the AMB entries of a fast lste pass. `lsls` supplies successor links.
/// Calls stop at the ledger budget; pairs that needed a missing answer stay AMB.
inline CotResult run_cot_lste(const SceneContext& ctx, const fast::VerdictMatrix& lste, const fast::VerdictMatrix& lsls,
                              ChatClient& client, CallLedger& ledger, const CotConfig& cfg = {}) {
    const Scene& s = ctx.scene();
    CotResult res;
    std::vector<std::pair<std::size_t, std::size_t>> cand;
    for (std::size_t i = 0; i < lste.entries.rows(); ++i)
        for (std::size_t j = 0; j < lste.entries.cols(); ++j)
            if (lste.verdict(i, j) == Verdict::AMB) cand.emplace_back(i, j);
    if (cand.empty()) return res;

    auto decide_all = [&](Verdict v, const std::string& step, const std::string& note) {
        for (auto c : cand) res.decisions[c] = {v, step, note};
    };

    // 1. self-localization
    res.steps_run.push_back("self_localization");
    res.ego_lane = ctx.ego_lane();
    if (!res.ego_lane) {
        decide_all(Verdict::AMB, "self_localization", "no ego lane");
        return res;
    }

    // 2. traffic-element classes among candidates
    res.steps_run.push_back("te_category");
    std::set<TeClass> classes;
    for (auto [i, j] : cand) classes.insert(te_class(s.traffic_elements[j].category));
    const bool needs_set = classes.count(TeClass::Light) || classes.count(TeClass::LeftSign) ||
                           classes.count(TeClass::RightSign);
    const bool needs_sides = classes.count(TeClass::LeftSign) || classes.count(TeClass::RightSign);

    // 3. walk downstream from the ego lane until the junction
    bool walk_unresolved = false;
    detail::Membership member(ctx, client, ledger, cfg, cfg.enabled("intersection_membership"));
    res.steps_run.push_back("intersection_membership");
    {
        int cur = *res.ego_lane;
        std::set<int> seen{cur};
        const auto e_in = member.inside(cur);
        if (!e_in) {
            walk_unresolved = true;
        } else if (!*e_in) {
            res.ego_chain.push_back(cur);
            for (;;) {
                const auto succ = detail::successors(ctx, lsls, cur);
                if (succ.empty()) break;
                bool any_in = false, unresolved = false;
                for (int n : succ) {
                    const auto v = member.inside(n);
                    if (!v) unresolved = true;
                    else if (*v) any_in = true;
                }
                if (any_in) {
                    res.approach_lane = cur;
                    break;
                }
                if (unresolved) {
                    walk_unresolved = true;
                    break;
                }
                int next = succ.front();
                double best = detail::heading_dev_or_max(s.lane(cur), s.lane(next));
                for (int n : succ) {
                    const double d = detail::heading_dev_or_max(s.lane(cur), s.lane(n));
                    if (d < best) {
                        best = d;
                        next = n;
                    }
                }
                if (!seen.insert(next).second) break;
                res.ego_chain.push_back(next);
                cur = next;
            }
        }
    }

    // 4. lanes beside the approach lane
    std::set<int> P;
    if (res.approach_lane) {
        P.insert(*res.approach_lane);
        if (needs_set && cfg.enabled("parallel_expansion")) {
            res.steps_run.push_back("parallel_expansion");
            std::deque<int> frontier{*res.approach_lane};
            while (!frontier.empty()) {
                const int cur = frontier.front();
                frontier.pop_front();
                for (int n : geometry::parallel_lanes(s, cur, ctx.config()))
                    if (P.insert(n).second) frontier.push_back(n);
            }
        }
    }
    res.parallel_set = P;

    // 5. leftmost / rightmost member of the set
    std::optional<int> leftmost, rightmost;
    bool sides_unresolved = false;
    if (!P.empty()) {
        const std::vector<int> members(P.begin(), P.end());
        if (members.size() == 1) {
            leftmost = rightmost = members.front();
        } else if (needs_sides) {
            const bool use_vqa = cfg.enabled("spatial_association");
            if (use_vqa) res.steps_run.push_back("spatial_association");
            std::map<int, int> left_of;  // number of members this lane is left of
            for (std::size_t a = 0; a < members.size() && !sides_unresolved; ++a) {
                for (std::size_t b = a + 1; b < members.size(); ++b) {
                    auto rel = geometry::lateral_order(s.lane(members[a]), s.lane(members[b]), ctx.config());
                    if (rel == geometry::LateralRelation::None && use_vqa) {
                        const auto q = vqa::build_vqa_query(VqaKind::LeftOrRight, s, members[a], members[b], cfg.render);
                        const auto r = ask(client, q, ledger, cfg.model);
                        if (r.label == VqaLabel::Left) rel = geometry::LateralRelation::Left;
                        else if (r.label == VqaLabel::Right) rel = geometry::LateralRelation::Right;
                    }
                    if (rel == geometry::LateralRelation::Left) ++left_of[members[a]];
                    else if (rel == geometry::LateralRelation::Right) ++left_of[members[b]];
                    else {
                        sides_unresolved = true;
                        break;
                    }
                }
            }
            if (!sides_unresolved) {
                int lo = members.front(), hi = members.front();
                for (int id : members) {
                    if (left_of[id] > left_of[lo]) lo = id;
                    if (left_of[id] < left_of[hi]) hi = id;
                }
                leftmost = lo;
                rightmost = hi;
            }
        }
    }

    // 6. summarize
    res.steps_run.push_back("summarize");
    std::map<int, bool> rto;
    for (auto [i, j] : cand) {
        const int lane = s.lanes[i].id;
        CotDecision d;
        switch (te_class(s.traffic_elements[j].category)) {
            case TeClass::StraightSign:
                d.step = "intersection_membership";
                if (std::find(res.ego_chain.begin(), res.ego_chain.end(), lane) != res.ego_chain.end()) {
                    d.verdict = Verdict::POS;
                    d.note = "ego chain";
                } else {
                    d.verdict = walk_unresolved ? Verdict::AMB : Verdict::NEG;
                }
                break;
            case TeClass::Light:
                d.step = "parallel_expansion";
                if (!res.approach_lane) {
                    d.verdict = walk_unresolved ? Verdict::AMB : Verdict::NEG;
                    d.note = walk_unresolved ? "junction lookup unresolved" : "no junction ahead";
                } else if (P.count(lane)) {
                    if (!rto.count(lane)) rto[lane] = detail::right_turn_only(ctx, lsls, lane);
                    d.verdict = rto[lane] ? Verdict::NEG : Verdict::POS;
                    d.note = rto[lane] ? "right-turn-only lane" : "approach lane";
                } else {
                    d.verdict = Verdict::NEG;
                }
                break;
            case TeClass::LeftSign:
            case TeClass::RightSign: {
                d.step = "spatial_association";
                const bool left = te_class(s.traffic_elements[j].category) == TeClass::LeftSign;
                const auto side = left ? leftmost : rightmost;
                if (!res.approach_lane) {
                    d.verdict = walk_unresolved ? Verdict::AMB : Verdict::NEG;
                } else if (side) {
                    d.verdict = lane == *side ? Verdict::POS : Verdict::NEG;
                    d.note = left ? "leftmost approach" : "rightmost approach";
                } else {
                    d.verdict = P.count(lane) ? Verdict::AMB : Verdict::NEG;
                }
                break;
            }
        }
        res.decisions[{i, j}] = d;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Lane / lane corner cases
// ---------------------------------------------------------------------------

struct LslsDecision {
    Verdict verdict = Verdict::AMB;
    std::string path;
};

/// AMB pairs most filters survived go first; ties by (subject id, object id).
inline std::vector<std::pair<std::size_t, std::size_t>> ambiguity_order(const Scene& s, const fast::VerdictMatrix& vm) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < vm.entries.rows(); ++i)
        for (std::size_t j = 0; j < vm.entries.cols(); ++j)
            if (vm.verdict(i, j) == Verdict::AMB) out.emplace_back(i, j);
    const bool lsls = vm.target == Target::lsls;
    std::sort(out.begin(), out.end(), [&](auto a, auto b) {
        const auto ra = vm.entries(a.first, a.second).rules_passed;
        const auto rb = vm.entries(b.first, b.second).rules_passed;
        if (ra != rb) return ra > rb;
        const int sa = s.lanes[a.first].id, sb = s.lanes[b.first].id;
        if (sa != sb) return sa < sb;
        const int oa = lsls ? s.lanes[a.second].id : s.traffic_elements[a.second].id;
        const int ob = lsls ? s.lanes[b.second].id : s.traffic_elements[b.second].id;
        return oa < ob;
    });
    return out;
}

/// A pair is only started when the budget covers every configured kind for it.
/// POS needs every kind to agree (Adjacency/Vector: Yes, LeftOrRight: no relation).
inline std::map<std::pair<std::size_t, std::size_t>, LslsDecision> resolve_lsls(
    const SceneContext& ctx, const fast::VerdictMatrix& lsls, const std::vector<VqaKind>& kinds, ChatClient& client,
    CallLedger& ledger, const std::string& model = "gpt-4o", int max_in_flight = 1,
    const render::RenderConfig& rcfg = {}) {
    std::map<std::pair<std::size_t, std::size_t>, LslsDecision> out;
    if (kinds.empty()) return out;
    const Scene& s = ctx.scene();
    const auto order = ambiguity_order(s, lsls);
    const std::size_t pairs = std::min(order.size(), static_cast<std::size_t>(ledger.remaining()) / kinds.size());
    std::vector<vqa::VqaQuery> queries;
    for (std::size_t p = 0; p < pairs; ++p)
        for (auto k : kinds)
            queries.push_back(
                vqa::build_vqa_query(k, s, s.lanes[order[p].first].id, s.lanes[order[p].second].id, rcfg));
    const auto res = ask_batch(client, queries, ledger, model, max_in_flight);
    std::string path = "vqa:";
    for (std::size_t k = 0; k < kinds.size(); ++k) path += (k ? "+" : "") + std::string(vqa::to_string(kinds[k]));
    for (std::size_t p = 0; p < pairs; ++p) {
        LslsDecision d{Verdict::POS, path};
        for (std::size_t k = 0; k < kinds.size(); ++k) {
            const auto& r = res[p * kinds.size() + k];
            if (!r.label) {
                d.verdict = Verdict::AMB;
                break;
            }
            const bool agree = kinds[k] == VqaKind::LeftOrRight ? *r.label == VqaLabel::None : *r.label == VqaLabel::Yes;
            if (!agree) d.verdict = Verdict::NEG;
        }
        out[order[p]] = d;
    }
    return out;
}

}  // namespace chameleon::slow
