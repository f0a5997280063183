#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "chameleon/chat.hpp"
#include "chameleon/dsl.hpp"
#include "chameleon/program_assets.hpp"
#include "chameleon/render.hpp"

namespace chameleon::fast {

using dsl::Verdict;

/// Which pieces of guidance the fast system uses.
enum class Mode { pairwise, rules, fewshot };

inline std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::pairwise: return "pairwise";
        case Mode::rules: return "+rules";
        default: return "+fewshot";
    }
}

inline std::optional<Mode> mode_from_string(std::string_view s) {
    if (s == "pairwise") return Mode::pairwise;
    if (s == "+rules" || s == "rules") return Mode::rules;
    if (s == "+fewshot" || s == "fewshot") return Mode::fewshot;
    return std::nullopt;
}

struct FastConfig {
    double max_endpoint_distance_m = 8.0;
    double max_heading_deviation_deg = 120.0;
    bool hard_filters = true;
};

inline const dsl::Program& default_program(Target t) {
    static const dsl::Program lsls = dsl::parse_program(assets::kLslsDefault);
    static const dsl::Program lste = dsl::parse_program(assets::kLsteDefault);
    return t == Target::lsls ? lsls : lste;
}

inline std::string expert_rules_text(Target t, const FastConfig& cfg = {}) {
    if (t == Target::lsls)
        return "Expert rules:\n- A parent lane's end point must be close to the child lane's start point (at most " +
               dsl::detail::format_number(cfg.max_endpoint_distance_m) +
               " m apart).\n- The heading change from the parent's end to the child's start must stay below " +
               dsl::detail::format_number(cfg.max_heading_deviation_deg) + " degrees.\n";
    return "Expert rules:\n- Lanes inside the intersection area carry no topology to traffic elements.\n";
}

struct PromptBundle {
    Target target = Target::lsls;
    std::vector<std::string> text_parts;
    std::vector<std::string> image_parts;  // PNG bytes, one per shot
    int shot_count = 0;

    friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

struct FewShotFrame {
    Scene scene;
    GroundTruthTopology gt;
};

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
    return std::string(buf, r.ptr);
}

inline std::string lane_text(const LaneSegment& l) {
    std::string s = "lane " + std::to_string(l.id) + ": [";
    for (std::size_t i = 0; i < l.centerline.size(); ++i) {
        if (i) s += ", ";
        s += "(" + fmt(l.centerline[i].x) + ", " + fmt(l.centerline[i].y) + ", " + fmt(l.centerline[i].z) + ")";
    }
    return s + "]";
}

struct ShotPairs {
    std::vector<std::pair<int, int>> positives;
    std::vector<std::pair<int, int>> negatives;
};

/// Up to 3 nearest ground-truth edges and 3 farthest non-edges by endpoint distance (lsls);
/// for lste, edges and non-edges in (lane id, TE id) order.
inline ShotPairs select_shot_pairs(const FewShotFrame& f, Target t) {
    const auto& s = f.scene;
    std::vector<std::tuple<double, int, int>> pos, neg;
    if (t == Target::lsls) {
        for (std::size_t i = 0; i < s.lanes.size(); ++i)
            for (std::size_t j = 0; j < s.lanes.size(); ++j) {
                if (i == j) continue;
                const double d = geometry::endpoint_distance(s.lanes[i], s.lanes[j]);
                if (f.gt.lsls(i, j)) pos.emplace_back(d, s.lanes[i].id, s.lanes[j].id);
                else neg.emplace_back(-d, s.lanes[i].id, s.lanes[j].id);
            }
    } else {
        for (std::size_t i = 0; i < s.lanes.size(); ++i)
            for (std::size_t j = 0; j < s.traffic_elements.size(); ++j)
                (f.gt.lste(i, j) ? pos : neg).emplace_back(0.0, s.lanes[i].id, s.traffic_elements[j].id);
    }
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    ShotPairs out;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, pos.size()); ++i)
        out.positives.emplace_back(std::get<1>(pos[i]), std::get<2>(pos[i]));
    for (std::size_t i = 0; i < std::min<std::size_t>(3, neg.size()); ++i)
        out.negatives.emplace_back(std::get<1>(neg[i]), std::get<2>(neg[i]));
    return out;
}

inline std::string shot_text(const FewShotFrame& f, Target t, const ShotPairs& pairs, int index) {
    const auto& s = f.scene;
    std::string out = "Example " + std::to_string(index + 1) + " (frame " + s.frame_id + ").\n";
    auto describe = [&](const std::pair<int, int>& p) {
        std::string line = "  " + lane_text(s.lane(p.first)) + "\n  ";
        if (t == Target::lsls) {
            line += lane_text(s.lane(p.second));
        } else {
            const auto& te = s.traffic_element(p.second);
            line += "traffic element " + std::to_string(te.id) + ": " + std::string(to_string(te.category));
        }
        return line + "\n";
    };
    out += "Positive pairs (A, B):\n";
    for (const auto& p : pairs.positives) out += describe(p);
    out += "Negative pairs (A, B):\n";
    for (const auto& p : pairs.negatives) out += describe(p);
    if (!pairs.positives.empty()) out += "The image shows the first positive pair: A in green, B in blue.\n";
    return out;
}

}  // namespace detail

inline std::string target_instruction(Target t) {
    if (t == Target::lsls)
        return "Target: lsls. Write a rule program deciding whether lane B directly succeeds lane A.\n";
    return "Target: lste. Write a rule program deciding whether lane A is governed by traffic element B.\n";
}

inline constexpr std::string_view kGrammarText =
    "Reply with a rule program only, one rule per line:\n"
    "  when <condition> -> POS|NEG|AMB\n"
    "Conditions combine function calls compared with numbers (<, <=, >, >=, ==) or enum values (==) "
    "using and, or, not and parentheses. Call functions with A and B. The first matching rule decides; "
    "AMB or no match defers the pair to visual question answering.\n";

/// Deterministic in its inputs. Each shot adds one text part and one PV rendering.
inline PromptBundle build_synthesis_prompt(const std::string& registry_text, const std::vector<FewShotFrame>& fewshot,
                                           const std::optional<std::string>& rules_text, Target target,
                                           const render::RenderConfig& rcfg = {}) {
    PromptBundle b;
    b.target = target;
    b.text_parts.push_back(std::string(kGrammarText) + target_instruction(target));
    b.text_parts.push_back(registry_text);
    if (rules_text) b.text_parts.push_back(*rules_text);
    for (std::size_t i = 0; i < fewshot.size(); ++i) {
        const auto pairs = detail::select_shot_pairs(fewshot[i], target);
        b.text_parts.push_back(detail::shot_text(fewshot[i], target, pairs, static_cast<int>(i)));
        render::HighlightSpec spec;
        if (!pairs.positives.empty()) {
            spec.green_lane_id = pairs.positives[0].first;
            if (target == Target::lsls) spec.blue_lane_id = pairs.positives[0].second;
        }
        b.image_parts.push_back(encode_png(render::render_pv(fewshot[i].scene, spec, rcfg)));
    }
    b.shot_count = static_cast<int>(fewshot.size());
    return b;
}

inline ChatRequest to_chat_request(const PromptBundle& b, const std::string& model = "gpt-4o") {
    ChatRequest r;
    r.model = model;
    r.max_tokens = 1024;
    ChatMessage sys{"system", {ContentPart::make_text(b.text_parts.front())}};
    ChatMessage user{"user", {}};
    for (std::size_t i = 1; i < b.text_parts.size(); ++i) user.parts.push_back(ContentPart::make_text(b.text_parts[i]));
    for (const auto& img : b.image_parts) user.parts.push_back(ContentPart::make_png(img));
    r.messages = {std::move(sys), std::move(user)};
    const bool has_rules = std::any_of(b.text_parts.begin(), b.text_parts.end(),
                                       [](const std::string& t) { return t.starts_with("Expert rules:"); });
    r.annotations = {{"task", "synthesis"}, {"target", to_string(b.target)}, {"shots", b.shot_count},
                     {"rules", has_rules}};
    return r;
}

/// Strips a surrounding markdown code fence, if any.
inline std::string extract_program_text(const std::string& reply) {
    const auto open = reply.find("```");
    if (open == std::string::npos) return reply;
    auto body = reply.find('\n', open);
    if (body == std::string::npos) return reply;
    ++body;
    const auto close = reply.find("```", body);
    return reply.substr(body, close == std::string::npos ? std::string::npos : close - body);
}

struct SynthesisResult {
    dsl::Program program;
    bool fallback = false;
    int retries = 0;
    std::vector<std::string> errors;
    std::string reply;  // last raw reply
};

inline constexpr int kMaxSynthesisRetries = 2;

/// One exchange plus up to two corrective retries; then the default program for the target.
inline SynthesisResult synthesize_program(ChatClient& client, const PromptBundle& bundle, Target target,
                                          const std::string& model = "gpt-4o") {
    SynthesisResult out;
    ChatRequest req = to_chat_request(bundle, model);
    for (int attempt = 0; attempt <= kMaxSynthesisRetries; ++attempt) {
        if (attempt > 0) ++out.retries;
        std::string err;
        try {
            out.reply = client.complete(req);
            dsl::Program p = dsl::parse_program(extract_program_text(out.reply));
            if (p.target != target)
                throw ProgramError(ProgramError::Kind::Type, 1, 1,
                                   "program targets " + std::string(to_string(p.target)) + ", expected " +
                                       std::string(to_string(target)));
            out.program = std::move(p);
            return out;
        } catch (const ProgramError& e) {
            err = e.what();
            req.messages.push_back({"assistant", {ContentPart::make_text(out.reply)}});
            req.messages.push_back({"user", {ContentPart::make_text("The program was rejected: " + err +
                                                                     "\nReply with a corrected program only.")}});
        } catch (const TransportError& e) {
            err = std::string("transport: ") + e.what();
        }
        out.errors.push_back(err);
    }
    out.program = default_program(target);
    out.fallback = true;
    return out;
}

enum class Source { hard_filter, program, fallback_default };

inline std::string_view to_string(Source s) {
    switch (s) {
        case Source::hard_filter: return "hard_filter";
        case Source::program: return "program";
        default: return "fallback_default";
    }
}

struct PairDecision {
    Verdict verdict = Verdict::AMB;
    Source source = Source::program;
    std::optional<std::size_t> rule_index;
    std::size_t rules_passed = 0;  // filters and rules the pair got through without a decision
    std::string note;
};

struct VerdictMatrix {
    Target target = Target::lsls;
    Matrix<PairDecision> entries;

    Verdict verdict(std::size_t r, std::size_t c) const { return entries(r, c).verdict; }
    std::size_t count(Verdict v) const {
        std::size_t n = 0;
        for (std::size_t r = 0; r < entries.rows(); ++r)
            for (std::size_t c = 0; c < entries.cols(); ++c) n += entries(r, c).verdict == v;
        return n;
    }
};

namespace detail {

inline std::optional<PairDecision> hard_filter_lsls(const LaneSegment& a, const LaneSegment& b, const FastConfig& cfg,
                                                    std::size_t& passed) {
    PairDecision d{Verdict::NEG, Source::hard_filter, std::nullopt, 0, {}};
    if (geometry::endpoint_distance(a, b) > cfg.max_endpoint_distance_m) {
        d.note = "endpoint distance";
        return d;
    }
    ++passed;
    try {
        if (geometry::heading_deviation(a, b) > cfg.max_heading_deviation_deg) {
            d.note = "heading deviation";
            return d;
        }
        ++passed;
    } catch (const GeometryError&) {
        // undecidable here; the program sees the same failure
    }
    return std::nullopt;
}

}  // namespace detail

/// Hard filters first (when enabled), then the program. The lsls diagonal is NEG.
inline VerdictMatrix fast_pass(const SceneContext& ctx, const dsl::Program& program, const FastConfig& cfg = {},
                               bool program_is_fallback = false) {
    const Scene& s = ctx.scene();
    const Target t = program.target;
    const std::size_t m = s.lanes.size();
    const std::size_t cols = t == Target::lsls ? m : s.traffic_elements.size();
    VerdictMatrix vm{t, Matrix<PairDecision>(m, cols)};
    std::vector<geometry::Tristate> membership;
    if (t == Target::lste)
        for (const auto& l : s.lanes) membership.push_back(geometry::is_in_intersection(l, s, ctx.config()));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            auto& out = vm.entries(i, j);
            if (t == Target::lsls && i == j) {
                out = {Verdict::NEG, Source::hard_filter, std::nullopt, 0, "diagonal"};
                continue;
            }
            std::size_t passed = 0;
            if (cfg.hard_filters) {
                if (t == Target::lsls) {
                    if (auto d = detail::hard_filter_lsls(s.lanes[i], s.lanes[j], cfg, passed)) {
                        out = *d;
                        continue;
                    }
                } else {
                    if (membership[i] == geometry::Tristate::Yes) {
                        out = {Verdict::NEG, Source::hard_filter, std::nullopt, 0, "lane in intersection"};
                        continue;
                    }
                    ++passed;
                }
            }
            const auto r = dsl::eval_rule_program_at(program, ctx, i, j);
            out.verdict = r.verdict;
            out.source = program_is_fallback ? Source::fallback_default : Source::program;
            out.rule_index = r.rule_index;
            out.rules_passed = passed + r.rules_passed;
            out.note = r.note;
        }
    }
    return vm;
}

}  // namespace chameleon::fast
