#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

#include "chameleon/chat.hpp"
#include "chameleon/render.hpp"

namespace chameleon::vqa {

enum class VqaKind { LeftOrRight, IsInIntersection, Adjacency, Vector };

inline constexpr std::array<VqaKind, 4> kAllKinds = {VqaKind::LeftOrRight, VqaKind::IsInIntersection,
                                                     VqaKind::Adjacency, VqaKind::Vector};

inline std::string_view to_string(VqaKind k) {
    switch (k) {
        case VqaKind::LeftOrRight: return "left_or_right";
        case VqaKind::IsInIntersection: return "is_in_intersection";
        case VqaKind::Adjacency: return "adjacency";
        default: return "vector";
    }
}

inline std::optional<VqaKind> kind_from_string(std::string_view s) {
    for (auto k : kAllKinds)
        if (to_string(k) == s) return k;
    return std::nullopt;
}

enum class VqaLabel { Yes, No, Left, Right, None };

inline std::string_view to_string(VqaLabel l) {
    switch (l) {
        case VqaLabel::Yes: return "yes";
        case VqaLabel::No: return "no";
        case VqaLabel::Left: return "left";
        case VqaLabel::Right: return "right";
        default: return "none";
    }
}

inline std::optional<VqaLabel> label_from_string(std::string_view s) {
    for (auto l : {VqaLabel::Yes, VqaLabel::No, VqaLabel::Left, VqaLabel::Right, VqaLabel::None})
        if (to_string(l) == s) return l;
    return std::nullopt;
}

struct PromptTemplate {
    std::string_view description;
    std::string_view question;
};

// Prompt wording is fixed; do not edit without updating tests/golden/vqa.
inline PromptTemplate prompt_template(VqaKind k) {
    switch (k) {
        case VqaKind::LeftOrRight:
            return {"In the provided bird's-eye view (BEV), the black lines in the photos are lane boundaries that "
                    "are only for references. Color blocks highlighted are different segments of lanes. The colors "
                    "of the blocks come from green and blue.",
                    "You are an expert in determining positional relationships of lane segments in the image. Is the "
                    "green segment on the left of the blue segment, or on the right? Please reply in a brief "
                    "sentence."};
        case VqaKind::IsInIntersection:
            return {"The provided photo is mosaiced with two images, with the bird's-eye view (BEV) on the left and "
                    "the front perspective view (PV) on the right. Normally, the lane segment is considered as not "
                    "in the intersection when it is in front of the area or at rear of the area.",
                    "You are an expert in extracting the positional information of lane segments. Let's determine "
                    "if the the green segment patch is in the intersection area. Please reply in a brief sentence "
                    "starting with \"Yes\" or \"No\"."};
        case VqaKind::Adjacency:
            return {"In the provided bird's-eye view (BEV), the black lines in the photos are lane boundaries. Color "
                    "blocks highlighted are different segments of lanes. Only two lane segments in the same lane end "
                    "to end adjacent are considered as directly connected.",
                    "You are an expert in determining adjacency of lane segments. Let's determine if the the green "
                    "patch is directly connected with the blue patch. Please reply in a brief sentence starting with "
                    "\"Yes\" or \"No\"."};
        default:
            return {"In the provided bird's-eye view (BEV), the green and blue lane segments are highlighted. The "
                    "arrow represents the directions of lanes. Normally or when the case is confusing, two "
                    "directions with deviation of less than 45 degrees are considered as compatible.",
                    "You are an expert in determining direction relationships of lane segments. Let's determine if "
                    "the directions of the two arrows match. Please reply in a brief sentence starting with \"Yes\" "
                    "or \"No\"."};
    }
}

inline bool is_pair_kind(VqaKind k) { return k != VqaKind::IsInIntersection; }

struct VqaQuery {
    VqaKind kind = VqaKind::Adjacency;
    std::string image_png;
    std::string description_text;
    std::string question_text;
    int green_lane_id = 0;
    std::optional<int> blue_lane_id;
    std::string frame_id;

    friend bool operator==(const VqaQuery&, const VqaQuery&) = default;
};

/// Renders the visual prompt for `kind`. Pair kinds need (green, blue);
/// IsInIntersection needs only green and shows BEV | PV.
inline VqaQuery build_vqa_query(VqaKind kind, const Scene& scene, int green, std::optional<int> blue = std::nullopt,
                                const render::RenderConfig& rcfg = {}) {
    if (!scene.has_lane(green)) throw UnknownIdError("vqa: unknown subject lane " + std::to_string(green));
    if (is_pair_kind(kind)) {
        if (!blue) throw UnknownIdError("vqa: " + std::string(to_string(kind)) + " needs a blue lane");
        if (!scene.has_lane(*blue)) throw UnknownIdError("vqa: unknown subject lane " + std::to_string(*blue));
    }
    VqaQuery q;
    q.kind = kind;
    q.green_lane_id = green;
    q.frame_id = scene.frame_id;
    const auto tpl = prompt_template(kind);
    q.description_text = tpl.description;
    q.question_text = tpl.question;
    render::HighlightSpec spec;
    spec.green_lane_id = green;
    if (is_pair_kind(kind)) {
        q.blue_lane_id = blue;
        spec.blue_lane_id = blue;
        spec.draw_arrows = kind == VqaKind::Vector;
        q.image_png = encode_png(render::render_bev(scene, spec, rcfg));
    } else {
        q.image_png = encode_png(mosaic(render::render_bev(scene, spec, rcfg), render::render_pv(scene, spec, rcfg)));
    }
    return q;
}

inline ChatRequest to_chat_request(const VqaQuery& q, const std::string& model = "gpt-4o") {
    ChatRequest r;
    r.model = model;
    r.max_tokens = 64;
    r.messages.push_back({"user",
                          {ContentPart::make_png(q.image_png), ContentPart::make_text("Description: " + q.description_text),
                           ContentPart::make_text("Question: " + q.question_text)}});
    r.annotations = {{"task", "vqa"}, {"kind", to_string(q.kind)}, {"frame", q.frame_id}, {"green", q.green_lane_id}};
    if (q.blue_lane_id) r.annotations["blue"] = *q.blue_lane_id;
    return r;
}

struct ParsedAnswer {
    VqaLabel label = VqaLabel::No;
    bool parse_failed = false;
};

/// Failure maps to the negative label (No, or None for LeftOrRight) with the flag set.
inline ParsedAnswer parse_vqa_answer(VqaKind kind, std::string_view reply) {
    std::string lower(reply);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (kind != VqaKind::LeftOrRight) {
        std::size_t i = 0;
        while (i < lower.size() && !std::isalpha(static_cast<unsigned char>(lower[i]))) ++i;
        std::size_t j = i;
        while (j < lower.size() && std::isalpha(static_cast<unsigned char>(lower[j]))) ++j;
        const std::string_view word(lower.data() + i, j - i);
        if (word == "yes") return {VqaLabel::Yes, false};
        if (word == "no") return {VqaLabel::No, false};
        return {VqaLabel::No, true};
    }
    bool had_no_relationship = false;
    for (std::size_t p; (p = lower.find("no relationship")) != std::string::npos;) {
        lower.replace(p, 15, std::string(15, ' '));
        had_no_relationship = true;
    }
    const auto l = lower.find("left");
    const auto r = lower.find("right");
    if (l != std::string::npos && (r == std::string::npos || l < r)) return {VqaLabel::Left, false};
    if (r != std::string::npos) return {VqaLabel::Right, false};
    if (had_no_relationship || lower.find("neither") != std::string::npos) return {VqaLabel::None, false};
    return {VqaLabel::None, true};
}

/// Reply wording used by offline clients, one sentence per label.
inline std::string canonical_reply(VqaKind kind, VqaLabel label) {
    switch (kind) {
        case VqaKind::LeftOrRight:
            if (label == VqaLabel::Left) return "The green segment is on the left of the blue segment.";
            if (label == VqaLabel::Right) return "The green segment is on the right of the blue segment.";
            return "There is no relationship between the green segment and the blue segment.";
        case VqaKind::IsInIntersection:
            return label == VqaLabel::Yes ? "Yes, the green segment patch is in the intersection area."
                                          : "No, the green segment patch is not in the intersection area.";
        case VqaKind::Adjacency:
            return label == VqaLabel::Yes ? "Yes, the green patch is directly connected with the blue patch."
                                          : "No, the green patch is not directly connected with the blue patch.";
        default:
            return label == VqaLabel::Yes ? "Yes, the directions of the two arrows match."
                                          : "No, the directions of the two arrows do not match.";
    }
}

}  // namespace chameleon::vqa
