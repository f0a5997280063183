#include <gtest/gtest.h>

#include "support.hpp"

using namespace chameleon;
using namespace chameleon::fast;
using chameleon::testing::line_lane;
using chameleon::testing::make_scene;
using chameleon::testing::ScriptedClient;

namespace {

const std::string kTwoRules = "when dist_end_start(A,B) < 1.0 -> POS\nwhen dist_end_start(A,B) >= 1.0 -> NEG\n";

PromptBundle zero_shot(Target t = Target::lsls) {
    return build_synthesis_prompt(registry_prompt_text(), {}, expert_rules_text(t), t);
}

// Filters and program applied pair by pair, without the matrix code.
Verdict brute_lsls(const SceneContext& ctx, const dsl::Program& p, std::size_t i, std::size_t j, const FastConfig& cfg) {
    const auto& s = ctx.scene();
    if (i == j) return Verdict::NEG;
    const auto& a = s.lanes[i];
    const auto& b = s.lanes[j];
    const auto& e = a.centerline.back();
    const auto& st = b.centerline.front();
    if (std::hypot(e.x - st.x, e.y - st.y, e.z - st.z) > cfg.max_endpoint_distance_m) return Verdict::NEG;
    const auto& a0 = a.centerline[a.centerline.size() - 2];
    const auto& b1 = b.centerline[1];
    const bool degenerate = (a0.x == e.x && a0.y == e.y) || (b1.x == st.x && b1.y == st.y);
    if (!degenerate) {
        double dev = std::abs(std::atan2(e.y - a0.y, e.x - a0.x) - std::atan2(b1.y - st.y, b1.x - st.x)) * 180 / std::numbers::pi;
        if (dev > 180) dev = 360 - dev;
        if (dev > cfg.max_heading_deviation_deg) return Verdict::NEG;
    }
    return dsl::eval_rule_program_at(p, ctx, i, j).verdict;
}

}  // namespace

TEST(FastModes, Names) {
    for (Mode m : {Mode::pairwise, Mode::rules, Mode::fewshot}) EXPECT_EQ(mode_from_string(to_string(m)), m);
    EXPECT_EQ(to_string(Mode::rules), "+rules");
    EXPECT_EQ(to_string(Mode::fewshot), "+fewshot");
    EXPECT_FALSE(mode_from_string("dense").has_value());
}

TEST(SynthesisPrompt, ZeroShotHasNoImages) {
    const PromptBundle b = zero_shot();
    EXPECT_EQ(b.shot_count, 0);
    EXPECT_TRUE(b.image_parts.empty());
    ASSERT_EQ(b.text_parts.size(), 3u);
    EXPECT_EQ(b.text_parts[1], registry_prompt_text());
    EXPECT_TRUE(b.text_parts[2].starts_with("Expert rules:"));
    const auto req = to_chat_request(b);
    EXPECT_EQ(req.annotations["task"], "synthesis");
    EXPECT_EQ(req.annotations["shots"], 0);
    EXPECT_EQ(req.annotations["rules"], true);
    const auto bare = to_chat_request(build_synthesis_prompt(registry_prompt_text(), {}, std::nullopt, Target::lsls));
    EXPECT_EQ(bare.annotations["rules"], false);
}

TEST(SynthesisPrompt, ThreeShotsGiveThreeImages) {
    const auto frames = pipeline::builtin_fewshot_frames(3);
    const PromptBundle b = build_synthesis_prompt(registry_prompt_text(), frames, expert_rules_text(Target::lsls), Target::lsls);
    EXPECT_EQ(b.shot_count, 3);
    ASSERT_EQ(b.image_parts.size(), 3u);
    EXPECT_EQ(b.text_parts.size(), 6u);
    for (const auto& png : b.image_parts) {
        const Image img = decode_png(png);
        EXPECT_EQ(img.width(), 800);
        EXPECT_EQ(img.height(), 450);
    }
    EXPECT_NE(b.text_parts[3].find("Positive pairs"), std::string::npos);
    EXPECT_NE(b.text_parts[3].find("Negative pairs"), std::string::npos);
}

TEST(SynthesisPrompt, Deterministic) {
    const auto frames = pipeline::builtin_fewshot_frames(3);
    for (Target t : {Target::lsls, Target::lste}) {
        const auto a = to_chat_request(build_synthesis_prompt(registry_prompt_text(), frames, expert_rules_text(t), t));
        const auto b = to_chat_request(build_synthesis_prompt(registry_prompt_text(), frames, expert_rules_text(t), t));
        EXPECT_EQ(canonical_bytes(a), canonical_bytes(b));
    }
}

TEST(SynthesisPrompt, ShotPairsAreNearestPositivesAndFarthestNegatives) {
    const auto frame = pipeline::builtin_fewshot_frames(1)[0];
    const auto pairs = fast::detail::select_shot_pairs(frame, Target::lsls);
    const auto& s = frame.scene;
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < s.lanes.size(); ++i)
        for (std::size_t j = 0; j < s.lanes.size(); ++j)
            if (i != j) (frame.gt.lsls(i, j) ? pos : neg).push_back(geometry::endpoint_distance(s.lanes[i], s.lanes[j]));
    std::sort(pos.begin(), pos.end());
    std::sort(neg.rbegin(), neg.rend());
    ASSERT_EQ(pairs.positives.size(), std::min<std::size_t>(3, pos.size()));
    ASSERT_EQ(pairs.negatives.size(), 3u);
    for (std::size_t k = 0; k < pairs.positives.size(); ++k) {
        const auto [a, b] = pairs.positives[k];
        EXPECT_TRUE(frame.gt.lsls(s.lane_index(a), s.lane_index(b)));
        EXPECT_DOUBLE_EQ(geometry::endpoint_distance(s.lane(a), s.lane(b)), pos[k]);
    }
    for (std::size_t k = 0; k < 3; ++k) {
        const auto [a, b] = pairs.negatives[k];
        EXPECT_FALSE(frame.gt.lsls(s.lane_index(a), s.lane_index(b)));
        EXPECT_DOUBLE_EQ(geometry::endpoint_distance(s.lane(a), s.lane(b)), neg[k]);
    }
}

TEST(ProgramSynthesis, HappyPath) {
    ScriptedClient client({"```\n" + kTwoRules + "```"});
    const auto r = synthesize_program(client, zero_shot(), Target::lsls);
    EXPECT_FALSE(r.fallback);
    EXPECT_EQ(r.retries, 0);
    EXPECT_EQ(r.program, dsl::parse_program(kTwoRules));
    EXPECT_EQ(client.requests().size(), 1u);
    EXPECT_EQ(client.requests()[0].temperature, 0.0);
}

TEST(ProgramSynthesis, GarbageFallsBackToDefault) {
    ScriptedClient client({"I cannot help with that."});
    const auto r = synthesize_program(client, zero_shot(), Target::lsls);
    EXPECT_TRUE(r.fallback);
    EXPECT_EQ(r.program, default_program(Target::lsls));
    EXPECT_EQ(client.requests().size(), 3u);
    EXPECT_EQ(r.errors.size(), 3u);
}

TEST(ProgramSynthesis, OneRetryAfterUnknownPrimitive) {
    ScriptedClient client({"when frobnicate(A) > 1 -> POS", kTwoRules});
    const auto r = synthesize_program(client, zero_shot(), Target::lsls);
    EXPECT_FALSE(r.fallback);
    EXPECT_EQ(r.retries, 1);
    ASSERT_EQ(r.errors.size(), 1u);
    EXPECT_NE(r.errors[0].find("unknown primitive frobnicate"), std::string::npos);
    const auto reqs = client.requests();
    ASSERT_EQ(reqs.size(), 2u);
    // the retry carries the rejected reply and the diagnostic
    EXPECT_EQ(reqs[1].messages.size(), reqs[0].messages.size() + 2);
    EXPECT_NE(reqs[1].messages.back().parts[0].text.find("frobnicate"), std::string::npos);
}

TEST(ProgramSynthesis, TransportFailuresFallBack) {
    ScriptedClient client({"!connection refused"});
    const auto r = synthesize_program(client, zero_shot(Target::lste), Target::lste);
    EXPECT_TRUE(r.fallback);
    EXPECT_EQ(r.program, default_program(Target::lste));
    EXPECT_TRUE(r.errors[0].starts_with("transport:"));
}

TEST(ProgramSynthesis, WrongTargetIsRejected) {
    ScriptedClient client({kTwoRules, "target lste\nwhen ego_dev(A) > 45 -> NEG"});
    const auto r = synthesize_program(client, zero_shot(Target::lste), Target::lste);
    EXPECT_FALSE(r.fallback);
    EXPECT_EQ(r.retries, 1);
    EXPECT_EQ(r.program.target, Target::lste);
}

TEST(FastPass, CollinearTouchingLanesArePositive) {
    const Scene s = make_scene({line_lane(1, 0, 0, 10, 0), line_lane(2, 10, 0, 20, 0)});
    const SceneContext ctx(s);
    const auto vm = fast_pass(ctx, default_program(Target::lsls));
    EXPECT_EQ(vm.verdict(0, 1), Verdict::POS);
    EXPECT_EQ(vm.verdict(1, 0), Verdict::NEG);
    EXPECT_EQ(vm.entries(0, 0).note, "diagonal");
    EXPECT_EQ(vm.entries(0, 1).source, Source::program);
}

TEST(FastPass, DistantLanesFilteredRegardlessOfProgram) {
    const Scene s = make_scene({line_lane(1, 0, 0, 10, 0), line_lane(2, 60, 0, 70, 0)});
    const SceneContext ctx(s);
    const auto always = dsl::parse_program("when length(A) >= 0 -> POS");
    const auto vm = fast_pass(ctx, always);
    EXPECT_EQ(vm.verdict(0, 1), Verdict::NEG);
    EXPECT_EQ(vm.entries(0, 1).source, Source::hard_filter);
    EXPECT_EQ(vm.entries(0, 1).note, "endpoint distance");
    FastConfig off;
    off.hard_filters = false;
    EXPECT_EQ(fast_pass(ctx, always, off).verdict(0, 1), Verdict::POS);
}

TEST(FastPass, HeadingFilter) {
    const Scene s = make_scene({line_lane(1, 0, 0, 10, 0), line_lane(2, 11, 0, 1, 0)});
    const auto vm = fast_pass(SceneContext(s), dsl::parse_program("when length(A) >= 0 -> POS"));
    EXPECT_EQ(vm.entries(0, 1).note, "heading deviation");
}

TEST(FastPass, IntersectionSceneMatchesPairwiseOracle) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        auto cfg = synth::fixture_left_turn_light();
        cfg.noise = {seed * 0.3, 0.0};
        const auto [s, gt] = synth::synth_scene(cfg, seed);
        const SceneContext ctx(s);
        for (const auto* text : {&assets::kLslsDefault, &assets::kLslsFewshot, &assets::kLslsPairwise}) {
            const auto p = dsl::parse_program(*text);
            const FastConfig fc;
            const auto vm = fast_pass(ctx, p, fc);
            ASSERT_EQ(vm.entries.rows(), s.lanes.size());
            ASSERT_EQ(vm.entries.cols(), s.lanes.size());
            for (std::size_t i = 0; i < s.lanes.size(); ++i)
                for (std::size_t j = 0; j < s.lanes.size(); ++j)
                    ASSERT_EQ(vm.verdict(i, j), brute_lsls(ctx, p, i, j, fc)) << seed << " " << i << "," << j;
        }
        const auto lste = fast_pass(ctx, default_program(Target::lste));
        ASSERT_EQ(lste.entries.cols(), s.traffic_elements.size());
        for (std::size_t i = 0; i < s.lanes.size(); ++i) {
            const bool inside = geometry::is_in_intersection(s.lanes[i], s) == geometry::Tristate::Yes;
            for (std::size_t j = 0; j < s.traffic_elements.size(); ++j) {
                const Verdict want = inside ? Verdict::NEG : dsl::eval_rule_program_at(default_program(Target::lste), ctx, i, j).verdict;
                EXPECT_EQ(lste.verdict(i, j), want);
            }
        }
    }
}

TEST(FastPass, FiltersOnlyAddNegatives) {
    FastConfig off;
    off.hard_filters = false;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto [s, gt] = synth::synth_scene(synth::suite_config(seed, {0.6, 0.1}), seed);
        const SceneContext ctx(s);
        for (const auto* text : {&assets::kLslsDefault, &assets::kLslsPairwise, &assets::kLsteDefault}) {
            const auto p = dsl::parse_program(*text);
            const auto with = fast_pass(ctx, p), without = fast_pass(ctx, p, off);
            for (std::size_t i = 0; i < with.entries.rows(); ++i)
                for (std::size_t j = 0; j < with.entries.cols(); ++j) {
                    if (without.verdict(i, j) == Verdict::NEG) EXPECT_EQ(with.verdict(i, j), Verdict::NEG);
                    if (with.verdict(i, j) != Verdict::NEG) EXPECT_EQ(with.verdict(i, j), without.verdict(i, j));
                }
        }
    }
}

TEST(FastPass, NoiselessCorridorsAreFullyDecided) {
    for (int lanes = 1; lanes <= 4; ++lanes) {
        for (bool oncoming : {false, true}) {
            synth::SynthConfig cfg;
            cfg.lanes_per_direction = lanes;
            cfg.opposite_direction = oncoming;
            const auto [s, gt] = synth::synth_scene(cfg, static_cast<std::uint64_t>(lanes));
            const auto vm = fast_pass(SceneContext(s), default_program(Target::lsls));
            EXPECT_EQ(vm.count(Verdict::AMB), 0u) << lanes << " " << oncoming;
        }
    }
}

TEST(FastPass, ErrorsStayAmbiguous) {
    LaneSegment bad = line_lane(1, 0, 0, 10, 0);
    bad.centerline.push_back(bad.centerline.back());
    const Scene s = make_scene({bad, line_lane(2, 10, 0, 20, 0)});
    const auto vm = fast_pass(SceneContext(s), default_program(Target::lsls), {}, true);
    EXPECT_EQ(vm.verdict(0, 1), Verdict::AMB);
    EXPECT_FALSE(vm.entries(0, 1).note.empty());
    EXPECT_EQ(vm.entries(0, 1).source, Source::fallback_default);
}
