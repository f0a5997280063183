#include <gtest/gtest.h>

#include <fstream>
#include <thread>

#include "chameleon/cli.hpp"
#include "chameleon/http_client.hpp"
#include "support.hpp"

using namespace chameleon;
using chameleon::testing::line_lane;
using chameleon::testing::make_scene;
using chameleon::testing::scratch_dir;

namespace {

ChatRequest vqa_request(const std::string& frame, int green, int blue, const std::string& tag) {
    ChatRequest req;
    req.messages.push_back({"user", {ContentPart::make_text(tag)}});
    req.annotations = {{"task", "vqa"}, {"kind", "adjacency"}, {"frame", frame}, {"green", green}, {"blue", blue}};
    return req;
}

ChatRequest text_request(const std::string& text) {
    ChatRequest req;
    req.messages.push_back({"user", {ContentPart::make_text(text)}});
    return req;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// Two lanes meeting end to start plus one far away.
std::pair<Scene, GroundTruthTopology> small_frame() {
    Scene s = make_scene({line_lane(1, 0, 0, 10, 0), line_lane(2, 10, 0, 20, 0), line_lane(3, 0, 30, 10, 30)}, {}, "small");
    GroundTruthTopology gt = chameleon::testing::empty_gt(s);
    gt.lsls(0, 1) = 1;
    return {s, gt};
}

}  // namespace

TEST(Synth, SingleLaneCorridor) {
    synth::SynthConfig c;
    c.lanes_per_direction = 1;
    c.segments = 3;
    const auto [s, gt] = synth::synth_scene(c, 0);
    ASSERT_EQ(s.lanes.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(gt.lsls(i, j), (j == i + 1) ? 1 : 0) << i << "," << j;
    EXPECT_FALSE(s.intersection_polygon);
    EXPECT_TRUE(validate_scene(s).empty());
}

TEST(Synth, FourWayJunctionConnectorsAreInside) {
    synth::SynthConfig c;
    c.layout = synth::Layout::four_way_intersection;
    c.lanes_per_direction = 2;
    c.segments = 3;
    const auto [s, gt] = synth::synth_scene(c, 3);
    // 4 directions x 2 lanes x (approach + exit) x 3 segments, plus per direction 2 straight + 1 left + 1 right
    ASSERT_EQ(s.lanes.size(), 64u);
    int inside = 0;
    for (const auto& l : s.lanes) {
        const bool yes = geometry::is_in_intersection(l, s) == geometry::Tristate::Yes;
        inside += yes;
        const std::size_t i = s.lane_index(l.id);
        int preds = 0, succs = 0;
        for (std::size_t k = 0; k < s.lanes.size(); ++k) {
            preds += gt.lsls(k, i);
            succs += gt.lsls(i, k);
        }
        // connectors have exactly one approach parent and one exit child
        if (yes) {
            EXPECT_EQ(preds, 1);
            EXPECT_EQ(succs, 1);
        }
    }
    EXPECT_EQ(inside, 16);
}

TEST(Synth, DeterministicAndNoiseKeepsIds) {
    const auto cfg = synth::suite_config(5, {0.5, 0.2});
    const auto [a, ga] = synth::synth_scene(cfg, 5);
    const auto [b, gb] = synth::synth_scene(cfg, 5);
    EXPECT_EQ(serialize_scene(a, ga), serialize_scene(b, gb));
    const auto [clean, gc] = synth::synth_scene(synth::without_noise(cfg), 5);
    EXPECT_LE(a.lanes.size(), clean.lanes.size());
    for (const auto& l : a.lanes) {
        ASSERT_TRUE(clean.has_lane(l.id));
        const auto& cl = clean.lane(l.id).centerline;
        ASSERT_EQ(cl.size(), l.centerline.size());
        for (std::size_t k = 1; k + 1 < cl.size(); ++k) EXPECT_EQ(cl[k], l.centerline[k]);
    }
    for (const auto& x : a.lanes)
        for (const auto& y : a.lanes)
            EXPECT_EQ(ga.lsls(a.lane_index(x.id), a.lane_index(y.id)), gc.lsls(clean.lane_index(x.id), clean.lane_index(y.id)));
}

TEST(Synth, ConfigJsonRoundTripAndValidation) {
    auto c = synth::fixture_right_turn_only();
    c.noise = {0.3, 0.1};
    const auto back = synth::synth_config_from_json(synth::synth_config_to_json(c));
    EXPECT_EQ(synth::synth_config_to_json(back), synth::synth_config_to_json(c));
    synth::SynthConfig bad;
    bad.segments = 0;
    EXPECT_FALSE(synth::validate_config(bad).empty());
    EXPECT_THROW(synth::synth_scene(bad, 0), Error);
    EXPECT_THROW(synth::synth_config_from_json({{"layout", "roundabout"}}), SchemaError);
    EXPECT_THROW(synth::synth_config_from_json({{"noise", {{"dropout", 1.0}}}}), SchemaError);
}

TEST(Synth, CornerCaseFixtureTruth) {
    {
        const auto [s, gt] = synth::synth_scene(synth::fixture_passed_intersection(), 0);
        for (std::size_t i = 0; i < s.lanes.size(); ++i) EXPECT_EQ(gt.lste(i, 0), 0);
    }
    {
        const auto [s, gt] = synth::synth_scene(synth::fixture_left_turn_light(), 0);
        int left = 0, red = 0;
        for (std::size_t i = 0; i < s.lanes.size(); ++i) {
            left += gt.lste(i, 0);
            red += gt.lste(i, 1);
        }
        EXPECT_EQ(left, 1);
        EXPECT_EQ(red, 3);
    }
    {
        const auto [s, gt] = synth::synth_scene(synth::fixture_straight_sign(), 0);
        int n = 0;
        for (std::size_t i = 0; i < s.lanes.size(); ++i) {
            if (!gt.lste(i, 0)) continue;
            ++n;
            // every tagged segment runs along the ego lane (y = 0) ahead of the rear axle
            EXPECT_NEAR(s.lanes[i].centerline.front().y, 0.0, 1e-9);
            EXPECT_GT(s.lanes[i].centerline.back().x, 0.0);
        }
        EXPECT_GE(n, 1);
    }
    {
        const auto [s, gt] = synth::synth_scene(synth::fixture_right_turn_only(), 0);
        int tagged = 0;
        for (std::size_t i = 0; i < s.lanes.size(); ++i) tagged += gt.lste(i, 0);
        EXPECT_EQ(tagged, 2);
    }
}

TEST(Mock, ExactAnswersAtZeroError) {
    const auto [s, gt] = small_frame();
    harness::MockClient mock;
    mock.add_frame(s, gt);
    EXPECT_EQ(mock.complete(vqa_request("small", 1, 2, "q")),
              vqa::canonical_reply(vqa::VqaKind::Adjacency, vqa::VqaLabel::Yes));
    EXPECT_EQ(mock.complete(vqa_request("small", 2, 1, "q")),
              vqa::canonical_reply(vqa::VqaKind::Adjacency, vqa::VqaLabel::No));
    EXPECT_EQ(mock.calls(), 2);
    EXPECT_THROW(mock.complete(vqa_request("other", 1, 2, "q")), Error);
    EXPECT_THROW(mock.complete(vqa_request("small", 1, 99, "q")), Error);
    EXPECT_THROW(mock.complete(text_request("no annotations")), Error);
}

TEST(Mock, FullErrorFlipsEveryAnswer) {
    const auto [s, gt] = small_frame();
    harness::MockClient mock({1.0, 0});
    mock.add_frame(s, gt);
    for (int k = 0; k < 50; ++k) {
        EXPECT_EQ(mock.complete(vqa_request("small", 1, 2, std::to_string(k))),
                  vqa::canonical_reply(vqa::VqaKind::Adjacency, vqa::VqaLabel::No));
        EXPECT_EQ(mock.complete(vqa_request("small", 1, 3, std::to_string(k))),
                  vqa::canonical_reply(vqa::VqaKind::Adjacency, vqa::VqaLabel::Yes));
    }
    for (int k = 0; k < 50; ++k) {
        const auto l = harness::apply_policy(vqa::VqaKind::LeftOrRight, vqa::VqaLabel::Left, std::to_string(k), {1.0, 0});
        EXPECT_NE(l, vqa::VqaLabel::Left);
    }
}

TEST(Mock, FlipRateMatchesEpsilon) {
    const auto [s, gt] = small_frame();
    harness::MockClient mock({0.2, 11});
    mock.add_frame(s, gt);
    const std::string yes = vqa::canonical_reply(vqa::VqaKind::Adjacency, vqa::VqaLabel::Yes);
    int flips = 0;
    for (int k = 0; k < 10000; ++k) flips += mock.complete(vqa_request("small", 1, 2, "item " + std::to_string(k))) != yes;
    EXPECT_NEAR(flips, 2000, 120);
}

TEST(Mock, AnswersIndependentOfCallOrder) {
    const auto [s, gt] = small_frame();
    std::vector<ChatRequest> reqs;
    for (int k = 0; k < 200; ++k) reqs.push_back(vqa_request("small", 1 + k % 3, 1 + (k + 1) % 3, "q" + std::to_string(k)));
    harness::MockClient a({0.3, 5}), b({0.3, 5});
    a.add_frame(s, gt);
    b.add_frame(s, gt);
    std::vector<std::string> fwd, rev(reqs.size());
    for (const auto& r : reqs) fwd.push_back(a.complete(r));
    for (std::size_t k = reqs.size(); k-- > 0;) rev[k] = b.complete(reqs[k]);
    EXPECT_EQ(fwd, rev);
    harness::MockClient other({0.3, 6});
    other.add_frame(s, gt);
    int diff = 0;
    for (std::size_t k = 0; k < reqs.size(); ++k) diff += other.complete(reqs[k]) != fwd[k];
    EXPECT_GT(diff, 0);
}

TEST(Mock, SynthesisScripts) {
    ChatRequest req = text_request("synthesise");
    req.annotations = {{"task", "synthesis"}, {"target", "lsls"}};
    harness::MockClient mock;
    EXPECT_NO_THROW(dsl::parse_program(fast::extract_program_text(mock.complete(req))));
    req.annotations["task"] = "chat";
    EXPECT_THROW(mock.complete(req), Error);
}

TEST(FaultInjection, RateAndDeterminism) {
    harness::MockClient inner;
    harness::FaultInjectingClient none(inner, 0.0), all(inner, 1.0), some(inner, 0.3, 9), again(inner, 0.3, 9);
    int failures = 0;
    std::vector<bool> first, second;
    for (int k = 0; k < 4000; ++k) {
        ChatRequest r = text_request("call " + std::to_string(k));
        r.annotations = {{"task", "synthesis"}, {"target", "lsls"}};
        EXPECT_NO_THROW(none.complete(r));
        EXPECT_THROW(all.complete(r), TransportError);
        bool failed = false;
        try {
            some.complete(r);
        } catch (const TransportError&) {
            failed = true;
        }
        failures += failed;
        first.push_back(failed);
    }
    EXPECT_NEAR(failures / 4000.0, 0.3, 0.03);
    EXPECT_EQ(some.injected(), failures);
    for (int k = 4000; k-- > 0;) {
        ChatRequest r = text_request("call " + std::to_string(k));
        r.annotations = {{"task", "synthesis"}, {"target", "lsls"}};
        bool failed = false;
        try {
            again.complete(r);
        } catch (const TransportError&) {
            failed = true;
        }
        second.push_back(failed);
    }
    std::reverse(second.begin(), second.end());
    EXPECT_EQ(first, second);
}

TEST(Transcript, RecordThenReplay) {
    const auto [s, gt] = small_frame();
    harness::MockClient mock({0.25, 2});
    mock.add_frame(s, gt);
    harness::FaultInjectingClient faults(mock, 0.4, 3);
    harness::RecordingClient rec(faults);
    std::vector<std::string> outcomes;
    auto call = [&](ChatClient& c, const ChatRequest& r) {
        try {
            return c.complete(r);
        } catch (const TransportError& e) {
            return std::string("ERR ") + e.what();
        }
    };
    std::vector<ChatRequest> reqs;
    for (int k = 0; k < 60; ++k) reqs.push_back(vqa_request("small", 1, 2 + k % 2, "r" + std::to_string(k % 20)));
    for (const auto& r : reqs) outcomes.push_back(call(rec, r));
    EXPECT_EQ(rec.entries().size(), reqs.size());

    const auto entries = harness::parse_transcript(rec.to_jsonl());
    ASSERT_EQ(entries.size(), reqs.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
        EXPECT_EQ(entries[k].digest, request_digest(reqs[k]));
        EXPECT_EQ(harness::to_json(entries[k]), harness::to_json(rec.entries()[k]));
    }
    harness::ReplayClient replay(entries);
    for (std::size_t k = 0; k < reqs.size(); ++k) EXPECT_EQ(call(replay, reqs[k]), outcomes[k]) << k;
    try {
        replay.complete(reqs[0]);
        FAIL() << "exhausted transcript must not answer";
    } catch (const TransportError&) {
        FAIL() << "a missing entry is not a transport failure";
    } catch (const Error&) {
    }
}

TEST(HttpClient, EndpointAndBody) {
    const auto e = parse_endpoint("http://localhost:8080/v1/chat/completions");
    EXPECT_EQ(e.scheme_host_port, "http://localhost:8080");
    EXPECT_EQ(e.path, "/v1/chat/completions");
    EXPECT_EQ(parse_endpoint("https://api.example.com").path, "/v1/chat/completions");
    EXPECT_THROW(parse_endpoint("localhost:8080"), TransportError);

    ChatRequest req;
    req.messages.push_back({"system", {ContentPart::make_text("sys")}});
    req.messages.push_back({"user", {ContentPart::make_text("look"), ContentPart::make_png(std::string("\x89PNG", 4))}});
    req.annotations = {{"task", "vqa"}};
    const auto body = chat_completions_body(req);
    EXPECT_EQ(body["model"], "gpt-4o");
    EXPECT_EQ(body["temperature"], 0.0);
    EXPECT_FALSE(body.contains("annotations"));
    ASSERT_EQ(body["messages"].size(), 2u);
    EXPECT_EQ(body["messages"][1]["content"][0]["text"], "look");
    EXPECT_EQ(body["messages"][1]["content"][1]["image_url"]["url"], "data:image/png;base64,iVBORw==");

    EXPECT_EQ(reply_text(R"({"choices":[{"message":{"content":"Yes."}}]})"), "Yes.");
    EXPECT_EQ(reply_text(R"({"choices":[{"message":{"content":[{"type":"text","text":"a"},{"type":"text","text":"b"}]}}]})"), "ab");
    EXPECT_THROW(reply_text("{}"), TransportError);
    EXPECT_THROW(reply_text("not json"), TransportError);
}

TEST(HttpClient, TalksToLocalServer) {
    httplib::Server server;
    std::string seen_auth, seen_body;
    server.Post("/v1/chat/completions", [&](const httplib::Request& rq, httplib::Response& rs) {
        seen_auth = rq.get_header_value("Authorization");
        seen_body = rq.body;
        rs.set_content(R"({"choices":[{"message":{"role":"assistant","content":"No, they are not adjacent."}}]})",
                       "application/json");
    });
    server.Post("/broken", [](const httplib::Request&, httplib::Response& rs) {
        rs.status = 500;
        rs.set_content("boom", "text/plain");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    const std::string base = "http://127.0.0.1:" + std::to_string(port);

    HttpChatClient ok(base + "/v1/chat/completions", "secret", 5);
    EXPECT_EQ(ok.complete(text_request("hello")), "No, they are not adjacent.");
    EXPECT_EQ(seen_auth, "Bearer secret");
    EXPECT_EQ(nlohmann::json::parse(seen_body)["messages"][0]["content"][0]["text"], "hello");

    HttpChatClient broken(base + "/broken", "", 5);
    EXPECT_THROW(broken.complete(text_request("x")), TransportError);
    server.stop();
    t.join();

    HttpChatClient refused(base + "/v1/chat/completions", "", 1);
    EXPECT_THROW(refused.complete(text_request("x")), TransportError);
}

TEST(Cli, SynthExtractEvalReport) {
    const auto dir = scratch_dir("cli_flow");
    const auto cfg = dir / "suite.json";
    std::ofstream(cfg) << R"({"suite": true})";
    const auto frames = cli::run_synth({cfg.string(), 0, 6, (dir / "data").string()});
    ASSERT_EQ(frames.size(), 6u);
    EXPECT_EQ(cli::json_files(dir / "data" / "scenes").size(), 6u);
    EXPECT_EQ(cli::json_files(dir / "data" / "gt").size(), 6u);

    cli::ExtractOptions ex;
    ex.scenes_dir = (dir / "data").string();
    ex.out_dir = (dir / "pred").string();
    const auto sum = cli::run_extract(ex);
    EXPECT_EQ(sum.frames, 6u);
    EXPECT_EQ(sum.synthesis_exchanges, 2);
    EXPECT_LE(sum.vlm_calls, 6 * 6);
    EXPECT_TRUE(std::filesystem::exists(dir / "pred" / "run.json"));
    EXPECT_TRUE(std::filesystem::exists(dir / "pred" / "vqa_transcript.jsonl"));

    const auto rep = cli::run_eval({(dir / "pred").string(), (dir / "data").string(), (dir / "report.json").string()});
    EXPECT_EQ(rep.frames, 6u);
    EXPECT_DOUBLE_EQ(rep.top_lsls, 1.0);
    EXPECT_DOUBLE_EQ(rep.top_lste, 1.0);
    EXPECT_EQ(nlohmann::json::parse(slurp(dir / "report.json"))["frames"], 6);

    const auto tr = cli::trace_report((dir / "pred").string());
    EXPECT_EQ(tr["frames"], 6);
    EXPECT_EQ(tr["vlm_calls"], sum.vlm_calls);
    EXPECT_LE(tr["max_vlm_calls_per_frame"].get<int>(), 6);
    EXPECT_EQ(tr["latency"]["frames"].size(), 6u);

    ex.mode = "bogus";
    EXPECT_THROW(cli::run_extract(ex), Error);
    ex.mode.reset();
    ex.budget = -1;
    EXPECT_THROW(cli::run_extract(ex), Error);
    EXPECT_THROW(cli::run_eval({(dir / "pred").string(), (dir / "missing").string(), ""}), Error);
}

TEST(Cli, RecordedRunReplaysByteForByte) {
    const auto dir = scratch_dir("cli_replay");
    cli::run_synth({"", 1, 3, (dir / "data").string()});
    cli::ExtractOptions ex;
    ex.scenes_dir = (dir / "data").string();
    ex.fault_rate = 0.3;
    ex.epsilon = 0.2;
    ex.record_path = (dir / "run.jsonl").string();
    ex.out_dir = (dir / "a").string();
    cli::run_extract(ex);
    cli::ExtractOptions re;
    re.scenes_dir = ex.scenes_dir;
    re.replay_path = ex.record_path;
    re.out_dir = (dir / "b").string();
    cli::run_extract(re);
    for (const auto& f : cli::json_files(dir / "a"))
        if (f.filename() != "run.json") {
            EXPECT_EQ(slurp(f), slurp(dir / "b" / f.filename())) << f;
        }
    EXPECT_EQ(slurp(dir / "a" / "vqa_transcript.jsonl"), slurp(dir / "b" / "vqa_transcript.jsonl"));
}

TEST(Cli, RenderViews) {
    const auto dir = scratch_dir("cli_render");
    cli::run_synth({"", 0, 1, dir.string()});
    const auto scene = cli::json_files(dir / "scenes").front().string();
    const std::pair<const char*, std::pair<int, int>> views[] = {
        {"bev", {512, 512}}, {"pv", {800, 450}}, {"mosaic", {512 + 910, 512}}};
    for (const auto& [view, size] : views) {
        const auto out = dir / (std::string(view) + ".png");
        cli::run_render({scene, 1, 2, view, true, out.string()});
        const Image img = decode_png(slurp(out));
        EXPECT_EQ(img.width(), size.first) << view;
        EXPECT_EQ(img.height(), size.second) << view;
    }
    EXPECT_THROW(cli::run_render({scene, 1, std::nullopt, "side", false, (dir / "x.png").string()}), Error);
}

TEST(Cli, VqaBench) {
    for (auto kind : {vqa::VqaKind::Adjacency, vqa::VqaKind::IsInIntersection, vqa::VqaKind::LeftOrRight, vqa::VqaKind::Vector}) {
        const auto exact = cli::run_vqa_bench({kind, 40, 0.0, 1});
        EXPECT_EQ(exact.items, 40u);
        EXPECT_EQ(exact.positives, 20u) << vqa::to_string(kind);
        EXPECT_DOUBLE_EQ(exact.accuracy, 1.0) << vqa::to_string(kind);
        EXPECT_EQ(exact.parse_failures, 0u);
        EXPECT_DOUBLE_EQ(cli::run_vqa_bench({kind, 40, 1.0, 1}).accuracy, 0.0) << vqa::to_string(kind);
    }
}
