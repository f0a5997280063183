#include <gtest/gtest.h>

#include "support.hpp"

using namespace chameleon;
using namespace chameleon::render;
using chameleon::testing::line_lane;
using chameleon::testing::make_scene;

namespace {

bool same(Rgb a, Rgb b) { return a.r == b.r && a.g == b.g && a.b == b.b; }

std::size_t count_color(const Image& img, Rgb c) {
    std::size_t n = 0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) n += same(img.at(x, y), c);
    return n;
}

}  // namespace

TEST(RenderBev, EmptySceneIsWhite) {
    const Image img = render_bev(make_scene({}), {});
    EXPECT_EQ(img.width(), 512);
    EXPECT_EQ(img.height(), 512);
    EXPECT_EQ(img.pixels().size(), 512u * 512u * 3u);
    EXPECT_EQ(count_color(img, kWhite), 512u * 512u);
}

TEST(RenderBev, GreenStripMatchesPixelMapping) {
    const Scene s = make_scene({line_lane(1, -40, 0, 40, 0)});
    HighlightSpec spec;
    spec.green_lane_id = 1;
    const Image img = render_bev(s, spec);
    EXPECT_TRUE(same(img.at(256, 256), kGreen));
    // 512 px over 100 m: x=+40 maps to row 51.2, x=-40 to row 460.8, y=0 to column 256.
    const double px_per_m = 512.0 / 100.0;
    const double row0 = (50 - 40) * px_per_m, row1 = (50 + 40) * px_per_m, col = 50 * px_per_m;
    for (int y = 0; y < 512; ++y) {
        for (int x = 0; x < 512; ++x) {
            const double cx = x + 0.5, cy = y + 0.5;
            const double ny = std::clamp(cy, row0, row1);
            const bool in_strip = std::hypot(cx - col, cy - ny) <= 4.0;
            ASSERT_TRUE(same(img.at(x, y), in_strip ? kGreen : kWhite)) << x << "," << y;
        }
    }
    EXPECT_TRUE(same(img.at(252, 256), kGreen));
    EXPECT_TRUE(same(img.at(259, 256), kGreen));
    EXPECT_TRUE(same(img.at(251, 256), kWhite));
    EXPECT_TRUE(same(img.at(260, 256), kWhite));
}

TEST(RenderBev, BoundariesBlueAndArrows) {
    const Scene s = make_scene({line_lane(1, -20, 0, 20, 0), line_lane(2, -20, 10, 20, 10), line_lane(3, -20, -10, 20, -10)});
    HighlightSpec spec;
    spec.green_lane_id = 1;
    spec.blue_lane_id = 2;
    const Image plain = render_bev(s, spec);
    EXPECT_GT(count_color(plain, kBlack), 0u);
    EXPECT_GT(count_color(plain, kBlue), 0u);
    EXPECT_EQ(count_color(plain, kGreenArrow), 0u);
    spec.draw_arrows = true;
    const Image arrows = render_bev(s, spec);
    EXPECT_GT(count_color(arrows, kGreenArrow), 0u);
    EXPECT_GT(count_color(arrows, kBlueArrow), 0u);
    spec.draw_arrows = false;
    spec.draw_all_boundaries = false;
    EXPECT_EQ(count_color(render_bev(s, spec), kBlack), 0u);
}

TEST(RenderBev, UnknownOrEqualHighlights) {
    const Scene s = make_scene({line_lane(1, -20, 0, 20, 0)});
    HighlightSpec spec;
    spec.green_lane_id = 9;
    EXPECT_THROW(render_bev(s, spec), UnknownIdError);
    EXPECT_THROW(render_pv(s, spec), UnknownIdError);
    spec.green_lane_id = 1;
    spec.blue_lane_id = 1;
    EXPECT_THROW(render_bev(s, spec), Error);
}

TEST(RenderBev, Deterministic) {
    const auto [s, gt] = synth::synth_scene(synth::suite_config(3), 3);
    HighlightSpec spec;
    spec.green_lane_id = s.lanes[0].id;
    spec.blue_lane_id = s.lanes[1].id;
    spec.draw_arrows = true;
    EXPECT_EQ(encode_png(render_bev(s, spec)), encode_png(render_bev(s, spec)));
}

TEST(RenderBev, EveryHighlightedLaneLeavesPixels) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-49, 49);
    for (int k = 0; k < 200; ++k) {
        const Scene s = make_scene({line_lane(1, u(rng), u(rng), u(rng), u(rng), 2), line_lane(2, u(rng), u(rng), u(rng), u(rng), 3)});
        HighlightSpec spec;
        spec.green_lane_id = 1;
        spec.blue_lane_id = 2;
        const Image img = render_bev(s, spec);
        EXPECT_GT(count_color(img, kGreen), 0u);
        EXPECT_GT(count_color(img, kBlue), 0u);
    }
}

TEST(RenderPv, LaneBehindCameraIsClipped) {
    const Scene s = make_scene({line_lane(1, -30, 0, -5, 0)});
    HighlightSpec spec;
    spec.green_lane_id = 1;
    const Image img = render_pv(s, spec);
    EXPECT_EQ(img.width(), 800);
    EXPECT_EQ(img.height(), 450);
    EXPECT_EQ(count_color(img, kWhite), 800u * 450u);
}

TEST(RenderPv, StripThroughPrincipalPoint) {
    // crosses the optical axis at 20 m depth, at camera height
    Scene s = make_scene({{1, {{21.5, 6, 1.6}, {21.5, -6, 1.6}}, 1.0}, line_lane(2, 5, 0, 60, 0)});
    HighlightSpec spec;
    spec.green_lane_id = 1;
    spec.blue_lane_id = 2;
    const Image img = render_pv(s, spec);
    const auto pp = geometry::project_pv(Polyline{{21.5, 0, 1.6}}, *s.front_camera)[0];
    ASSERT_TRUE(pp.visible);
    EXPECT_TRUE(same(img.at(static_cast<int>(pp.u), static_cast<int>(pp.v)), kGreen));
    // endpoints at y = +-6 m land on columns 250 and 550
    for (int v = 221; v <= 228; ++v) EXPECT_TRUE(same(img.at(300, v), kGreen)) << v;
    EXPECT_FALSE(same(img.at(300, 220), kGreen));
    EXPECT_FALSE(same(img.at(300, 229), kGreen));
    EXPECT_FALSE(same(img.at(240, 225), kGreen));
    EXPECT_FALSE(same(img.at(560, 225), kGreen));
    // the ground lane ahead projects onto the image column of the principal point
    const auto ground = geometry::project_pv(Polyline{{41.5, 0, 0}}, *s.front_camera)[0];
    EXPECT_TRUE(same(img.at(static_cast<int>(ground.u), static_cast<int>(ground.v)), kBlue));
}

TEST(RenderPv, PartiallyBehindIsClippedNotDropped) {
    const Scene s = make_scene({line_lane(1, -20, 0, 30, 0, 2)});
    HighlightSpec spec;
    spec.green_lane_id = 1;
    const Image img = render_pv(s, spec);
    EXPECT_GT(count_color(img, kGreen), 0u);
}

TEST(RenderPv, BackgroundAndDeterminism) {
    const Scene s = make_scene({line_lane(1, 5, 0, 40, 0)});
    const Image bg(80, 45, Rgb{10, 20, 30});
    const Image img = render_pv(s, {}, {}, &bg);
    EXPECT_TRUE(same(img.at(0, 0), Rgb{10, 20, 30}));
    EXPECT_GT(count_color(img, kBlack), 0u);
    EXPECT_EQ(render_pv(s, {}), render_pv(s, {}));
    Scene no_cam = s;
    no_cam.front_camera.reset();
    EXPECT_THROW(render_pv(no_cam, {}), Error);
}

TEST(Mosaic, WidthsAddAfterScaling) {
    const Image a(512, 512, kWhite), b(512, 512, kBlack), c(1024, 512, kGreen);
    EXPECT_EQ(mosaic(a, b).width(), 1024);
    EXPECT_EQ(mosaic(a, b).height(), 512);
    EXPECT_EQ(mosaic(a, c).width(), 1536);
    EXPECT_NE(mosaic(a, b), mosaic(b, a));
    EXPECT_TRUE(same(mosaic(a, b).at(0, 0), kWhite));
    EXPECT_TRUE(same(mosaic(a, b).at(600, 0), kBlack));
    // 800x450 scaled to height 512 is 910 wide
    const Image pv(800, 450, kBlue);
    const Image m = mosaic(a, pv);
    EXPECT_EQ(m.width(), 512 + 910);
    EXPECT_EQ(m.height(), 512);
}

TEST(Png, RoundTrip) {
    const auto [s, gt] = synth::synth_scene(synth::suite_config(1), 1);
    HighlightSpec spec;
    spec.green_lane_id = s.lanes.front().id;
    const Image img = mosaic(render_bev(s, spec), render_pv(s, spec));
    const std::string png = encode_png(img);
    EXPECT_EQ(png.substr(1, 3), "PNG");
    EXPECT_EQ(decode_png(png), img);
}
