#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "icdh/wallviz.hpp"

namespace icdh {
namespace {

TEST(Grayscale, KnownValues)
{
    EXPECT_EQ(to_grayscale(Image(4, 4, {255, 255, 255})).data, std::vector<std::uint8_t>(16, 255));
    EXPECT_EQ(to_grayscale(Image(4, 4, {0, 0, 0})).data, std::vector<std::uint8_t>(16, 0));
    EXPECT_EQ(to_grayscale(Image(1, 1, {255, 0, 0})).data[0], 76);
    EXPECT_EQ(to_grayscale(Image(1, 1, {0, 255, 0})).data[0], 150);
    EXPECT_EQ(to_grayscale(Image(1, 1, {0, 0, 255})).data[0], 29);
}

GrayImage vertical_step(int w, int h, int c)
{
    GrayImage g{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h)};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) g.data[static_cast<std::size_t>(y) * w + x] = x <= c ? 0 : 255;
    return g;
}

TEST(Sobel, ConstantImageHasNoEdges)
{
    GrayImage g{8, 6, std::vector<std::uint8_t>(48, 137)};
    for (double t : {1e-9, 0.5, 100.0}) EXPECT_EQ(sobel_edges(g, t).count(), 0u);
}

TEST(Sobel, VerticalStepMarksTheTwoAdjacentColumns)
{
    const int c = 4;
    const auto g = vertical_step(10, 7, c);
    for (double t : {0.5, 100.0, 1019.0}) {
        const auto e = sobel_edges(g, t);
        for (int y = 0; y < 7; ++y)
            for (int x = 0; x < 10; ++x) ASSERT_EQ(e.at(x, y), x == c || x == c + 1) << x << "," << y << " t=" << t;
    }
    EXPECT_EQ(sobel_edges(g, 1020.0).count(), 0u);
}

TEST(Sobel, HugeThresholdHasNoEdges)
{
    std::mt19937 rng(1);
    GrayImage g{16, 16, std::vector<std::uint8_t>(256)};
    for (auto& v : g.data) v = static_cast<std::uint8_t>(rng());
    EXPECT_EQ(sobel_edges(g, std::numeric_limits<double>::infinity()).count(), 0u);
    EXPECT_EQ(sobel_edges(g, 1020.0 * std::sqrt(2.0) + 1e-9).count(), 0u);
}

TEST(Sobel, TooSmallIsDomainError)
{
    GrayImage g{2, 5, std::vector<std::uint8_t>(10)};
    EXPECT_THROW(sobel_edges(g, 1.0), DomainError);
}

TEST(WallMask, FlatImageMinusDilatedBox)
{
    EdgeMap edges;
    static_cast<BitMap&>(edges) = BitMap(40, 30);
    const BoundingBox box{10, 12, 8, 6};
    SegmentationConfig cfg;
    const auto mask = wall_mask(edges, {box}, cfg);
    const auto d = dilate(box, cfg.box_margin, 40, 30);
    for (int y = 0; y < 30; ++y)
        for (int x = 0; x < 40; ++x) ASSERT_EQ(mask.at(x, y), !d.contains(x, y)) << x << "," << y;
}

TEST(WallMask, BoxOverSeedBandFails)
{
    EdgeMap edges;
    static_cast<BitMap&>(edges) = BitMap(40, 40);
    EXPECT_THROW(wall_mask(edges, {{0, 0, 40, 10}}), SegmentationFailed);
}

TEST(WallMask, HorizontalLineStopsTheFill)
{
    Image img(32, 32, {200, 200, 200});
    for (int x = 0; x < 32; ++x) img.set(x, 16, {0, 0, 0});
    const auto edges = sobel_edges(to_grayscale(img), 100.0);
    const auto mask = wall_mask(edges, {});
    // Rows 15 and 17 are edges; everything above row 15 is wall.
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            const bool expect = y < 16 && !edges.at(x, y);
            ASSERT_EQ(mask.at(x, y), expect) << x << "," << y;
        }
    }
    EXPECT_GT(mask.count(), 0u);
}

TEST(WallMask, DisjointFromBoxesOnRandomInputs)
{
    std::mt19937 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const int w = 20 + trial % 30, h = 20 + trial % 17;
        Image img(w, h, {210, 205, 200});
        std::vector<BoundingBox> boxes;
        for (int i = 0; i < 3; ++i) {
            const int bx = std::uniform_int_distribution<int>(0, w - 4)(rng);
            const int by = std::uniform_int_distribution<int>(h / 2, h - 4)(rng);
            boxes.push_back({bx, by, 3 + bx % 5, 3});
        }
        const auto mask = segment_wall(img, boxes);
        for (const auto& b : boxes)
            for (int y = b.y; y < std::min(h, b.y + b.h); ++y)
                for (int x = b.x; x < std::min(w, b.x + b.w); ++x) ASSERT_FALSE(mask.at(x, y));
    }
}

TEST(WallMask, FixtureRoomSeparatesWallFromFurniture)
{
    const auto room = fixtures::fixture_room();
    std::vector<BoundingBox> boxes;
    for (const auto& d : filter_furniture(room.detections).detections) boxes.push_back(d.box);
    const auto mask = segment_wall(room.image, boxes);
    EXPECT_TRUE(mask.at(80, 10));
    EXPECT_TRUE(mask.at(150, 60));
    EXPECT_FALSE(mask.at(40, 80));  // couch
    EXPECT_FALSE(mask.at(80, 110)); // floor
    EXPECT_GT(mask.count(), 160u * 60u);
}

ColorFamily family(Rgb8 rep) { return {0, "target", rep}; }

TEST(Recolor, EmptyMaskIsIdentity)
{
    const auto room = fixtures::fixture_room();
    WallMask empty(room.image.width, room.image.height);
    EXPECT_EQ(recolor(room.image, empty, family({200, 30, 30})), room.image);
}

TEST(Recolor, GrayWallTakesTargetHueKeepsLightness)
{
    Image img(8, 8, {128, 128, 128});
    WallMask all(8, 8);
    std::fill(all.bits.begin(), all.bits.end(), 1);
    const Rgb8 target{0, 0, 255};
    const auto out = recolor(img, all, family(target));
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            const Rgb8 p = out.at(x, y);
            // Hexcone hue and lightness computed directly.
            const double r = p.r / 255.0, g = p.g / 255.0, b = p.b / 255.0;
            const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
            ASSERT_GT(mx - mn, 0.0);
            ASSERT_EQ(mx, b);
            const double hue = 60.0 * ((r - g) / (mx - mn) + 4.0);
            ASSERT_NEAR(hue, 240.0, 2.0);
            ASSERT_NEAR((mx + mn) / 2.0, 128.0 / 255.0, 1.0 / 255.0);
        }
    }
}

TEST(Recolor, UnmaskedPixelsAreBitIdentical)
{
    const auto room = fixtures::fixture_room();
    std::vector<BoundingBox> boxes;
    for (const auto& d : filter_furniture(room.detections).detections) boxes.push_back(d.box);
    const auto mask = segment_wall(room.image, boxes);
    const auto out = recolor(room.image, mask, default_palette()[4]);
    for (int y = 0; y < room.image.height; ++y)
        for (int x = 0; x < room.image.width; ++x)
            if (!mask.at(x, y)) {
                ASSERT_EQ(out.at(x, y), room.image.at(x, y));
            }
}

TEST(Recolor, IdempotentWithinOnePerChannel)
{
    std::mt19937 rng(5);
    Image img(30, 30);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng());
    WallMask mask(30, 30);
    for (auto& b : mask.bits) b = static_cast<std::uint8_t>(rng() % 2);
    for (const auto& fam : default_palette().families()) {
        const auto once = recolor(img, mask, fam);
        const auto twice = recolor(once, mask, fam);
        for (std::size_t i = 0; i < once.data.size(); ++i) {
            ASSERT_LE(std::abs(int{once.data[i]} - int{twice.data[i]}), 1) << fam.name;
        }
    }
}

TEST(Recolor, MaskShapeMismatchIsDomainError)
{
    EXPECT_THROW(recolor(Image(4, 4), WallMask(3, 4), family({1, 2, 3})), DomainError);
}

TEST(Png, EncodeDecodeIsLossless)
{
    const auto room = fixtures::fixture_room();
    EXPECT_EQ(decode_image(encode_png(room.image)), room.image);
}

} // namespace
} // namespace icdh
