#pragma once

#include <algorithm>

#include "icdh/detection.hpp"
#include "icdh/image.hpp"

namespace icdh::fixtures {

struct FixtureRoom {
    Image image;
    DetectionSet detections;
};

/// 160x120 room: softly shaded light wall, wooden floor below row 90, a red
/// couch and a blue table standing on the floor line.
inline FixtureRoom fixture_room()
{
    constexpr int w = 160, h = 120, floor_y = 90;
    FixtureRoom room{Image(w, h), DetectionSet{w, h, {}}};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (y >= floor_y) {
                room.image.set(x, y, {120, 85, 50});
            } else {
                const auto shade = static_cast<std::uint8_t>(225 - y / 6 - x / 20);
                room.image.set(x, y, {shade, shade, static_cast<std::uint8_t>(shade - 6)});
            }
        }
    }
    auto fill = [&](BoundingBox b, Rgb8 c) {
        for (int y = b.y; y < b.y + b.h; ++y)
            for (int x = b.x; x < b.x + b.w; ++x) room.image.set(x, y, c);
    };
    const BoundingBox couch{15, 60, 60, 40};
    const BoundingBox table{100, 70, 40, 30};
    fill(couch, {190, 40, 40});
    fill(table, {40, 70, 170});
    room.detections.detections = {{FurnitureClass::couch, couch, 0.92},
                                  {FurnitureClass::table, table, 0.81},
                                  {FurnitureClass::chair, {0, 100, 10, 10}, 0.2}};
    return room;
}

/// Same room with a wardrobe box spanning the full top band.
inline FixtureRoom blocked_room()
{
    auto room = fixture_room();
    room.detections.detections.push_back({FurnitureClass::cupboard, {0, 0, 160, 40}, 0.95});
    return room;
}

inline nlohmann::json fixture_attributes()
{
    return {{"room_type", "living_room"}, {"room_size", "medium"}, {"room_style", "modern"},
            {"room_mood", "warm"},        {"room_tone", "light"},  {"color_preferences", nlohmann::json::array()},
            {"paint_preference", "plain_shades"}};
}

} // namespace icdh::fixtures
