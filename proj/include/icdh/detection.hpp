#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "icdh/error.hpp"

namespace icdh {

/// Indoor-furniture classes in their fixed ordinal order. The ordinal is the
/// furniture slot index of the feature encoding.
enum class FurnitureClass : int {
    desk = 0,
    table,
    bed,
    couch,
    chair,
    furniture_other,
    cupboard,
    cabinet,
    shelf,
};

inline constexpr int kFurnitureClassCount = 9;

inline constexpr std::array<std::string_view, kFurnitureClassCount> kFurnitureClassNames = {
    "desk", "table", "bed", "couch", "chair", "furniture_other", "cupboard", "cabinet", "shelf",
};

inline std::string_view to_string(FurnitureClass c) noexcept
{
    return kFurnitureClassNames[static_cast<int>(c)];
}

/// Maps detector labels (canonical names plus COCO-style aliases) to a class.
/// Matching is case-insensitive; unknown labels yield nullopt.
inline std::optional<FurnitureClass> furniture_class_from_label(std::string_view label)
{
    std::string key(label);
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    struct Alias {
        std::string_view label;
        FurnitureClass cls;
    };
    static constexpr Alias aliases[] = {
        {"desk", FurnitureClass::desk},
        {"table", FurnitureClass::table},
        {"dining table", FurnitureClass::table},
        {"dining_table", FurnitureClass::table},
        {"bed", FurnitureClass::bed},
        {"couch", FurnitureClass::couch},
        {"sofa", FurnitureClass::couch},
        {"chair", FurnitureClass::chair},
        {"furniture_other", FurnitureClass::furniture_other},
        {"furniture-other", FurnitureClass::furniture_other},
        {"furniture other", FurnitureClass::furniture_other},
        {"cupboard", FurnitureClass::cupboard},
        {"cabinet", FurnitureClass::cabinet},
        {"shelf", FurnitureClass::shelf},
    };
    for (const auto& a : aliases) {
        if (a.label == key) return a.cls;
    }
    return std::nullopt;
}

struct BoundingBox {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    bool contains(int px, int py) const noexcept
    {
        return px >= x && px < x + w && py >= y && py < y + h;
    }
    long area() const noexcept { return static_cast<long>(w) * h; }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Detection {
    FurnitureClass cls = FurnitureClass::furniture_other;
    BoundingBox box;
    double confidence = 0.0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

struct DetectionSet {
    int image_width = 0;
    int image_height = 0;
    std::vector<Detection> detections;

    friend bool operator==(const DetectionSet&, const DetectionSet&) = default;
};

inline constexpr double kDefaultMinConfidence = 0.5;

/// Clamps a box to the image; throws ValidationError if nothing is left.
inline BoundingBox clamp_box(BoundingBox b, int width, int height)
{
    if (b.w <= 0 || b.h <= 0) {
        throw ValidationError("bounding box must have positive extent");
    }
    const long x0 = std::max<long>(0, b.x);
    const long y0 = std::max<long>(0, b.y);
    const long x1 = std::min<long>(width, static_cast<long>(b.x) + b.w);
    const long y1 = std::min<long>(height, static_cast<long>(b.y) + b.h);
    if (x1 <= x0 || y1 <= y0) {
        throw ValidationError("bounding box has zero area after clamping to image");
    }
    return {static_cast<int>(x0), static_cast<int>(y0), static_cast<int>(x1 - x0),
            static_cast<int>(y1 - y0)};
}

/// Validates a detections document and builds a set for an image of the given
/// size. Either the whole document is accepted or a typed error is thrown.
inline DetectionSet parse_detections(const nlohmann::json& doc, int image_width, int image_height)
{
    if (image_width <= 0 || image_height <= 0) {
        throw DomainError("image dimensions must be positive");
    }
    if (!doc.is_object()) {
        throw ParseError("detections document must be an object");
    }
    DetectionSet out{image_width, image_height, {}};

    std::string where = "image";
    try {
        if (doc.contains("image")) {
            const auto& im = doc.at("image");
            const int w = im.at("width").get<int>();
            const int h = im.at("height").get<int>();
            if (w != image_width || h != image_height) {
                throw ValidationError("detections document is for a " + std::to_string(w) + "x" +
                                      std::to_string(h) + " image, expected " +
                                      std::to_string(image_width) + "x" +
                                      std::to_string(image_height));
            }
        }
        where = "detections";
        const auto& list = doc.at("detections");
        if (!list.is_array()) {
            throw ParseError("'detections' must be an array");
        }
        for (std::size_t i = 0; i < list.size(); ++i) {
            where = "detections[" + std::to_string(i) + "]";
            const auto& e = list[i];
            const auto label = e.at("class").get<std::string>();
            const auto cls = furniture_class_from_label(label);
            if (!cls) {
                throw ValidationError(where + ": unknown furniture class '" + label + "'");
            }
            const double conf = e.at("confidence").get<double>();
            if (!(conf >= 0.0 && conf <= 1.0)) {
                throw ValidationError(where + ": confidence " + std::to_string(conf) +
                                      " outside [0,1]");
            }
            const auto& b = e.at("box");
            BoundingBox box{b.at("x").get<int>(), b.at("y").get<int>(), b.at("w").get<int>(),
                            b.at("h").get<int>()};
            try {
                box = clamp_box(box, image_width, image_height);
            } catch (const ValidationError& ex) {
                throw ValidationError(where + ": " + ex.what());
            }
            out.detections.push_back({*cls, box, conf});
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(where + ": " + ex.what());
    }
    return out;
}

inline nlohmann::json detections_to_json(const DetectionSet& set)
{
    auto list = nlohmann::json::array();
    for (const auto& d : set.detections) {
        list.push_back({{"class", std::string(to_string(d.cls))},
                        {"confidence", d.confidence},
                        {"box", {{"x", d.box.x}, {"y", d.box.y}, {"w", d.box.w}, {"h", d.box.h}}}});
    }
    return {{"image", {{"width", set.image_width}, {"height", set.image_height}}},
            {"detections", std::move(list)}};
}

inline nlohmann::json parse_json_text(std::string_view text, const std::string& origin)
{
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& ex) {
        throw ParseError(origin + ": byte " + std::to_string(ex.byte) + ": " + ex.what());
    }
}

inline nlohmann::json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open file: " + path);
    }
    std::string text((std::istreambuf_iterator<char>(in)), {});
    return parse_json_text(text, path);
}

inline DetectionSet load_detections_file(const std::string& path, int image_width, int image_height)
{
    return parse_detections(read_json_file(path), image_width, image_height);
}

inline void save_detections_file(const std::string& path, const DetectionSet& set)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write file: " + path);
    }
    out << detections_to_json(set).dump(2) << '\n';
}

/// Keeps detections with confidence >= min_confidence, preserving order.
inline DetectionSet filter_furniture(const DetectionSet& set, double min_confidence = kDefaultMinConfidence)
{
    DetectionSet out{set.image_width, set.image_height, {}};
    std::copy_if(set.detections.begin(), set.detections.end(), std::back_inserter(out.detections),
                 [&](const Detection& d) { return d.confidence >= min_confidence; });
    return out;
}

} // namespace icdh
