#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "icdh/color.hpp"
#include "icdh/detection.hpp"
#include "icdh/error.hpp"

namespace icdh {

enum class RoomType : int { living_room = 0, bedroom, kitchen };
enum class RoomSize : int { small = 0, medium, big };
enum class RoomStyle : int { modern = 0, classic, elegant, traditional };
enum class RoomMood : int { warm = 0, cool, active, casual, playful };
enum class RoomTone : int { dark = 0, light, vibrant };
enum class PaintPreference : int { plain_shades = 0, texture, wallpaper };

/// Closed vocabulary of one categorical attribute: its labels in ordinal order.
template <class Enum>
struct Vocabulary;

template <>
struct Vocabulary<RoomType> {
    static constexpr std::string_view key = "room_type";
    static constexpr std::array<std::string_view, 3> labels = {"living_room", "bedroom", "kitchen"};
};
template <>
struct Vocabulary<RoomSize> {
    static constexpr std::string_view key = "room_size";
    static constexpr std::array<std::string_view, 3> labels = {"small", "medium", "big"};
};
template <>
struct Vocabulary<RoomStyle> {
    static constexpr std::string_view key = "room_style";
    static constexpr std::array<std::string_view, 4> labels = {"modern", "classic", "elegant", "traditional"};
};
template <>
struct Vocabulary<RoomMood> {
    static constexpr std::string_view key = "room_mood";
    static constexpr std::array<std::string_view, 5> labels = {"warm", "cool", "active", "casual", "playful"};
};
template <>
struct Vocabulary<RoomTone> {
    static constexpr std::string_view key = "room_tone";
    static constexpr std::array<std::string_view, 3> labels = {"dark", "light", "vibrant"};
};
template <>
struct Vocabulary<PaintPreference> {
    static constexpr std::string_view key = "paint_preference";
    static constexpr std::array<std::string_view, 3> labels = {"plain_shades", "texture", "wallpaper"};
};

template <class Enum>
inline constexpr int vocabulary_size = static_cast<int>(Vocabulary<Enum>::labels.size());

template <class Enum>
std::string_view to_string(Enum e) noexcept
{
    return Vocabulary<Enum>::labels[static_cast<int>(e)];
}

template <class Enum>
Enum parse_label(std::string_view label)
{
    const auto& labels = Vocabulary<Enum>::labels;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) return static_cast<Enum>(i);
    }
    throw ValidationError(std::string(Vocabulary<Enum>::key) + ": unknown value '" + std::string(label) + "'");
}

struct RoomAttributes {
    RoomType room_type = RoomType::living_room;
    RoomSize room_size = RoomSize::small;
    RoomStyle room_style = RoomStyle::modern;
    RoomMood room_mood = RoomMood::warm;
    RoomTone room_tone = RoomTone::dark;

    friend bool operator==(const RoomAttributes&, const RoomAttributes&) = default;
};

struct UserPreferences {
    std::vector<int> color_preferences; // family ids, unique
    PaintPreference paint_preference = PaintPreference::plain_shades;

    void validate() const
    {
        std::set<int> seen;
        for (int id : color_preferences) {
            if (id < 0 || id >= kFamilyCount) {
                throw ValidationError("color preference id out of range: " + std::to_string(id));
            }
            if (!seen.insert(id).second) {
                throw ValidationError("duplicate color preference id: " + std::to_string(id));
            }
        }
    }

    friend bool operator==(const UserPreferences&, const UserPreferences&) = default;
};

struct FurnitureFeature {
    FurnitureClass cls = FurnitureClass::furniture_other;
    Rgb8 color;
};

// Block layout of the encoded vector.
namespace layout {
inline constexpr int room_type = 0;
inline constexpr int room_size = room_type + 3;
inline constexpr int room_style = room_size + 3;
inline constexpr int room_mood = room_style + 4;
inline constexpr int room_tone = room_mood + 5;
inline constexpr int color_prefs = room_tone + 3;
inline constexpr int paint_pref = color_prefs + kFamilyCount;
inline constexpr int furniture = paint_pref + 3;
inline constexpr int slot_width = 4; // presence, r, g, b
inline constexpr int size = furniture + kFurnitureClassCount * slot_width;
} // namespace layout

static_assert(layout::size == 67);

inline constexpr int kFeatureSchemaVersion = 1;

/// Encoded vector fed to the network. Values are in [0, 1] and lie on a
/// 1e-6 grid so that the 6-decimal dataset text format round-trips exactly.
struct FeatureVector {
    std::array<double, layout::size> values{};

    double operator[](std::size_t i) const noexcept { return values[i]; }
    double& operator[](std::size_t i) noexcept { return values[i]; }
    static constexpr std::size_t size() noexcept { return layout::size; }
    const double* data() const noexcept { return values.data(); }

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

inline double quantize6(double v) noexcept { return std::round(v * 1e6) / 1e6; }

inline FeatureVector encode(const RoomAttributes& attrs, const UserPreferences& prefs,
                            const std::vector<FurnitureFeature>& furniture)
{
    prefs.validate();
    FeatureVector fv;
    fv[layout::room_type + static_cast<int>(attrs.room_type)] = 1.0;
    fv[layout::room_size + static_cast<int>(attrs.room_size)] = 1.0;
    fv[layout::room_style + static_cast<int>(attrs.room_style)] = 1.0;
    fv[layout::room_mood + static_cast<int>(attrs.room_mood)] = 1.0;
    fv[layout::room_tone + static_cast<int>(attrs.room_tone)] = 1.0;
    for (int id : prefs.color_preferences) fv[layout::color_prefs + id] = 1.0;
    fv[layout::paint_pref + static_cast<int>(prefs.paint_preference)] = 1.0;

    std::array<std::array<double, 3>, kFurnitureClassCount> sums{};
    std::array<int, kFurnitureClassCount> counts{};
    for (const auto& f : furniture) {
        const int slot = static_cast<int>(f.cls);
        sums[slot][0] += f.color.r;
        sums[slot][1] += f.color.g;
        sums[slot][2] += f.color.b;
        ++counts[slot];
    }
    for (int s = 0; s < kFurnitureClassCount; ++s) {
        if (counts[s] == 0) continue;
        const int base = layout::furniture + s * layout::slot_width;
        fv[base] = 1.0;
        for (int ch = 0; ch < 3; ++ch) {
            fv[base + 1 + ch] = quantize6(sums[s][ch] / counts[s] / 255.0);
        }
    }
    return fv;
}

/// A feature vector read back into structured form.
struct DecodedFeatures {
    RoomAttributes attrs;
    UserPreferences prefs;
    // Per-slot mean color on the 0..255 scale; nullopt when the slot is absent.
    std::array<std::optional<std::array<double, 3>>, kFurnitureClassCount> slots;
};

namespace detail {
inline int hot_index(const FeatureVector& fv, int offset, int width)
{
    int idx = -1;
    for (int i = 0; i < width; ++i) {
        if (fv[offset + i] == 1.0) {
            if (idx >= 0) throw ValidationError("one-hot block has more than one set entry");
            idx = i;
        } else if (fv[offset + i] != 0.0) {
            throw ValidationError("one-hot block entry is neither 0 nor 1");
        }
    }
    if (idx < 0) throw ValidationError("one-hot block has no set entry");
    return idx;
}
} // namespace detail

/// Checks block sums, value ranges and zeroed absent slots.
inline void validate_features(const FeatureVector& fv)
{
    for (double v : fv.values) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("feature value outside [0,1]");
    }
    detail::hot_index(fv, layout::room_type, 3);
    detail::hot_index(fv, layout::room_size, 3);
    detail::hot_index(fv, layout::room_style, 4);
    detail::hot_index(fv, layout::room_mood, 5);
    detail::hot_index(fv, layout::room_tone, 3);
    detail::hot_index(fv, layout::paint_pref, 3);
    for (int i = 0; i < kFamilyCount; ++i) {
        const double v = fv[layout::color_prefs + i];
        if (v != 0.0 && v != 1.0) throw ValidationError("color preference entry is neither 0 nor 1");
    }
    for (int s = 0; s < kFurnitureClassCount; ++s) {
        const int base = layout::furniture + s * layout::slot_width;
        if (fv[base] != 0.0 && fv[base] != 1.0) throw ValidationError("presence flag is neither 0 nor 1");
        if (fv[base] == 0.0 && (fv[base + 1] != 0.0 || fv[base + 2] != 0.0 || fv[base + 3] != 0.0)) {
            throw ValidationError("absent furniture slot carries a color");
        }
    }
}

inline DecodedFeatures decode(const FeatureVector& fv)
{
    validate_features(fv);
    DecodedFeatures out;
    out.attrs.room_type = static_cast<RoomType>(detail::hot_index(fv, layout::room_type, 3));
    out.attrs.room_size = static_cast<RoomSize>(detail::hot_index(fv, layout::room_size, 3));
    out.attrs.room_style = static_cast<RoomStyle>(detail::hot_index(fv, layout::room_style, 4));
    out.attrs.room_mood = static_cast<RoomMood>(detail::hot_index(fv, layout::room_mood, 5));
    out.attrs.room_tone = static_cast<RoomTone>(detail::hot_index(fv, layout::room_tone, 3));
    for (int i = 0; i < kFamilyCount; ++i) {
        if (fv[layout::color_prefs + i] == 1.0) out.prefs.color_preferences.push_back(i);
    }
    out.prefs.paint_preference = static_cast<PaintPreference>(detail::hot_index(fv, layout::paint_pref, 3));
    for (int s = 0; s < kFurnitureClassCount; ++s) {
        const int base = layout::furniture + s * layout::slot_width;
        if (fv[base] == 1.0) {
            out.slots[s] = std::array<double, 3>{fv[base + 1] * 255.0, fv[base + 2] * 255.0, fv[base + 3] * 255.0};
        }
    }
    return out;
}

// Attribute document:
// { "room_type": ..., "room_size": ..., "room_style": ..., "room_mood": ...,
//   "room_tone": ..., "color_preferences": [ids], "paint_preference": ... }

inline void parse_attributes(const nlohmann::json& doc, RoomAttributes& attrs, UserPreferences& prefs)
{
    if (!doc.is_object()) throw ParseError("attribute document must be an object");
    auto field = [&](std::string_view key) -> std::string {
        const std::string k(key);
        if (!doc.contains(k) || !doc[k].is_string()) {
            throw ParseError("attribute document: missing string field '" + k + "'");
        }
        return doc[k].get<std::string>();
    };
    attrs.room_type = parse_label<RoomType>(field(Vocabulary<RoomType>::key));
    attrs.room_size = parse_label<RoomSize>(field(Vocabulary<RoomSize>::key));
    attrs.room_style = parse_label<RoomStyle>(field(Vocabulary<RoomStyle>::key));
    attrs.room_mood = parse_label<RoomMood>(field(Vocabulary<RoomMood>::key));
    attrs.room_tone = parse_label<RoomTone>(field(Vocabulary<RoomTone>::key));
    prefs.paint_preference = parse_label<PaintPreference>(field(Vocabulary<PaintPreference>::key));
    prefs.color_preferences.clear();
    if (doc.contains("color_preferences")) {
        const auto& cp = doc["color_preferences"];
        if (!cp.is_array()) throw ParseError("attribute document: 'color_preferences' must be an array");
        for (const auto& v : cp) {
            if (!v.is_number_integer()) throw ParseError("attribute document: color preference ids must be integers");
            prefs.color_preferences.push_back(v.get<int>());
        }
    }
    prefs.validate();
}

inline nlohmann::json attributes_to_json(const RoomAttributes& attrs, const UserPreferences& prefs)
{
    return {
        {"room_type", to_string(attrs.room_type)},
        {"room_size", to_string(attrs.room_size)},
        {"room_style", to_string(attrs.room_style)},
        {"room_mood", to_string(attrs.room_mood)},
        {"room_tone", to_string(attrs.room_tone)},
        {"color_preferences", prefs.color_preferences},
        {"paint_preference", to_string(prefs.paint_preference)},
    };
}

} // namespace icdh
