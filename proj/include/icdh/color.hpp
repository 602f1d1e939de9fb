#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "icdh/error.hpp"

namespace icdh {

inline constexpr std::uint32_t kMaxDecimalColor = 0xFFFFFFu;

struct Rgb8 {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    /// Builds a color from wide integers, rejecting anything outside [0, 255].
    static Rgb8 checked(long r, long g, long b)
    {
        auto ok = [](long v) { return v >= 0 && v <= 255; };
        if (!ok(r) || !ok(g) || !ok(b)) {
            throw RangeError("rgb channel out of [0,255]: (" + std::to_string(r) + "," +
                             std::to_string(g) + "," + std::to_string(b) + ")");
        }
        return {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
                static_cast<std::uint8_t>(b)};
    }

    friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

/// h in degrees [0, 360); s and l are fractions in [0, 1].
struct Hsl {
    double h = 0.0;
    double s = 0.0;
    double l = 0.0;
};

// 24-bit packing with red most significant, the usual 0xRRGGBB convention.
constexpr std::uint32_t rgb_to_decimal(Rgb8 c) noexcept
{
    return (std::uint32_t{c.r} << 16) | (std::uint32_t{c.g} << 8) | std::uint32_t{c.b};
}

inline Rgb8 decimal_to_rgb(std::int64_t d)
{
    if (d < 0 || d > kMaxDecimalColor) {
        throw RangeError("decimal color out of [0,16777215]: " + std::to_string(d));
    }
    auto v = static_cast<std::uint32_t>(d);
    return {static_cast<std::uint8_t>((v >> 16) & 0xFF), static_cast<std::uint8_t>((v >> 8) & 0xFF),
            static_cast<std::uint8_t>(v & 0xFF)};
}

/// HSL from real-valued channels on the 0..255 scale. Achromatic inputs get h = 0.
inline Hsl rgb_to_hsl(double r, double g, double b) noexcept
{
    r /= 255.0;
    g /= 255.0;
    b /= 255.0;
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double d = mx - mn;
    Hsl out;
    out.l = (mx + mn) / 2.0;
    if (d <= 0.0) {
        return out;
    }
    out.s = d / (1.0 - std::abs(2.0 * out.l - 1.0));
    out.s = std::clamp(out.s, 0.0, 1.0);
    double h;
    if (mx == r) {
        h = 60.0 * std::fmod((g - b) / d, 6.0);
    } else if (mx == g) {
        h = 60.0 * ((b - r) / d + 2.0);
    } else {
        h = 60.0 * ((r - g) / d + 4.0);
    }
    if (h < 0.0) h += 360.0;
    if (h >= 360.0) h -= 360.0;
    out.h = h;
    return out;
}

inline Hsl rgb_to_hsl(Rgb8 c) noexcept { return rgb_to_hsl(c.r, c.g, c.b); }

inline Rgb8 hsl_to_rgb(const Hsl& hsl) noexcept
{
    const double s = std::clamp(hsl.s, 0.0, 1.0);
    const double l = std::clamp(hsl.l, 0.0, 1.0);
    double h = std::fmod(hsl.h, 360.0);
    if (h < 0.0) h += 360.0;

    const double c = (1.0 - std::abs(2.0 * l - 1.0)) * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(hp)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
    }
    const double m = l - c / 2.0;
    auto q = [m](double v) {
        return static_cast<std::uint8_t>(std::clamp(std::lround((v + m) * 255.0), 0L, 255L));
    };
    return {q(r), q(g), q(b)};
}

/// Shortest angular distance between two hues, in degrees [0, 180].
inline double hue_distance(double a, double b) noexcept
{
    double d = std::fmod(std::abs(a - b), 360.0);
    return d > 180.0 ? 360.0 - d : d;
}

inline int squared_distance(Rgb8 a, Rgb8 b) noexcept
{
    const int dr = int{a.r} - int{b.r};
    const int dg = int{a.g} - int{b.g};
    const int db = int{a.b} - int{b.b};
    return dr * dr + dg * dg + db * db;
}

struct ColorFamily {
    int id = 0;
    std::string name;
    Rgb8 representative;

    friend bool operator==(const ColorFamily&, const ColorFamily&) = default;
};

inline constexpr int kFamilyCount = 10;

/// The target label space: exactly ten families, ids 0..9 in order.
class Palette {
public:
    explicit Palette(std::vector<ColorFamily> families) : families_(std::move(families))
    {
        if (families_.size() != kFamilyCount) {
            throw ValidationError("palette must have exactly 10 families, got " +
                                  std::to_string(families_.size()));
        }
        std::sort(families_.begin(), families_.end(),
                  [](const ColorFamily& a, const ColorFamily& b) { return a.id < b.id; });
        std::set<std::string> names;
        for (int i = 0; i < kFamilyCount; ++i) {
            if (families_[i].id != i) {
                throw ValidationError("palette ids must be unique and contiguous 0..9");
            }
            if (!names.insert(families_[i].name).second) {
                throw ValidationError("duplicate palette family name: " + families_[i].name);
            }
        }
    }

    const std::vector<ColorFamily>& families() const noexcept { return families_; }
    const ColorFamily& at(int id) const
    {
        if (id < 0 || id >= kFamilyCount) {
            throw RangeError("family id out of range: " + std::to_string(id));
        }
        return families_[id];
    }
    const ColorFamily& operator[](int id) const noexcept { return families_[id]; }

    /// Id of the family with the given name, or -1.
    int find(std::string_view name) const noexcept
    {
        for (const auto& f : families_) {
            if (f.name == name) return f.id;
        }
        return -1;
    }

    friend bool operator==(const Palette&, const Palette&) = default;

private:
    std::vector<ColorFamily> families_;
};

inline const Palette& default_palette()
{
    static const Palette palette({
        {0, "white", {245, 245, 240}},
        {1, "gray", {128, 128, 128}},
        {2, "beige", {222, 202, 166}},
        {3, "yellow", {240, 214, 90}},
        {4, "orange", {230, 140, 60}},
        {5, "red", {190, 60, 55}},
        {6, "pink", {230, 160, 180}},
        {7, "green", {110, 160, 110}},
        {8, "blue", {90, 130, 190}},
        {9, "purple", {140, 110, 170}},
    });
    return palette;
}

/// Family whose representative is nearest in squared RGB distance; ties go to
/// the lowest id.
inline const ColorFamily& nearest_family(Rgb8 c, const Palette& p) noexcept
{
    const ColorFamily* best = &p[0];
    int best_d = squared_distance(c, best->representative);
    for (int i = 1; i < kFamilyCount; ++i) {
        const int d = squared_distance(c, p[i].representative);
        if (d < best_d) {
            best_d = d;
            best = &p[i];
        }
    }
    return *best;
}

inline nlohmann::json palette_to_json(const Palette& p)
{
    auto arr = nlohmann::json::array();
    for (const auto& f : p.families()) {
        const auto& c = f.representative;
        arr.push_back({{"id", f.id}, {"name", f.name}, {"representative", {c.r, c.g, c.b}}});
    }
    return arr;
}

inline Palette palette_from_json(const nlohmann::json& doc)
{
    if (!doc.is_array()) {
        throw ParseError("palette document must be an array");
    }
    std::vector<ColorFamily> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& e = doc[i];
        try {
            const auto& rep = e.at("representative");
            if (!rep.is_array() || rep.size() != 3) {
                throw ParseError("representative must be [r,g,b]");
            }
            out.push_back({e.at("id").get<int>(), e.at("name").get<std::string>(),
                           Rgb8::checked(rep[0].get<long>(), rep[1].get<long>(), rep[2].get<long>())});
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError("palette entry " + std::to_string(i) + ": " + ex.what());
        }
    }
    return Palette(std::move(out));
}

inline Palette load_palette(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open palette file: " + path);
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& ex) {
        throw ParseError(path + ": " + ex.what());
    }
    return palette_from_json(doc);
}

} // namespace icdh
