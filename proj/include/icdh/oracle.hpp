#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "icdh/color.hpp"
#include "icdh/features.hpp"

namespace icdh {

/// Rule table of the synthetic consultant. Family ids refer to a palette;
/// `for_palette` resolves them by family name.
///
///   1. Mean furniture hue: circular mean over present furniture slots, or
///      `default_hue` when no furniture is present (or the hues cancel).
///   2. Candidate hue = mean + `complement_offset`.
///   3. Candidate family = member of `hue_families` whose representative hue
///      is circularly nearest the candidate hue.
///   4. room_tone == dark: replace by `dark_warm` if the candidate family is
///      warm (representative hue within `warm_half_width` of `warm_center`),
///      else by `dark_cool`.
///      Otherwise, room_mood == cool: a candidate outside `cool_families` is
///      replaced by the nearest-hue member of `cool_families`.
///   5. Non-empty color preferences: the preferred family whose representative
///      hue is circularly nearest the candidate family's hue.
///
/// Hue ties in steps 3-5 resolve to the lowest family id.
struct HarmonyRules {
    double default_hue = 30.0;
    double complement_offset = 180.0;
    std::vector<int> hue_families;
    int dark_warm = 0;
    int dark_cool = 0;
    double warm_center = 30.0;
    double warm_half_width = 90.0;
    std::vector<int> cool_families;

    static HarmonyRules for_palette(const Palette& p)
    {
        auto id = [&](const char* name) {
            const int i = p.find(name);
            if (i < 0) throw ValidationError(std::string("harmony rules need a '") + name + "' family");
            return i;
        };
        HarmonyRules r;
        r.hue_families = {id("yellow"), id("orange"), id("red"), id("pink"), id("green"), id("blue"), id("purple")};
        r.dark_warm = id("beige");
        r.dark_cool = id("white");
        r.cool_families = {id("green"), id("blue"), id("purple")};
        return r;
    }
};

inline const HarmonyRules& default_rules()
{
    static const HarmonyRules rules = HarmonyRules::for_palette(default_palette());
    return rules;
}

inline double representative_hue(const Palette& p, int id) noexcept
{
    return rgb_to_hsl(p[id].representative).h;
}

/// Member of `ids` with representative hue circularly nearest `hue`.
inline int nearest_by_hue(double hue, const std::vector<int>& ids, const Palette& p)
{
    int best = -1;
    double best_d = 0.0;
    for (int id : ids) {
        const double d = hue_distance(hue, representative_hue(p, id));
        if (best < 0 || d < best_d || (d == best_d && id < best)) {
            best = id;
            best_d = d;
        }
    }
    return best;
}

/// Circular mean of the hues of present furniture slots; nullopt when none are
/// present or the resultant vanishes.
inline std::optional<double> mean_furniture_hue(const DecodedFeatures& d)
{
    double sx = 0.0, sy = 0.0;
    int n = 0;
    for (const auto& slot : d.slots) {
        if (!slot) continue;
        const double h = rgb_to_hsl((*slot)[0], (*slot)[1], (*slot)[2]).h * std::numbers::pi / 180.0;
        sx += std::cos(h);
        sy += std::sin(h);
        ++n;
    }
    if (n == 0 || std::hypot(sx, sy) < 1e-9 * n) return std::nullopt;
    double deg = std::atan2(sy, sx) * 180.0 / std::numbers::pi;
    if (deg < 0.0) deg += 360.0;
    return deg;
}

/// The consultant stand-in, evaluated on an encoded feature vector so that a
/// stored dataset row can be re-labelled without the original inputs.
inline int oracle_label(const FeatureVector& fv, const Palette& palette = default_palette(),
                        const HarmonyRules& rules = default_rules())
{
    const auto d = decode(fv);
    const double base = mean_furniture_hue(d).value_or(rules.default_hue);
    const double candidate_hue = std::fmod(base + rules.complement_offset, 360.0);
    int family = nearest_by_hue(candidate_hue, rules.hue_families, palette);

    if (d.attrs.room_tone == RoomTone::dark) {
        const bool warm = hue_distance(representative_hue(palette, family), rules.warm_center) < rules.warm_half_width;
        family = warm ? rules.dark_warm : rules.dark_cool;
    } else if (d.attrs.room_mood == RoomMood::cool) {
        const bool already_cool =
            std::find(rules.cool_families.begin(), rules.cool_families.end(), family) != rules.cool_families.end();
        if (!already_cool) {
            family = nearest_by_hue(representative_hue(palette, family), rules.cool_families, palette);
        }
    }

    if (!d.prefs.color_preferences.empty()) {
        family = nearest_by_hue(representative_hue(palette, family), d.prefs.color_preferences, palette);
    }
    return family;
}

inline int oracle_label(const RoomAttributes& attrs, const UserPreferences& prefs,
                        const std::vector<FurnitureFeature>& furniture,
                        const Palette& palette = default_palette(), const HarmonyRules& rules = default_rules())
{
    return oracle_label(encode(attrs, prefs, furniture), palette, rules);
}

} // namespace icdh
