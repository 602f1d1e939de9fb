#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "icdh/error.hpp"
#include "icdh/features.hpp"
#include "icdh/oracle.hpp"

namespace icdh {

struct TrainingRecord {
    FeatureVector features;
    int label = 0;

    friend bool operator==(const TrainingRecord&, const TrainingRecord&) = default;
};

struct Dataset {
    std::vector<TrainingRecord> records;
    int schema_version = kFeatureSchemaVersion;

    std::size_t size() const noexcept { return records.size(); }
    bool empty() const noexcept { return records.empty(); }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline constexpr double kDefaultLabelNoise = 0.05;

/// Sampling knobs of the synthetic generator beyond (n, seed, noise).
struct SynthOptions {
    // P(number of furniture items = 0, 1, 2, 3, 4).
    std::vector<double> furniture_count_weights = {0.2, 0.2, 0.2, 0.2, 0.2};
    // P(class), in FurnitureClass order.
    std::vector<double> furniture_class_weights = {1, 1, 1, 1, 1, 1, 1, 1, 1};
    // Furniture colors: a family representative plus a common shift of all
    // channels (keeps the hue) plus independent per-channel noise.
    int lightness_jitter = 20;
    int channel_jitter = 0;
    // P(number of color preferences = 0, 1, 2).
    std::vector<double> preference_count_weights = {0.6, 0.3, 0.1};
};

/// Draws `n` records: room attributes and paint preference uniform, 0..4
/// furniture items (counts and classes per `opts`) whose colors are jittered
/// around a uniformly chosen family representative, labels from the
/// consultant oracle and, with probability `noise`, replaced by a uniformly
/// chosen different family.
inline Dataset synth_generate(std::size_t n, std::uint64_t seed, double noise = kDefaultLabelNoise,
                              const Palette& palette = default_palette(), const HarmonyRules& rules = default_rules(),
                              const SynthOptions& opts = {})
{
    if (n == 0) throw DomainError("synth_generate: n must be >= 1");
    if (!(noise >= 0.0 && noise < 1.0)) throw DomainError("synth_generate: noise must be in [0,1)");

    std::mt19937_64 rng(seed);
    auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    std::discrete_distribution<int> pref_count(opts.preference_count_weights.begin(),
                                               opts.preference_count_weights.end());
    std::discrete_distribution<int> furn_count(opts.furniture_count_weights.begin(),
                                               opts.furniture_count_weights.end());
    std::discrete_distribution<int> furn_class(opts.furniture_class_weights.begin(),
                                               opts.furniture_class_weights.end());
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Dataset d;
    d.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        RoomAttributes attrs{static_cast<RoomType>(uniform(0, vocabulary_size<RoomType> - 1)),
                             static_cast<RoomSize>(uniform(0, vocabulary_size<RoomSize> - 1)),
                             static_cast<RoomStyle>(uniform(0, vocabulary_size<RoomStyle> - 1)),
                             static_cast<RoomMood>(uniform(0, vocabulary_size<RoomMood> - 1)),
                             static_cast<RoomTone>(uniform(0, vocabulary_size<RoomTone> - 1))};
        UserPreferences prefs;
        const int npref = pref_count(rng);
        std::vector<int> ids(kFamilyCount);
        std::iota(ids.begin(), ids.end(), 0);
        std::shuffle(ids.begin(), ids.end(), rng);
        prefs.color_preferences.assign(ids.begin(), ids.begin() + npref);
        std::sort(prefs.color_preferences.begin(), prefs.color_preferences.end());
        prefs.paint_preference = static_cast<PaintPreference>(uniform(0, vocabulary_size<PaintPreference> - 1));

        std::vector<FurnitureFeature> furniture;
        const int nfurn = furn_count(rng);
        for (int f = 0; f < nfurn; ++f) {
            const auto cls = static_cast<FurnitureClass>(furn_class(rng));
            const Rgb8 rep = palette[uniform(0, kFamilyCount - 1)].representative;
            const int shift = uniform(-opts.lightness_jitter, opts.lightness_jitter);
            auto jitter = [&](std::uint8_t v) {
                return std::clamp(int{v} + shift + uniform(-opts.channel_jitter, opts.channel_jitter), 0, 255);
            };
            const int r = jitter(rep.r), g = jitter(rep.g), b = jitter(rep.b);
            furniture.push_back({cls, Rgb8::checked(r, g, b)});
        }

        TrainingRecord rec;
        rec.features = encode(attrs, prefs, furniture);
        rec.label = oracle_label(rec.features, palette, rules);
        // Both draws happen unconditionally so the feature stream does not
        // depend on the noise level.
        const double u = unit(rng);
        const int other = uniform(0, kFamilyCount - 2);
        if (u < noise) {
            rec.label = other >= rec.label ? other + 1 : other;
        }
        d.records.push_back(std::move(rec));
    }
    return d;
}

/// Seeded shuffle, then the first floor(n * train_fraction) records train.
inline std::pair<Dataset, Dataset> split_shuffle(const Dataset& d, double train_fraction, std::uint64_t seed)
{
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw DomainError("split_shuffle: train_fraction must be in (0,1)");
    }
    if (d.empty()) throw DomainError("split_shuffle: empty dataset");

    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(d.size()) * train_fraction + 1e-9));
    Dataset train, val;
    train.schema_version = val.schema_version = d.schema_version;
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_train ? train : val).records.push_back(d.records[order[i]]);
    }
    return {std::move(train), std::move(val)};
}

// Text format: line 1 "icdh_dataset_v<version>", line 2 column names
// "f0,...,f66,label", then one record per line with 6-decimal floats.

inline constexpr const char* kDatasetMagicPrefix = "icdh_dataset_v";

inline std::string dataset_header()
{
    std::string h = std::string(kDatasetMagicPrefix) + std::to_string(kFeatureSchemaVersion) + "\n";
    for (int i = 0; i < layout::size; ++i) h += "f" + std::to_string(i) + ",";
    h += "label\n";
    return h;
}

inline std::string format_record(const TrainingRecord& rec)
{
    std::string line;
    line.reserve(layout::size * 9 + 4);
    char buf[32];
    for (double v : rec.features.values) {
        std::snprintf(buf, sizeof buf, "%.6f,", v);
        line += buf;
    }
    line += std::to_string(rec.label);
    line += '\n';
    return line;
}

inline void write_dataset(const Dataset& d, const std::string& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write dataset: " + path);
    out << dataset_header();
    for (const auto& r : d.records) out << format_record(r);
    if (!out) throw IoError("write failed: " + path);
}

/// Appends rows to an existing dataset file (creating it with a header if
/// it does not exist yet).
inline void append_records(const std::string& path, const std::vector<TrainingRecord>& rows)
{
    const bool exists = std::ifstream(path).good();
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot append to dataset: " + path);
    if (!exists) out << dataset_header();
    for (const auto& r : rows) out << format_record(r);
    out.flush();
    if (!out) throw IoError("append failed: " + path);
}

inline Dataset parse_dataset(std::istream& in, const std::string& origin)
{
    Dataset d;
    std::string line;
    if (!std::getline(in, line)) return d; // zero-byte file
    if (line.rfind(kDatasetMagicPrefix, 0) != 0) {
        throw ParseError(origin + ": line 1: missing dataset header '" + kDatasetMagicPrefix + "N'");
    }
    if (line != std::string(kDatasetMagicPrefix) + std::to_string(kFeatureSchemaVersion)) {
        throw FormatError(origin + ": schema version mismatch: '" + line + "'");
    }
    if (!std::getline(in, line)) return d;
    if (line + "\n" != dataset_header().substr(dataset_header().find('\n') + 1)) {
        throw ParseError(origin + ": line 2: unexpected column header");
    }

    std::size_t lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = origin + ": row " + std::to_string(lineno - 2) + " (line " + std::to_string(lineno) + ")";
        TrainingRecord rec;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        int col = 0;
        while (true) {
            const char* comma = std::find(p, end, ',');
            if (col < layout::size) {
                double v;
                auto [ptr, ec] = std::from_chars(p, comma, v);
                if (ec != std::errc{} || ptr != comma) {
                    throw ParseError(where + ": bad number in column " + std::to_string(col));
                }
                rec.features[col] = v;
            } else if (col == layout::size) {
                int lab;
                auto [ptr, ec] = std::from_chars(p, comma, lab);
                if (ec != std::errc{} || ptr != comma || lab < 0 || lab >= kFamilyCount) {
                    throw ParseError(where + ": bad label");
                }
                rec.label = lab;
            }
            ++col;
            if (comma == end) break;
            p = comma + 1;
        }
        if (col != layout::size + 1) {
            throw ParseError(where + ": expected " + std::to_string(layout::size + 1) + " columns, got " +
                             std::to_string(col));
        }
        d.records.push_back(rec);
    }
    return d;
}

inline Dataset read_dataset(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset: " + path);
    return parse_dataset(in, path);
}

} // namespace icdh
