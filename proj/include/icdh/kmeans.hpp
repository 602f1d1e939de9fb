#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "icdh/color.hpp"
#include "icdh/detection.hpp"
#include "icdh/error.hpp"
#include "icdh/image.hpp"

namespace icdh {

/// A pixel as a point in RGB 3-space, coordinates on the 0..255 scale.
struct ColorPoint {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;

    friend bool operator==(const ColorPoint&, const ColorPoint&) = default;
    friend auto operator<=>(const ColorPoint&, const ColorPoint&) = default;
};

inline double squared_distance(const ColorPoint& a, const ColorPoint& b) noexcept
{
    const double dr = a.r - b.r;
    const double dg = a.g - b.g;
    const double db = a.b - b.b;
    return dr * dr + dg * dg + db * db;
}

struct KMeansConfig {
    int k = 5;
    int max_iters = 50;
    double tol = 0.5; // max centroid shift, RGB units
    std::uint64_t seed = 0;
    int restarts = 3;
    // Only consulted by dominant_color: pixel budget per box.
    std::size_t max_samples = 4096;

    void validate() const
    {
        if (k < 1) throw DomainError("kmeans: k must be >= 1");
        if (max_iters < 1) throw DomainError("kmeans: max_iters must be >= 1");
        if (restarts < 1) throw DomainError("kmeans: restarts must be >= 1");
        if (!(tol >= 0.0)) throw DomainError("kmeans: tol must be >= 0");
        if (max_samples < 1) throw DomainError("kmeans: max_samples must be >= 1");
    }
};

struct KMeansResult {
    std::vector<ColorPoint> centroids;
    std::vector<std::size_t> counts;
    double inertia = 0.0;
    // Inertia after each assignment step, one list per restart.
    std::vector<std::vector<double>> inertia_history;
};

namespace detail {

inline std::size_t count_distinct(std::vector<ColorPoint> pts)
{
    std::sort(pts.begin(), pts.end());
    return static_cast<std::size_t>(std::unique(pts.begin(), pts.end()) - pts.begin());
}

// Nearest centroid, ties to the lowest index.
inline std::size_t nearest(const ColorPoint& p, const std::vector<ColorPoint>& centroids, double& dist)
{
    std::size_t best = 0;
    dist = squared_distance(p, centroids[0]);
    for (std::size_t c = 1; c < centroids.size(); ++c) {
        const double d = squared_distance(p, centroids[c]);
        if (d < dist) {
            dist = d;
            best = c;
        }
    }
    return best;
}

inline std::vector<ColorPoint> kmeanspp_seed(const std::vector<ColorPoint>& pts, std::size_t k,
                                             std::mt19937_64& rng)
{
    std::vector<ColorPoint> centroids;
    centroids.reserve(k);
    std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
    centroids.push_back(pts[pick(rng)]);

    std::vector<double> d2(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = squared_distance(pts[i], centroids[0]);

    while (centroids.size() < k) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t chosen = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            chosen = pts.size() - 1;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                target -= d2[i];
                if (target < 0.0 && d2[i] > 0.0) {
                    chosen = i;
                    break;
                }
            }
            // Guard against landing on a zero-weight tail point through round-off.
            while (d2[chosen] == 0.0 && chosen > 0) --chosen;
        } else {
            chosen = pick(rng);
        }
        centroids.push_back(pts[chosen]);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            d2[i] = std::min(d2[i], squared_distance(pts[i], centroids.back()));
        }
    }
    return centroids;
}

struct LloydRun {
    std::vector<ColorPoint> centroids;
    std::vector<std::size_t> counts;
    double inertia = 0.0;
    std::vector<double> history;
};

inline double assign(const std::vector<ColorPoint>& pts, const std::vector<ColorPoint>& centroids,
                     std::vector<std::size_t>& labels)
{
    double inertia = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double d;
        labels[i] = nearest(pts[i], centroids, d);
        inertia += d;
    }
    return inertia;
}

inline LloydRun lloyd(const std::vector<ColorPoint>& pts, std::vector<ColorPoint> centroids,
                      const KMeansConfig& cfg)
{
    const std::size_t k = centroids.size();
    std::vector<std::size_t> labels(pts.size());
    LloydRun run;

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        run.history.push_back(assign(pts, centroids, labels));

        std::vector<ColorPoint> sums(k);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            auto& s = sums[labels[i]];
            s.r += pts[i].r;
            s.g += pts[i].g;
            s.b += pts[i].b;
            ++counts[labels[i]];
        }
        std::vector<ColorPoint> next = centroids;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                const double n = static_cast<double>(counts[c]);
                next[c] = {sums[c].r / n, sums[c].g / n, sums[c].b / n};
            }
        }
        // An emptied cluster moves to the point farthest from its nearest centroid.
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                double d;
                nearest(pts[i], next, d);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            next[c] = pts[far];
        }

        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            shift = std::max(shift, std::sqrt(squared_distance(centroids[c], next[c])));
        }
        centroids = std::move(next);
        if (shift <= cfg.tol) break;
    }

    run.inertia = assign(pts, centroids, labels);
    run.history.push_back(run.inertia);
    run.counts.assign(k, 0);
    for (auto l : labels) ++run.counts[l];
    run.centroids = std::move(centroids);
    return run;
}

} // namespace detail

/// Lloyd's algorithm from k-means++ seeds, best of `restarts` by inertia.
/// The effective k is min(k, number of distinct points).
inline KMeansResult kmeans(const std::vector<ColorPoint>& points, const KMeansConfig& config)
{
    config.validate();
    if (points.empty()) {
        throw DomainError("kmeans: empty point list");
    }
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(config.k),
                                                detail::count_distinct(points));
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < config.restarts; ++r) {
        std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                          static_cast<std::uint32_t>(r)};
        std::mt19937_64 rng(seq);
        auto run = detail::lloyd(points, detail::kmeanspp_seed(points, k, rng), config);
        best.inertia_history.push_back(run.history);
        if (run.inertia < best.inertia) {
            best.inertia = run.inertia;
            best.centroids = std::move(run.centroids);
            best.counts = std::move(run.counts);
        }
    }
    return best;
}

/// Pixels of `box`: every pixel (row-major) if the box fits the budget,
/// otherwise a seeded uniform sample of exactly `max_samples` without
/// replacement.
inline std::vector<ColorPoint> sample_pixels(const Image& image, const BoundingBox& box,
                                             std::size_t max_samples, std::uint64_t seed)
{
    if (box.w <= 0 || box.h <= 0 || box.x < 0 || box.y < 0 || box.x + box.w > image.width ||
        box.y + box.h > image.height) {
        throw DomainError("sample_pixels: box is degenerate or outside the image");
    }
    if (max_samples == 0) {
        throw DomainError("sample_pixels: max_samples must be positive");
    }
    auto point_at = [&](std::size_t idx) {
        const int x = box.x + static_cast<int>(idx % box.w);
        const int y = box.y + static_cast<int>(idx / box.w);
        const Rgb8 c = image.at(x, y);
        return ColorPoint{double(c.r), double(c.g), double(c.b)};
    };

    const auto area = static_cast<std::size_t>(box.area());
    std::vector<ColorPoint> out;
    if (area <= max_samples) {
        out.reserve(area);
        for (std::size_t i = 0; i < area; ++i) out.push_back(point_at(i));
        return out;
    }
    std::vector<std::size_t> idx(area);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<std::size_t> chosen;
    chosen.reserve(max_samples);
    std::mt19937_64 rng(seed);
    std::sample(idx.begin(), idx.end(), std::back_inserter(chosen), max_samples, rng);
    out.reserve(max_samples);
    for (auto i : chosen) out.push_back(point_at(i));
    return out;
}

inline Rgb8 round_to_rgb(const ColorPoint& p) noexcept
{
    auto q = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); };
    return {q(p.r), q(p.g), q(p.b)};
}

/// Centroid of the most populous cluster. Count ties go to the centroid with
/// the lower decimal encoding.
inline Rgb8 dominant_color(const Image& image, const BoundingBox& box, const KMeansConfig& config = {})
{
    auto pts = sample_pixels(image, box, config.max_samples, config.seed);
    // Canonical order makes the result independent of pixel order.
    std::sort(pts.begin(), pts.end());
    const auto res = kmeans(pts, config);

    std::size_t best = 0;
    for (std::size_t c = 1; c < res.centroids.size(); ++c) {
        if (res.counts[c] > res.counts[best] ||
            (res.counts[c] == res.counts[best] &&
             rgb_to_decimal(round_to_rgb(res.centroids[c])) < rgb_to_decimal(round_to_rgb(res.centroids[best])))) {
            best = c;
        }
    }
    return round_to_rgb(res.centroids[best]);
}

} // namespace icdh
