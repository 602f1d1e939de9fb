#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "icdh/color.hpp"
#include "icdh/detection.hpp"
#include "icdh/error.hpp"
#include "icdh/image.hpp"

namespace icdh {

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    std::uint8_t at(int x, int y) const noexcept { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Per-pixel boolean raster; shared shape of edge maps and wall masks.
struct BitMap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    BitMap() = default;
    BitMap(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

    bool at(int x, int y) const noexcept { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v = true) noexcept { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    std::size_t count() const noexcept
    {
        return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
    }

    friend bool operator==(const BitMap&, const BitMap&) = default;
};

struct EdgeMap : BitMap {
    double threshold = 0.0;
};

struct WallMask : BitMap {
    using BitMap::BitMap;
};

/// Luminance round(0.299 r + 0.587 g + 0.114 b), computed in integer
/// thousandths so that the weights sum to exactly one.
inline GrayImage to_grayscale(const Image& img)
{
    GrayImage g{img.width, img.height, std::vector<std::uint8_t>(static_cast<std::size_t>(img.width) * img.height)};
    for (std::size_t i = 0; i < g.data.size(); ++i) {
        const int r = img.data[3 * i], gr = img.data[3 * i + 1], b = img.data[3 * i + 2];
        g.data[i] = static_cast<std::uint8_t>(std::min(255, (299 * r + 587 * gr + 114 * b + 500) / 1000));
    }
    return g;
}

/// 3x3 Sobel gradient magnitude; a pixel is an edge iff magnitude > threshold.
/// Borders replicate the nearest pixel.
inline EdgeMap sobel_edges(const GrayImage& g, double threshold)
{
    if (g.width < 3 || g.height < 3) throw DomainError("sobel_edges: image smaller than 3x3");
    if (!(threshold >= 0.0)) throw DomainError("sobel_edges: threshold must be nonnegative");
    EdgeMap e;
    static_cast<BitMap&>(e) = BitMap(g.width, g.height);
    e.threshold = threshold;
    auto px = [&](int x, int y) {
        x = std::clamp(x, 0, g.width - 1);
        y = std::clamp(y, 0, g.height - 1);
        return static_cast<int>(g.at(x, y));
    };
    for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
            const int gx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                           (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
            const int gy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                           (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
            const double mag = std::sqrt(static_cast<double>(gx * gx + gy * gy));
            if (mag > threshold) e.set(x, y);
        }
    }
    return e;
}

struct SegmentationConfig {
    double edge_threshold = 100.0;
    double seed_rows = 0.25;  // fraction of image height holding seeds
    int box_margin = 2;       // dilation of furniture boxes, pixels
    int seed_stride = 0;      // grid spacing; 0 picks max(1, min(w,h)/32)
};

inline BoundingBox dilate(const BoundingBox& b, int margin, int width, int height) noexcept
{
    const int x0 = std::max(0, b.x - margin);
    const int y0 = std::max(0, b.y - margin);
    const int x1 = std::min(width, b.x + b.w + margin);
    const int y1 = std::min(height, b.y + b.h + margin);
    return {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
}

/// Flood fill (4-connected) over non-edge pixels from a grid of seeds in the
/// top band of the image, minus the dilated furniture boxes. Seeds on edges
/// or inside boxes are skipped; if none remain, segmentation fails.
inline WallMask wall_mask(const EdgeMap& edges, const std::vector<BoundingBox>& furniture,
                          const SegmentationConfig& cfg = {})
{
    const int w = edges.width, h = edges.height;
    if (w <= 0 || h <= 0) throw DomainError("wall_mask: empty edge map");
    if (!(cfg.seed_rows > 0.0 && cfg.seed_rows <= 1.0)) throw DomainError("wall_mask: seed_rows must be in (0,1]");
    if (cfg.box_margin < 0) throw DomainError("wall_mask: box margin must be nonnegative");

    BitMap blocked(w, h);
    for (const auto& b : furniture) {
        const auto d = dilate(b, cfg.box_margin, w, h);
        for (int y = d.y; y < d.y + d.h; ++y)
            for (int x = d.x; x < d.x + d.w; ++x) blocked.set(x, y);
    }

    const int stride = cfg.seed_stride > 0 ? cfg.seed_stride : std::max(1, std::min(w, h) / 32);
    const int band = std::max(1, static_cast<int>(std::floor(h * cfg.seed_rows)));

    WallMask fill(w, h);
    std::vector<std::pair<int, int>> stack;
    bool seeded = false;
    for (int sy = 0; sy < band; sy += stride) {
        for (int sx = 0; sx < w; sx += stride) {
            if (edges.at(sx, sy) || blocked.at(sx, sy)) continue;
            seeded = true;
            if (fill.at(sx, sy)) continue;
            fill.set(sx, sy);
            stack.emplace_back(sx, sy);
            while (!stack.empty()) {
                auto [x, y] = stack.back();
                stack.pop_back();
                const int nx[4] = {x - 1, x + 1, x, x};
                const int ny[4] = {y, y, y - 1, y + 1};
                for (int k = 0; k < 4; ++k) {
                    if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
                    if (fill.at(nx[k], ny[k]) || edges.at(nx[k], ny[k])) continue;
                    fill.set(nx[k], ny[k]);
                    stack.emplace_back(nx[k], ny[k]);
                }
            }
        }
    }
    if (!seeded) {
        throw SegmentationFailed("wall segmentation failed: every seed lies on an edge or inside furniture");
    }
    for (std::size_t i = 0; i < fill.bits.size(); ++i) {
        if (blocked.bits[i]) fill.bits[i] = 0;
    }
    return fill;
}

inline WallMask segment_wall(const Image& img, const std::vector<BoundingBox>& furniture,
                             const SegmentationConfig& cfg = {})
{
    return wall_mask(sobel_edges(to_grayscale(img), cfg.edge_threshold), furniture, cfg);
}

/// Masked pixels take the target's hue and saturation and keep their own
/// lightness; unmasked pixels are copied unchanged.
inline Image recolor(const Image& img, const WallMask& mask, const ColorFamily& target)
{
    if (mask.width != img.width || mask.height != img.height) {
        throw DomainError("recolor: mask dimensions do not match image");
    }
    const Hsl t = rgb_to_hsl(target.representative);
    Image out = img;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (!mask.at(x, y)) continue;
            const Hsl p = rgb_to_hsl(img.at(x, y));
            out.set(x, y, hsl_to_rgb({t.h, t.s, p.l}));
        }
    }
    return out;
}

} // namespace icdh
