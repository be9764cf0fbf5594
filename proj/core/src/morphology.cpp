#include "labelaug/morphology.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "labelaug/errors.hpp"

namespace labelaug {
namespace {

constexpr int kFar = std::numeric_limits<int>::max() / 4;

// n iterations of a 3x3 footprint equal the ball of radius n in the footprint's
// metric (chessboard for square3, city-block for cross3), and both balls are
// reachable by monotone paths that stay inside the rectangle. So iterated
// morphology reduces to thresholding an exact two-pass chamfer distance.
void chamfer(std::vector<int>& d, int h, int w, StructuringElement se) {
    const bool diag = se == StructuringElement::square3;
    auto at = [&](int r, int c) -> int& { return d[static_cast<std::size_t>(r) * w + c]; };
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            int best = at(r, c);
            if (r > 0) best = std::min(best, at(r - 1, c) + 1);
            if (c > 0) best = std::min(best, at(r, c - 1) + 1);
            if (diag && r > 0 && c > 0) best = std::min(best, at(r - 1, c - 1) + 1);
            if (diag && r > 0 && c + 1 < w) best = std::min(best, at(r - 1, c + 1) + 1);
            at(r, c) = best;
        }
    }
    for (int r = h - 1; r >= 0; --r) {
        for (int c = w - 1; c >= 0; --c) {
            int best = at(r, c);
            if (r + 1 < h) best = std::min(best, at(r + 1, c) + 1);
            if (c + 1 < w) best = std::min(best, at(r, c + 1) + 1);
            if (diag && r + 1 < h && c + 1 < w) best = std::min(best, at(r + 1, c + 1) + 1);
            if (diag && r + 1 < h && c > 0) best = std::min(best, at(r + 1, c - 1) + 1);
            at(r, c) = best;
        }
    }
}

}  // namespace

BinaryMask::BinaryMask(int height, int width) : height_(height), width_(width) {
    if (height < 0 || width < 0) throw std::invalid_argument("BinaryMask: negative dimensions");
    bits_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), 0);
}

std::string_view to_string(StructuringElement se) {
    return se == StructuringElement::square3 ? "square3" : "cross3";
}

StructuringElement parse_structuring_element(std::string_view name) {
    if (name == "square3") return StructuringElement::square3;
    if (name == "cross3") return StructuringElement::cross3;
    throw ConfigError("unknown structuring element '" + std::string(name) + "' (expected square3 or cross3)");
}

BinaryMask rasterize(std::span<const PointLabel> points, int label_id, int height, int width) {
    BinaryMask mask(height, width);
    for (const auto& p : points) {
        if (p.label_id != label_id) continue;
        if (!mask.in_bounds(p.row, p.col)) {
            throw DataError("rasterize: point (" + std::to_string(p.row) + ", " + std::to_string(p.col) +
                            ") of label " + std::to_string(p.label_id) + " is outside " + std::to_string(height) +
                            "x" + std::to_string(width));
        }
        mask.set(p.row, p.col);
    }
    return mask;
}

BinaryMask dilate(const BinaryMask& mask, int iterations, StructuringElement se) {
    if (iterations < 0) throw std::invalid_argument("dilate: iterations must be >= 0");
    if (iterations == 0) return mask;
    const int h = mask.height(), w = mask.width();
    std::vector<int> d(mask.bits().size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = mask.bits()[i] ? 0 : kFar;
    chamfer(d, h, w, se);
    BinaryMask out(h, w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) out.set(r, c, d[static_cast<std::size_t>(r) * w + c] <= iterations);
    }
    return out;
}

BinaryMask erode(const BinaryMask& mask, int iterations, StructuringElement se) {
    if (iterations < 0) throw std::invalid_argument("erode: iterations must be >= 0");
    if (iterations == 0) return mask;
    const int h = mask.height(), w = mask.width();
    // Distance to the nearest background pixel, where the ring just outside the
    // rectangle is background: in both metrics that ring is min(r+1, c+1, h-r, w-c) away.
    std::vector<int> d(mask.bits().size());
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            d[static_cast<std::size_t>(r) * w + c] =
                mask.get(r, c) ? std::min({r + 1, c + 1, h - r, w - c}) : 0;
        }
    }
    chamfer(d, h, w, se);
    BinaryMask out(h, w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) out.set(r, c, d[static_cast<std::size_t>(r) * w + c] > iterations);
    }
    return out;
}

std::size_t count_true(const BinaryMask& mask) {
    return static_cast<std::size_t>(std::count(mask.bits().begin(), mask.bits().end(), std::uint8_t{1}));
}

}  // namespace labelaug
