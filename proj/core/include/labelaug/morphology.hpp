#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace labelaug {

/// A landmark: integer pixel position of one label.
struct PointLabel {
    int label_id = 0;
    int row = 0;
    int col = 0;

    friend auto operator<=>(const PointLabel&, const PointLabel&) = default;
};

class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int height, int width);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    bool in_bounds(int r, int c) const noexcept { return r >= 0 && c >= 0 && r < height_ && c < width_; }

    bool get(int r, int c) const { return bits_[index(r, c)] != 0; }
    void set(int r, int c, bool v = true) { bits_[index(r, c)] = v ? 1 : 0; }

    std::span<const std::uint8_t> bits() const noexcept { return bits_; }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    std::size_t index(int r, int c) const {
        return static_cast<std::size_t>(r) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(c);
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// 3x3 footprints: square3 is 8-connected, cross3 is 4-connected.
enum class StructuringElement { square3, cross3 };

std::string_view to_string(StructuringElement se);
/// Accepts "square3" or "cross3"; throws ConfigError otherwise.
StructuringElement parse_structuring_element(std::string_view name);

/// One true bit per point of `label_id`. Throws DataError for an out-of-bounds point.
BinaryMask rasterize(std::span<const PointLabel> points, int label_id, int height, int width);

/// `iterations` rounds of dilation, clipped to the image rectangle.
BinaryMask dilate(const BinaryMask& mask, int iterations, StructuringElement se = StructuringElement::square3);

/// `iterations` rounds of erosion; pixels outside the rectangle count as background.
BinaryMask erode(const BinaryMask& mask, int iterations, StructuringElement se = StructuringElement::square3);

std::size_t count_true(const BinaryMask& mask);

}  // namespace labelaug
