#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "labelaug/dataset.hpp"
#include "labelaug/rng.hpp"

namespace labelaug {

/// Axis-aligned ellipse in pixel units. Integer centre and semi-axes keep the
/// centre and the four extremal points exact.
struct Ellipse {
    int center_row = 0;
    int center_col = 0;
    int semi_rows = 1;  // vertical semi-axis
    int semi_cols = 1;  // horizontal semi-axis
};

/// Landmark loci in label order. The diagonal loci sit at parametric angles
/// 135, 45 and 315 degrees and are rounded to the nearest pixel.
inline constexpr std::array<std::string_view, 8> kSyntheticLabelNames{
    "center", "left", "right", "top", "bottom", "upper_left", "upper_right", "lower_right"};

/// The first `num_labels` loci of `e`. Throws ConfigError if num_labels exceeds the available loci.
std::vector<PointLabel> ellipse_loci(const Ellipse& e, std::size_t num_labels);

struct SyntheticSample {
    RawSample sample;
    Ellipse ellipse;
};

/// Bright soft-edged ellipse on a noisy dark background, 8-bit. Fixed pixel spacing of 0.2 mm.
/// Requires size >= 32 and 1 <= num_labels <= 8; deterministic in the rng state.
std::vector<SyntheticSample> generate_synthetic_with_geometry(std::size_t count, int size, std::size_t num_labels,
                                                              Rng& rng);

std::vector<RawSample> generate_synthetic(std::size_t count, int size, std::size_t num_labels, Rng& rng);

}  // namespace labelaug
