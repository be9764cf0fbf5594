#include "labelaug/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "labelaug/errors.hpp"

namespace labelaug {
namespace {

constexpr double kMmPerPixel = 0.2;
constexpr double kEdgeSoftness = 1.0;  // px
constexpr double kNoiseSigma = 8.0;    // grey levels

}  // namespace

std::vector<PointLabel> ellipse_loci(const Ellipse& e, std::size_t num_labels) {
    if (num_labels == 0 || num_labels > kSyntheticLabelNames.size()) {
        throw ConfigError("synthetic data offers " + std::to_string(kSyntheticLabelNames.size()) +
                          " landmark loci; requested " + std::to_string(num_labels));
    }
    const double s = std::numbers::sqrt2 / 2.0;
    const int dr = static_cast<int>(std::lround(e.semi_rows * s));
    const int dc = static_cast<int>(std::lround(e.semi_cols * s));
    const int r = e.center_row, c = e.center_col;
    const std::array<PointLabel, 8> all{{
        {0, r, c},
        {1, r, c - e.semi_cols},
        {2, r, c + e.semi_cols},
        {3, r - e.semi_rows, c},
        {4, r + e.semi_rows, c},
        {5, r - dr, c - dc},
        {6, r - dr, c + dc},
        {7, r + dr, c + dc},
    }};
    return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(num_labels)};
}

std::vector<SyntheticSample> generate_synthetic_with_geometry(std::size_t count, int size, std::size_t num_labels,
                                                              Rng& rng) {
    if (size < 32) throw ConfigError("synthetic: image size must be >= 32, got " + std::to_string(size));
    (void)ellipse_loci(Ellipse{}, num_labels);  // validates num_labels

    const int min_axis = size / 8;
    const int max_axis = size / 4;
    std::vector<SyntheticSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Ellipse e;
        e.semi_rows = min_axis + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_axis - min_axis + 1)));
        e.semi_cols = min_axis + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_axis - min_axis + 1)));
        const int margin = 2;
        const int row_span = size - 2 * (e.semi_rows + margin);
        const int col_span = size - 2 * (e.semi_cols + margin);
        e.center_row = e.semi_rows + margin + static_cast<int>(rng.below(static_cast<std::uint64_t>(row_span)));
        e.center_col = e.semi_cols + margin + static_cast<int>(rng.below(static_cast<std::uint64_t>(col_span)));
        const double background = rng.uniform(15.0, 40.0);
        const double foreground = rng.uniform(170.0, 230.0);

        RawSample s;
        char id[32];
        std::snprintf(id, sizeof id, "synth_%05zu", i);
        s.id = id;
        s.image = GrayImage(size, size, 8);
        s.mm_per_pixel = kMmPerPixel;
        const double a = e.semi_rows, b = e.semi_cols;
        for (int r = 0; r < size; ++r) {
            for (int c = 0; c < size; ++c) {
                const double dy = r - e.center_row, dx = c - e.center_col;
                const double rho = std::sqrt((dy / a) * (dy / a) + (dx / b) * (dx / b));
                // first-order signed distance to the boundary, positive inside
                double sd;
                if (rho < 1e-9) {
                    sd = std::min(a, b);
                } else {
                    const double grad = std::sqrt((dy / (a * a)) * (dy / (a * a)) + (dx / (b * b)) * (dx / (b * b))) / rho;
                    sd = (1.0 - rho) / grad;
                }
                const double inside = 1.0 / (1.0 + std::exp(-sd / kEdgeSoftness));
                const double v = background + (foreground - background) * inside + kNoiseSigma * rng.normal();
                s.image.at(r, c) = static_cast<std::uint16_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
        s.points = ellipse_loci(e, num_labels);
        out.push_back({std::move(s), e});
    }
    return out;
}

std::vector<RawSample> generate_synthetic(std::size_t count, int size, std::size_t num_labels, Rng& rng) {
    auto with_geometry = generate_synthetic_with_geometry(count, size, num_labels, rng);
    std::vector<RawSample> out;
    out.reserve(with_geometry.size());
    for (auto& g : with_geometry) out.push_back(std::move(g.sample));
    return out;
}

}  // namespace labelaug
