#include "labelaug/curriculum.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "labelaug/errors.hpp"

namespace labelaug {

void CurriculumSchedule::validate() const {
    if (initial_dilation < 0) throw ConfigError("schedule: initial dilation must be >= 0");
    if (erosion_step < 1) throw ConfigError("schedule: erosion step must be >= 1");
    if (period < 1) throw ConfigError("schedule: period must be >= 1");
}

int dilation_level(const CurriculumSchedule& s, int epoch) {
    if (epoch < 0) throw std::invalid_argument("dilation_level: epoch must be >= 0");
    const long long eroded = static_cast<long long>(s.erosion_step) * (epoch / s.period);
    return static_cast<int>(std::max(0LL, s.initial_dilation - eroded));
}

int first_base_epoch(const CurriculumSchedule& s) {
    const int stages = (s.initial_dilation + s.erosion_step - 1) / s.erosion_step;
    return s.period * stages;
}

std::vector<double> reweight(std::span<const double> base_weights, std::size_t image_pixels,
                             std::span<const std::size_t> dilated_pixels, std::span<const std::size_t> label_pixels) {
    if (image_pixels == 0) throw std::invalid_argument("reweight: image size must be > 0");
    if (dilated_pixels.size() != base_weights.size() || label_pixels.size() != base_weights.size()) {
        throw std::invalid_argument("reweight: per-label vectors differ in length");
    }
    std::vector<double> out(base_weights.size());
    for (std::size_t k = 0; k < base_weights.size(); ++k) {
        const std::size_t fg = dilated_pixels[k] + label_pixels[k];
        if (fg == 0) {
            throw std::invalid_argument("reweight: label " + std::to_string(k) + " has no pixels (absent landmark)");
        }
        if (fg > image_pixels) {
            throw std::invalid_argument("reweight: label " + std::to_string(k) + " covers " + std::to_string(fg) +
                                        " pixels, more than the image's " + std::to_string(image_pixels));
        }
        if (!(base_weights[k] > 0.0)) throw std::invalid_argument("reweight: base weights must be > 0");
        out[k] = base_weights[k] * static_cast<double>(image_pixels - fg) / static_cast<double>(fg);
    }
    return out;
}

LabelTargets make_targets(std::span<const PointLabel> points, int level, int height, int width,
                          StructuringElement se, std::span<const double> base_weights) {
    if (level < 0) throw std::invalid_argument("make_targets: level must be >= 0");
    const std::size_t k = base_weights.size();
    const std::size_t s = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    LabelTargets t;
    t.channels.reserve(k);
    t.weights.assign(k, 0.0);
    t.present.assign(k, false);
    for (const auto& p : points) {
        if (p.label_id < 0 || static_cast<std::size_t>(p.label_id) >= k) {
            throw DataError("make_targets: label id " + std::to_string(p.label_id) + " outside [0, " +
                            std::to_string(k) + ")");
        }
    }
    for (std::size_t c = 0; c < k; ++c) {
        BinaryMask base = rasterize(points, static_cast<int>(c), height, width);
        const std::size_t label = count_true(base);
        BinaryMask grown = dilate(base, level, se);
        if (label > 0) {
            const std::size_t dilated = count_true(grown) - label;
            const double w = base_weights[c];
            t.weights[c] = reweight(std::span(&w, 1), s, std::span(&dilated, 1), std::span(&label, 1)).front();
            t.present[c] = true;
        }
        t.channels.push_back(std::move(grown));
    }
    return t;
}

}  // namespace labelaug
