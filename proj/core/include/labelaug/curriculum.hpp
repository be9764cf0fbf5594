#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "labelaug/morphology.hpp"

namespace labelaug {

/// Dilate-then-erode policy: labels start dilated by `initial_dilation`
/// iterations and lose `erosion_step` iterations every `period` epochs.
struct CurriculumSchedule {
    int initial_dilation = 65;
    int erosion_step = 10;
    int period = 50;
    StructuringElement se = StructuringElement::square3;

    /// Level 0 throughout: plain point targets.
    static CurriculumSchedule baseline() { return {0, 1, 1, StructuringElement::square3}; }
    bool is_baseline() const noexcept { return initial_dilation == 0; }

    /// Throws ConfigError unless D0 >= 0, E >= 1, P >= 1.
    void validate() const;
};

/// Snapshot of the curriculum at one epoch.
struct CurriculumState {
    int epoch = 0;
    int level = 0;
    std::vector<double> weights;
};

/// max(0, D0 - E * floor(epoch / P)).
int dilation_level(const CurriculumSchedule& schedule, int epoch);

/// First epoch at which the level reaches 0: P * ceil(D0 / E).
int first_base_epoch(const CurriculumSchedule& schedule);

/// Per-label weight rescaling for a foreground of D_k + L_k pixels out of S:
///   w~_k = w_k * (S - (D_k + L_k)) / (D_k + L_k)
/// Throws std::invalid_argument if D_k + L_k is 0 or exceeds S.
std::vector<double> reweight(std::span<const double> base_weights, std::size_t image_pixels,
                             std::span<const std::size_t> dilated_pixels, std::span<const std::size_t> label_pixels);

struct LabelTargets {
    std::vector<BinaryMask> channels;  // one per label
    std::vector<double> weights;       // w~ per label; 0 where the label is absent
    std::vector<bool> present;         // false when the sample has no point of that label
};

/// Channel k = dilate(rasterize(points, k), level). Labels without points get an
/// all-false channel, weight 0 and present = false; callers exclude them from the loss.
/// The label count is base_weights.size().
LabelTargets make_targets(std::span<const PointLabel> points, int level, int height, int width,
                          StructuringElement se, std::span<const double> base_weights);

}  // namespace labelaug
