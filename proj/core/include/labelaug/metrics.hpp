#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labelaug/morphology.hpp"
#include "labelaug/tensor.hpp"

namespace labelaug {

/// Success-detection thresholds in pixels; a landmark counts when its distance is strictly below.
inline constexpr std::array<double, 4> kSdrThresholds{2.0, 2.5, 3.0, 4.0};

struct PredictedLandmark {
    int label_id = 0;
    int row = 0;
    int col = 0;
    double peak_logit = 0.0;
};

/// Argmax of one logit channel (row-major, height x width). Ties go to the
/// smallest row-major index.
template <typename T>
PredictedLandmark extract_landmark(std::span<const T> channel, int height, int width, int label_id = 0);

/// Overload for a rank-2 (H, W) tensor.
template <typename T>
PredictedLandmark extract_landmark(const Tensor<T>& channel, int label_id = 0);

/// Euclidean pixel distance. Throws std::invalid_argument on label mismatch.
double distance(const PredictedLandmark& pred, const PointLabel& truth);

/// sqrt(mean(d^2)). Throws std::invalid_argument on an empty list.
double rmse(std::span<const double> distances);

/// Percentage of distances strictly below `threshold`.
double sdr(std::span<const double> distances, double threshold);

double mm_rmse(std::span<const double> distances_px, double mm_per_pixel);

/// One (sample, label) pair of an evaluation.
struct LandmarkResult {
    std::string sample_id;
    int label_id = 0;
    PredictedLandmark prediction;
    std::optional<PointLabel> truth;     // absent when the sample lacks this landmark
    std::optional<double> mm_per_pixel;  // spacing in the evaluated (resized) frame
    std::optional<double> distance_px;
};

struct EvalReport {
    std::vector<LandmarkResult> rows;
    std::size_t num_labels = 0;
    std::size_t evaluated = 0;
    std::size_t skipped = 0;
    /// Pooled over every evaluated (sample, label) pair.
    double mean_rmse = 0.0;
    std::array<double, kSdrThresholds.size()> sdr{};
    std::vector<std::optional<double>> label_rmse;
    std::vector<std::optional<double>> label_mm_rmse;  // only when every row of the label has a spacing
};

/// Fills distances and aggregates. Rows without truth are skipped and counted.
/// Throws std::invalid_argument when no row has ground truth.
EvalReport aggregate(std::vector<LandmarkResult> rows, std::size_t num_labels);

/// Flat list of the evaluated distances, in row order.
std::vector<double> evaluated_distances(const EvalReport& report);

/// CSV: per-row block, blank line, summary block, blank line, per-label block.
std::string to_csv(const EvalReport& report);
void write_csv(const std::filesystem::path& path, const EvalReport& report);

}  // namespace labelaug
