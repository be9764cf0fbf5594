#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "labelaug/config.hpp"
#include "labelaug/dataset.hpp"
#include "labelaug/image.hpp"
#include "labelaug/metrics.hpp"
#include "labelaug/unet.hpp"

namespace labelaug {

/// Samples after preprocessing, with the run's train/validation split.
struct PreparedData {
    std::vector<ProcessedSample> samples;
    std::vector<std::string> label_names;
    Split split;

    std::size_t num_labels() const { return label_names.size(); }
    std::vector<ProcessedSample> subset(std::span<const std::size_t> indices) const;
};

/// Loads the manifest (or generates the synthetic set), preprocesses to the
/// standard size and splits 4:1 with the run seed.
PreparedData prepare_data(const ExperimentConfig& config);

struct EpochRecord {
    int epoch = 0;
    int level = 0;
    double loss = 0.0;
    std::vector<double> weights;  // mean w~ per label over the training samples that have it
    double seconds = 0.0;
};

struct RunRecord {
    std::vector<EpochRecord> epochs;
    EvalReport report;  // validation split, final model
    std::vector<std::filesystem::path> checkpoints;
};

struct TrainOptions {
    /// Continue from <out>/last.lckp when it exists.
    bool resume = false;
    /// Write checkpoints, run.csv, eval.csv and config.ini under config.out_dir.
    bool write_outputs = true;
    std::function<void(const EpochRecord&)> on_epoch;
};

/// Full curriculum training loop followed by validation. Throws NumericError
/// if the loss becomes non-finite.
RunRecord train(const ExperimentConfig& config, const TrainOptions& options = {});

/// Forward each sample, take the per-channel argmax and aggregate.
template <typename T>
EvalReport evaluate(const UNetModel<T>& model, std::span<const ProcessedSample> samples, std::size_t batch_size = 8);

/// Builds the model described by `config`, loads `checkpoint` and evaluates the
/// validation split (or every sample when `all_samples`). Throws DataError on
/// a label-count or shape mismatch, std::invalid_argument on an empty set.
EvalReport evaluate_checkpoint(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                               bool all_samples = false);

/// Writes <count> PNGs under outdir/images, outdir/annotations.jsonl and
/// outdir/manifest.txt; returns the manifest path.
std::filesystem::path generate_dataset(std::size_t count, int size, std::size_t num_labels, std::uint64_t seed,
                                       const std::filesystem::path& outdir);

/// Overlay colours and geometry: grayscale base upscaled by `scale` (nearest),
/// ground truth as blue (0,0,255) crosses, predictions as red (255,0,0) crosses
/// drawn on top; each cross is 1 px thick with arms of 2*scale px.
inline constexpr Rgb kTruthColor{0, 0, 255};
inline constexpr Rgb kPredictionColor{255, 0, 0};

struct Overlay {
    RgbImage image;
    std::vector<int> absent_labels;  // labels without ground truth; not drawn
};

Overlay render_overlay(const ProcessedSample& sample, std::span<const PredictedLandmark> predictions,
                       std::size_t num_labels, int scale = 4);

/// Loads the checkpoint, predicts on the sample with `sample_id` and renders.
Overlay render_checkpoint(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                          const std::string& sample_id, int scale = 4);

}  // namespace labelaug
