#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "labelaug/adam.hpp"
#include "labelaug/checkpoint.hpp"
#include "labelaug/curriculum.hpp"
#include "labelaug/unet.hpp"

namespace labelaug {

struct DatasetSpec {
    /// On-disk dataset; when empty a synthetic set is generated in memory.
    std::optional<std::filesystem::path> manifest;
    std::size_t synthetic_count = 200;
    int synthetic_size = 64;
    std::size_t synthetic_labels = 4;
};

struct OptimizerSpec {
    AdamOptions adam;
    std::size_t batch_size = 8;
    int epochs = 400;
};

struct AugmentationSpec {
    bool rotation = false;
    double max_deg = 20.0;
};

/// Everything that determines a run. Serialized as an INI-style file:
///
///   [dataset]       manifest, synthetic_count, synthetic_size, synthetic_labels
///   [model]         depth, base_channels, precision (32|64)
///   [schedule]      mode (curriculum|baseline), dilate, erode_step, period, se, base_weights
///   [optimizer]     lr, beta1, beta2, eps, batch_size, epochs
///   [augmentation]  rotation (true|false), max_deg
///   [run]           seed, size, out
struct ExperimentConfig {
    DatasetSpec dataset;
    UNetConfig model;  // num_labels is taken from the dataset
    CurriculumSchedule schedule;
    std::vector<double> base_weights;  // empty: 1 for every label
    OptimizerSpec optimizer;
    AugmentationSpec augmentation;
    std::uint64_t seed = 0;
    int size = 64;
    std::filesystem::path out_dir = "runs/default";
    Precision precision = Precision::f32;

    /// Throws ConfigError on invalid values or a missing manifest file.
    void validate() const;
};

/// Sets one "section.key" to a textual value. Throws ConfigError on unknown keys or bad values.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Relative manifest/out paths are resolved against `base_dir`.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string format_config(const ExperimentConfig& config);

/// CLI flag name (without dashes) for each settable key, e.g. "dilate" -> "schedule.dilate".
struct FlagBinding {
    std::string_view flag;
    std::string_view key;
    std::string_view help;
};
const std::vector<FlagBinding>& config_flags();

}  // namespace labelaug
