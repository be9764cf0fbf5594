#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labelaug/image.hpp"
#include "labelaug/morphology.hpp"
#include "labelaug/rng.hpp"
#include "labelaug/tensor.hpp"

namespace labelaug {

struct RawSample {
    std::string id;
    GrayImage image;
    std::vector<PointLabel> points;
    std::optional<double> mm_per_pixel;
};

/// How a processed sample relates to its source image.
struct Provenance {
    int source_height = 0;
    int source_width = 0;
    int pad_top = 0;
    int pad_left = 0;
    /// standard size / padded side
    double scale = 1.0;
};

struct ProcessedSample {
    std::string id;
    Tensor<double> image;  // (1, size, size), values in [0, 1]
    std::vector<PointLabel> points;
    std::optional<double> mm_per_pixel;  // spacing in the resized frame
    Provenance provenance;

    int size() const { return static_cast<int>(image.dim(1)); }
};

struct Padding {
    int top = 0, bottom = 0, left = 0, right = 0;
};

/// Zero padding that makes an h x w image square: the deficit is split with
/// floor(d/2) on the leading side and the remainder on the trailing side.
Padding square_padding(int height, int width);

RawSample pad_to_square(const RawSample& sample);

/// Bilinear resample of a square image to size x size, scaled to [0, 1] by the
/// bit-depth maximum. Points map by r' = round(r * size / H), clamped.
/// Throws DataError on a non-square input.
ProcessedSample resize_to_standard(const RawSample& square, int size);

/// pad_to_square followed by resize_to_standard, with full provenance.
ProcessedSample preprocess(const RawSample& sample, int size);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

/// Seeded shuffle of [0, n), first floor(0.8 n) to train. Throws DataError if n < 5.
Split split_indices(std::size_t n, std::uint64_t seed);

struct DatasetManifest;
/// split_indices over the manifest entries.
Split split(const DatasetManifest& manifest, std::uint64_t seed);

/// Rotation of a point about the image centre ((size-1)/2, (size-1)/2),
/// positive angles turning +row towards +col. Empty if it leaves the frame.
std::optional<PointLabel> rotate_point(const PointLabel& p, double degrees, int size);

/// Rotates image (bilinear, zero fill) and points by `degrees`. Points that
/// leave the frame are dropped, which marks that label absent for the sample.
ProcessedSample rotate_by(const ProcessedSample& sample, double degrees);

/// rotate_by with an angle drawn uniformly from [-max_deg, +max_deg].
ProcessedSample rotate_augment(const ProcessedSample& sample, Rng& rng, double max_deg = 20.0);

// ---------------------------------------------------------------------------
// On-disk dataset

struct ManifestEntry {
    std::filesystem::path image;
    std::filesystem::path annotations;
};

struct DatasetManifest {
    std::filesystem::path root;
    std::vector<std::string> label_names;
    std::vector<ManifestEntry> entries;

    std::size_t num_labels() const { return label_names.size(); }
};

struct AnnotationRecord {
    std::string id;
    std::vector<PointLabel> points;
    std::optional<double> mm_per_pixel;
};

/// One JSON object per line: {"id": ..., "points": [[label, row, col], ...], "mm_per_pixel": ...}
std::string format_annotation(const AnnotationRecord& record);
AnnotationRecord parse_annotation(std::string_view line);
std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path);

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Loads every manifest entry; the annotation record is the one whose id equals
/// the image file stem. Throws DataError on missing files or invalid points.
std::vector<RawSample> load_dataset(const DatasetManifest& manifest);

/// Throws DataError unless every point is in bounds with label id < num_labels.
void validate_sample(const RawSample& sample, std::size_t num_labels);

}  // namespace labelaug
