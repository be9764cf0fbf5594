#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labelaug/adam.hpp"
#include "labelaug/tensor.hpp"

namespace labelaug {

enum class Precision : std::uint32_t { f32 = 32, f64 = 64 };

template <typename T>
constexpr Precision precision_of() {
    return sizeof(T) == 4 ? Precision::f32 : Precision::f64;
}

// Flat checkpoint container ("LCKP"). Little-endian throughout:
//
//   char[4]  magic "LCKP"
//   u32      version (1)
//   u32      precision in bits (32 or 64)
//   u32      entry count
//   per entry:
//     u32    name length, then name bytes (no terminator)
//     u32    rank, then rank x u64 dims
//     values as IEEE-754 binary32/binary64, row-major
//
// Adam moments are stored as "<param>.m" / "<param>.v", the step counter as
// "adam.step" and the next epoch to run as "train.next_epoch".
struct CheckpointEntry {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    Precision precision = Precision::f32;
    std::vector<CheckpointEntry> entries;

    const CheckpointEntry* find(const std::string& name) const;
    std::optional<double> scalar(const std::string& name) const;
    void add(std::string name, Shape shape, std::vector<double> values);
    void add_scalar(std::string name, double v) { add(std::move(name), {1}, {v}); }
};

std::string encode_checkpoint(const Checkpoint& ckpt);
/// Throws DataError on bad magic, unknown version/precision or truncation.
Checkpoint decode_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

template <typename T>
Checkpoint make_checkpoint(std::span<const Parameter<T>> params, const Adam<T>* adam = nullptr);

/// Restores parameter values (and Adam state if `adam` is given) by exact name.
/// Throws DataError on a missing entry or shape mismatch.
template <typename T>
void restore_checkpoint(const Checkpoint& ckpt, std::span<Parameter<T>> params, Adam<T>* adam = nullptr);

}  // namespace labelaug
