#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "labelaug/checkpoint.hpp"
#include "labelaug/graph.hpp"
#include "labelaug/rng.hpp"
#include "labelaug/tensor.hpp"

namespace labelaug {

struct UNetConfig {
    std::size_t in_channels = 1;
    std::size_t num_labels = 1;
    std::size_t depth = 3;
    std::size_t base_channels = 8;

    /// Throws ConfigError on zero-sized fields.
    void validate() const;
    /// Input height and width must be multiples of this.
    std::size_t required_divisor() const { return std::size_t{1} << depth; }
};

/// Closed-form parameter count of the topology built by build_unet.
std::size_t unet_parameter_count(const UNetConfig& config);

/// Encoder-decoder with skip connections.
///
/// Level i (0-based) of the encoder has base*2^i channels and runs two
/// conv3x3+relu, then maxpool2. The bottleneck has base*2^depth channels.
/// Each decoder level upsamples (nearest), applies a conv3x3 halving the
/// channels, concatenates the encoder skip in front, then two conv3x3+relu.
/// A final conv3x3 maps to num_labels logit channels.
///
/// Parameter names: enc.<i>.conv{1,2}.{weight,bias}, bottleneck.conv{1,2}.*,
/// dec.<i>.up.*, dec.<i>.conv{1,2}.*, head.*
template <typename T>
class UNetModel {
public:
    UNetModel(UNetConfig config, Rng& rng);

    const UNetConfig& config() const noexcept { return config_; }
    std::span<Parameter<T>> parameters() noexcept { return params_; }
    std::span<const Parameter<T>> parameters() const noexcept { return params_; }
    std::size_t parameter_count() const;
    Parameter<T>* find_parameter(const std::string& name);

    /// Records the forward pass on `graph`. Parameters are bound as trainable leaves.
    Var forward(Graph<T>& graph, Var input);
    /// Inference-only forward; returns (N, K, H, W) logits.
    Tensor<T> forward(const Tensor<T>& batch) const;

    void zero_grad();

private:
    struct Conv {
        std::size_t weight;
        std::size_t bias;
    };
    struct Level {
        Conv conv1, conv2;
    };
    struct UpLevel {
        Conv up, conv1, conv2;
    };

    Conv add_conv(const std::string& prefix, std::size_t cin, std::size_t cout, Rng& rng);
    void check_input(const Shape& shape) const;
    template <typename Bind>
    Var run(Graph<T>& graph, Var input, Bind&& bind) const;

    UNetConfig config_;
    std::vector<Parameter<T>> params_;
    std::vector<Level> encoder_;
    Level bottleneck_{};
    std::vector<UpLevel> decoder_;  // decoder_[i] mirrors encoder_[i]
    Conv head_{};
};

extern template class UNetModel<float>;
extern template class UNetModel<double>;

template <typename T>
UNetModel<T> build_unet(const UNetConfig& config, Rng& rng) {
    return UNetModel<T>(config, rng);
}

struct WeightLoadReport {
    std::vector<std::string> matched;
    /// Checkpoint entries with no parameter of that name.
    std::vector<std::string> unmatched;
    /// Model parameters left at their initialization.
    std::vector<std::string> untouched;
};

/// Copies every checkpoint entry whose name equals a model parameter name.
/// Optimizer moments (".m"/".v") and bookkeeping entries are ignored.
/// Throws ShapeError naming the parameter on a shape conflict; on error the model is unchanged.
template <typename T>
WeightLoadReport load_encoder_weights(UNetModel<T>& model, const Checkpoint& ckpt);

template <typename T>
WeightLoadReport load_encoder_weights(UNetModel<T>& model, const std::filesystem::path& path) {
    return load_encoder_weights(model, read_checkpoint(path));
}

}  // namespace labelaug
