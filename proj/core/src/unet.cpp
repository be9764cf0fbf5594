#include "labelaug/unet.hpp"

#include <algorithm>
#include <cmath>

#include "labelaug/errors.hpp"

namespace labelaug {

void UNetConfig::validate() const {
    if (in_channels == 0) throw ConfigError("unet: in_channels must be >= 1");
    if (num_labels == 0) throw ConfigError("unet: num_labels must be >= 1");
    if (depth == 0) throw ConfigError("unet: depth must be >= 1");
    if (depth > 16) throw ConfigError("unet: depth " + std::to_string(depth) + " is unreasonably large");
    if (base_channels == 0) throw ConfigError("unet: base_channels must be >= 1");
}

std::size_t unet_parameter_count(const UNetConfig& c) {
    c.validate();
    auto conv = [](std::size_t cin, std::size_t cout) { return (cin * 9 + 1) * cout; };
    std::size_t total = 0;
    std::size_t in = c.in_channels;
    for (std::size_t i = 0; i < c.depth; ++i) {
        const std::size_t ch = c.base_channels << i;
        total += conv(in, ch) + conv(ch, ch);
        in = ch;
    }
    const std::size_t bott = c.base_channels << c.depth;
    total += conv(in, bott) + conv(bott, bott);
    for (std::size_t i = 0; i < c.depth; ++i) {
        const std::size_t ch = c.base_channels << i;
        total += conv(2 * ch, ch) + conv(2 * ch, ch) + conv(ch, ch);
    }
    total += conv(c.base_channels, c.num_labels);
    return total;
}

template <typename T>
typename UNetModel<T>::Conv UNetModel<T>::add_conv(const std::string& prefix, std::size_t cin, std::size_t cout,
                                                   Rng& rng) {
    Tensor<T> w({cout, cin, 3, 3});
    const double std_dev = std::sqrt(2.0 / static_cast<double>(cin * 9));
    for (auto& v : w.values()) v = static_cast<T>(rng.normal() * std_dev);
    params_.emplace_back(prefix + ".weight", std::move(w));
    params_.emplace_back(prefix + ".bias", Tensor<T>({cout}));
    return Conv{params_.size() - 2, params_.size() - 1};
}

template <typename T>
UNetModel<T>::UNetModel(UNetConfig config, Rng& rng) : config_(config) {
    config_.validate();
    std::size_t in = config_.in_channels;
    for (std::size_t i = 0; i < config_.depth; ++i) {
        const std::size_t ch = config_.base_channels << i;
        const std::string p = "enc." + std::to_string(i);
        Level lvl;
        lvl.conv1 = add_conv(p + ".conv1", in, ch, rng);
        lvl.conv2 = add_conv(p + ".conv2", ch, ch, rng);
        encoder_.push_back(lvl);
        in = ch;
    }
    const std::size_t bott = config_.base_channels << config_.depth;
    bottleneck_.conv1 = add_conv("bottleneck.conv1", in, bott, rng);
    bottleneck_.conv2 = add_conv("bottleneck.conv2", bott, bott, rng);
    decoder_.resize(config_.depth);
    for (std::size_t i = config_.depth; i-- > 0;) {
        const std::size_t ch = config_.base_channels << i;
        const std::string p = "dec." + std::to_string(i);
        decoder_[i].up = add_conv(p + ".up", 2 * ch, ch, rng);
        decoder_[i].conv1 = add_conv(p + ".conv1", 2 * ch, ch, rng);
        decoder_[i].conv2 = add_conv(p + ".conv2", ch, ch, rng);
    }
    head_ = add_conv("head", config_.base_channels, config_.num_labels, rng);
}

template <typename T>
std::size_t UNetModel<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

template <typename T>
Parameter<T>* UNetModel<T>::find_parameter(const std::string& name) {
    for (auto& p : params_) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

template <typename T>
void UNetModel<T>::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

template <typename T>
void UNetModel<T>::check_input(const Shape& s) const {
    if (s.size() != 4 || s[1] != config_.in_channels) {
        throw ShapeError("unet: expected input (N, " + std::to_string(config_.in_channels) + ", H, W), got " +
                         shape_str(s));
    }
    const std::size_t div = config_.required_divisor();
    if (s[2] % div != 0 || s[3] % div != 0) {
        throw ShapeError("unet: input " + std::to_string(s[2]) + "x" + std::to_string(s[3]) +
                         " must be divisible by 2^depth = " + std::to_string(div) +
                         "; change the standard size or reduce model depth");
    }
}

template <typename T>
template <typename Bind>
Var UNetModel<T>::run(Graph<T>& g, Var x, Bind&& bind) const {
    auto conv = [&](Var in, const Conv& c) { return g.conv2d(in, bind(c.weight), bind(c.bias)); };
    std::vector<Var> skips;
    for (const auto& lvl : encoder_) {
        x = g.relu(conv(x, lvl.conv1));
        x = g.relu(conv(x, lvl.conv2));
        skips.push_back(x);
        x = g.maxpool2(x);
    }
    x = g.relu(conv(x, bottleneck_.conv1));
    x = g.relu(conv(x, bottleneck_.conv2));
    for (std::size_t i = decoder_.size(); i-- > 0;) {
        const auto& lvl = decoder_[i];
        x = conv(g.upsample2(x), lvl.up);
        x = g.concat_channels(skips[i], x);
        x = g.relu(conv(x, lvl.conv1));
        x = g.relu(conv(x, lvl.conv2));
    }
    return conv(x, head_);
}

template <typename T>
Var UNetModel<T>::forward(Graph<T>& graph, Var input) {
    check_input(graph.value(input).shape());
    std::vector<Var> bound(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) bound[i] = graph.parameter(params_[i]);
    return run(graph, input, [&](std::size_t idx) { return bound[idx]; });
}

template <typename T>
Tensor<T> UNetModel<T>::forward(const Tensor<T>& batch) const {
    check_input(batch.shape());
    Graph<T> g;
    std::vector<Var> bound(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) bound[i] = g.constant(params_[i].value);
    Var out = run(g, g.constant(batch), [&](std::size_t idx) { return bound[idx]; });
    return g.value(out);
}

template <typename T>
WeightLoadReport load_encoder_weights(UNetModel<T>& model, const Checkpoint& ckpt) {
    WeightLoadReport report;
    std::vector<std::pair<Parameter<T>*, const CheckpointEntry*>> plan;
    for (const auto& e : ckpt.entries) {
        const bool moment = e.name.ends_with(".m") || e.name.ends_with(".v");
        if (moment || e.name.starts_with("adam.") || e.name.starts_with("train.")) continue;
        Parameter<T>* p = model.find_parameter(e.name);
        if (p == nullptr) {
            report.unmatched.push_back(e.name);
            continue;
        }
        if (p->value.shape() != e.shape) {
            throw ShapeError("load_encoder_weights: '" + e.name + "' has shape " + shape_str(e.shape) +
                             " in the checkpoint but " + shape_str(p->value.shape()) + " in the model");
        }
        plan.emplace_back(p, &e);
        report.matched.push_back(e.name);
    }
    for (auto [p, e] : plan) {
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] = static_cast<T>(e->values[i]);
    }
    for (const auto& p : model.parameters()) {
        if (std::find(report.matched.begin(), report.matched.end(), p.name) == report.matched.end()) {
            report.untouched.push_back(p.name);
        }
    }
    return report;
}

template class UNetModel<float>;
template class UNetModel<double>;
template WeightLoadReport load_encoder_weights<float>(UNetModel<float>&, const Checkpoint&);
template WeightLoadReport load_encoder_weights<double>(UNetModel<double>&, const Checkpoint&);

}  // namespace labelaug
