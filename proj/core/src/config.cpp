#include "labelaug/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "labelaug/errors.hpp"

namespace labelaug {
namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

template <typename N>
N parse_number(std::string_view key, std::string_view text) {
    const std::string t = trim(text);
    N v{};
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
        throw ConfigError("config: '" + std::string(key) + "' expects a number, got '" + t + "'");
    }
    return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "on" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "off" || t == "no") return false;
    throw ConfigError("config: '" + std::string(key) + "' expects true/false, got '" + t + "'");
}

std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

using Setter = std::function<void(ExperimentConfig&, std::string_view key, std::string_view value)>;

const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table = {
        {"dataset.manifest",
         [](auto& c, auto, auto v) {
             const auto t = trim(v);
             if (t.empty()) {
                 c.dataset.manifest.reset();
             } else {
                 c.dataset.manifest = t;
             }
         }},
        {"dataset.synthetic_count",
         [](auto& c, auto k, auto v) { c.dataset.synthetic_count = parse_number<std::size_t>(k, v); }},
        {"dataset.synthetic_size", [](auto& c, auto k, auto v) { c.dataset.synthetic_size = parse_number<int>(k, v); }},
        {"dataset.synthetic_labels",
         [](auto& c, auto k, auto v) { c.dataset.synthetic_labels = parse_number<std::size_t>(k, v); }},
        {"model.depth", [](auto& c, auto k, auto v) { c.model.depth = parse_number<std::size_t>(k, v); }},
        {"model.base_channels",
         [](auto& c, auto k, auto v) { c.model.base_channels = parse_number<std::size_t>(k, v); }},
        {"model.precision",
         [](auto& c, auto k, auto v) {
             const int bits = parse_number<int>(k, v);
             if (bits != 32 && bits != 64) throw ConfigError("config: model.precision must be 32 or 64");
             c.precision = bits == 32 ? Precision::f32 : Precision::f64;
         }},
        {"schedule.mode",
         [](auto& c, auto, auto v) {
             const auto t = trim(v);
             if (t == "baseline") {
                 c.schedule.initial_dilation = 0;
             } else if (t != "curriculum") {
                 throw ConfigError("config: schedule.mode must be 'curriculum' or 'baseline', got '" + t + "'");
             }
         }},
        {"schedule.dilate", [](auto& c, auto k, auto v) { c.schedule.initial_dilation = parse_number<int>(k, v); }},
        {"schedule.erode_step", [](auto& c, auto k, auto v) { c.schedule.erosion_step = parse_number<int>(k, v); }},
        {"schedule.period", [](auto& c, auto k, auto v) { c.schedule.period = parse_number<int>(k, v); }},
        {"schedule.se", [](auto& c, auto, auto v) { c.schedule.se = parse_structuring_element(trim(v)); }},
        {"schedule.base_weights",
         [](auto& c, auto k, auto v) {
             c.base_weights.clear();
             std::stringstream ss{std::string(v)};
             for (std::string item; std::getline(ss, item, ',');) {
                 if (!trim(item).empty()) c.base_weights.push_back(parse_number<double>(k, item));
             }
         }},
        {"optimizer.lr", [](auto& c, auto k, auto v) { c.optimizer.adam.lr = parse_number<double>(k, v); }},
        {"optimizer.beta1", [](auto& c, auto k, auto v) { c.optimizer.adam.beta1 = parse_number<double>(k, v); }},
        {"optimizer.beta2", [](auto& c, auto k, auto v) { c.optimizer.adam.beta2 = parse_number<double>(k, v); }},
        {"optimizer.eps", [](auto& c, auto k, auto v) { c.optimizer.adam.eps = parse_number<double>(k, v); }},
        {"optimizer.batch_size",
         [](auto& c, auto k, auto v) { c.optimizer.batch_size = parse_number<std::size_t>(k, v); }},
        {"optimizer.epochs", [](auto& c, auto k, auto v) { c.optimizer.epochs = parse_number<int>(k, v); }},
        {"augmentation.rotation", [](auto& c, auto k, auto v) { c.augmentation.rotation = parse_bool(k, v); }},
        {"augmentation.max_deg", [](auto& c, auto k, auto v) { c.augmentation.max_deg = parse_number<double>(k, v); }},
        {"run.seed", [](auto& c, auto k, auto v) { c.seed = parse_number<std::uint64_t>(k, v); }},
        {"run.size", [](auto& c, auto k, auto v) { c.size = parse_number<int>(k, v); }},
        {"run.out", [](auto& c, auto, auto v) { c.out_dir = trim(v); }},
    };
    return table;
}

}  // namespace

void ExperimentConfig::validate() const {
    model.validate();
    schedule.validate();
    if (optimizer.epochs < 1) throw ConfigError("config: optimizer.epochs must be >= 1");
    if (optimizer.batch_size < 1) throw ConfigError("config: optimizer.batch_size must be >= 1");
    if (!(optimizer.adam.lr > 0.0)) throw ConfigError("config: optimizer.lr must be > 0");
    if (!(augmentation.max_deg >= 0.0)) throw ConfigError("config: augmentation.max_deg must be >= 0");
    if (size < 1) throw ConfigError("config: run.size must be >= 1");
    if (size % static_cast<int>(model.required_divisor()) != 0) {
        throw ConfigError("config: run.size " + std::to_string(size) + " is not divisible by 2^depth = " +
                          std::to_string(model.required_divisor()) + "; change run.size or model.depth");
    }
    for (double w : base_weights) {
        if (!(w > 0.0)) throw ConfigError("config: schedule.base_weights must all be > 0");
    }
    if (dataset.manifest) {
        if (!std::filesystem::exists(*dataset.manifest)) {
            throw ConfigError("config: manifest " + dataset.manifest->string() + " does not exist");
        }
    } else {
        if (dataset.synthetic_count < 5) throw ConfigError("config: dataset.synthetic_count must be >= 5");
        if (dataset.synthetic_labels < 1 || dataset.synthetic_labels > 8) {
            throw ConfigError("config: dataset.synthetic_labels must be in [1, 8]");
        }
        if (dataset.synthetic_size < 32) throw ConfigError("config: dataset.synthetic_size must be >= 32");
    }
}

void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value) {
    const auto& table = setters();
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("config: unknown key '" + std::string(key) + "'");
    try {
        it->second(config, key, value);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("config: bad value for '" + std::string(key) + "': " + e.what());
    }
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream is{std::string(text)};
        pt::ini_parser::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    ExperimentConfig c;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("config: key '" + section + "' must be inside a [section]");
        for (const auto& [key, value] : body) apply_setting(c, section + "." + key, value.data());
    }
    if (c.dataset.manifest && c.dataset.manifest->is_relative()) c.dataset.manifest = base_dir / *c.dataset.manifest;
    if (c.out_dir.is_relative() && !base_dir.empty()) c.out_dir = base_dir / c.out_dir;
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

std::string format_config(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "[dataset]\n";
    if (c.dataset.manifest) os << "manifest = " << c.dataset.manifest->generic_string() << '\n';
    os << "synthetic_count = " << c.dataset.synthetic_count << '\n'
       << "synthetic_size = " << c.dataset.synthetic_size << '\n'
       << "synthetic_labels = " << c.dataset.synthetic_labels << "\n\n";
    os << "[model]\n"
       << "depth = " << c.model.depth << '\n'
       << "base_channels = " << c.model.base_channels << '\n'
       << "precision = " << static_cast<std::uint32_t>(c.precision) << "\n\n";
    os << "[schedule]\n"
       << "mode = " << (c.schedule.is_baseline() ? "baseline" : "curriculum") << '\n'
       << "dilate = " << c.schedule.initial_dilation << '\n'
       << "erode_step = " << c.schedule.erosion_step << '\n'
       << "period = " << c.schedule.period << '\n'
       << "se = " << to_string(c.schedule.se) << '\n';
    if (!c.base_weights.empty()) {
        os << "base_weights = ";
        for (std::size_t i = 0; i < c.base_weights.size(); ++i) os << (i ? "," : "") << fmt_double(c.base_weights[i]);
        os << '\n';
    }
    os << "\n[optimizer]\n"
       << "lr = " << fmt_double(c.optimizer.adam.lr) << '\n'
       << "beta1 = " << fmt_double(c.optimizer.adam.beta1) << '\n'
       << "beta2 = " << fmt_double(c.optimizer.adam.beta2) << '\n'
       << "eps = " << fmt_double(c.optimizer.adam.eps) << '\n'
       << "batch_size = " << c.optimizer.batch_size << '\n'
       << "epochs = " << c.optimizer.epochs << "\n\n";
    os << "[augmentation]\n"
       << "rotation = " << (c.augmentation.rotation ? "true" : "false") << '\n'
       << "max_deg = " << fmt_double(c.augmentation.max_deg) << "\n\n";
    os << "[run]\n"
       << "seed = " << c.seed << '\n'
       << "size = " << c.size << '\n'
       << "out = " << c.out_dir.generic_string() << '\n';
    return os.str();
}

const std::vector<FlagBinding>& config_flags() {
    static const std::vector<FlagBinding> flags = {
        {"manifest", "dataset.manifest", "dataset manifest file (omit for synthetic data)"},
        {"synthetic-count", "dataset.synthetic_count", "number of synthetic samples"},
        {"synthetic-size", "dataset.synthetic_size", "side of generated synthetic images"},
        {"labels", "dataset.synthetic_labels", "landmarks per synthetic image (1-8)"},
        {"depth", "model.depth", "U-Net pooling stages"},
        {"base-channels", "model.base_channels", "channels at the top U-Net level"},
        {"precision", "model.precision", "32 or 64 bit reals"},
        {"schedule", "schedule.mode", "curriculum or baseline"},
        {"dilate", "schedule.dilate", "initial dilation iterations (D0)"},
        {"erode-step", "schedule.erode_step", "iterations removed per period (E)"},
        {"period", "schedule.period", "epochs between erosion steps (P)"},
        {"se", "schedule.se", "structuring element: square3 or cross3"},
        {"base-weights", "schedule.base_weights", "comma-separated per-label base weights"},
        {"lr", "optimizer.lr", "Adam learning rate"},
        {"batch-size", "optimizer.batch_size", "mini-batch size"},
        {"epochs", "optimizer.epochs", "training epochs"},
        {"rotation-aug", "augmentation.rotation", "random rotation augmentation (true/false)"},
        {"max-deg", "augmentation.max_deg", "maximum rotation angle in degrees"},
        {"seed", "run.seed", "random seed"},
        {"size", "run.size", "standard image side after resizing"},
        {"out", "run.out", "output directory"},
    };
    return flags;
}

}  // namespace labelaug
