// labelaug: train / eval / generate / render.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "labelaug/config.hpp"
#include "labelaug/errors.hpp"
#include "labelaug/experiment.hpp"
#include "labelaug/metrics.hpp"

namespace fs = std::filesystem;
using namespace labelaug;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

// Config file plus per-key flag overrides shared by train/eval/render.
struct ConfigOptions {
    std::string config_path;
    std::map<std::string, std::string> values;
    bool rotation = false;
    CLI::Option* rotation_opt = nullptr;

    void attach(CLI::App& app) {
        app.add_option("--config", config_path, "experiment config file (INI)")->check(CLI::ExistingFile);
        for (const auto& b : config_flags()) {
            const std::string flag = "--" + std::string(b.flag);
            if (b.flag == "rotation-aug") {
                rotation_opt = app.add_flag(flag, rotation, std::string(b.help));
            } else {
                app.add_option(flag, values[std::string(b.key)], std::string(b.help));
            }
        }
    }

    ExperimentConfig resolve(const CLI::App& app) const {
        ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
        for (const auto& b : config_flags()) {
            const std::string flag = "--" + std::string(b.flag);
            if (app.count(flag) == 0) continue;
            if (b.flag == "rotation-aug") {
                apply_setting(cfg, b.key, rotation ? "true" : "false");
            } else {
                apply_setting(cfg, b.key, values.at(std::string(b.key)));
            }
        }
        return cfg;
    }
};

void print_summary(const EvalReport& r) {
    std::cout << "Mean RMSE " << r.mean_rmse << " px";
    for (std::size_t i = 0; i < kSdrThresholds.size(); ++i) {
        std::cout << "  SDR<" << kSdrThresholds[i] << " " << r.sdr[i] << "%";
    }
    std::cout << "  (" << r.evaluated << " landmarks, " << r.skipped << " skipped)\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Landmark detection with label-dilation curriculum training"};
    app.require_subcommand(1);

    auto* train_cmd = app.add_subcommand("train", "train a U-Net under the dilate-then-erode curriculum");
    ConfigOptions train_cfg;
    train_cfg.attach(*train_cmd);
    bool resume = false;
    train_cmd->add_flag("--resume", resume, "continue from <out>/last.lckp if present");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint (pixel RMSE and SDR)");
    ConfigOptions eval_cfg;
    eval_cfg.attach(*eval_cmd);
    std::string eval_ckpt, eval_csv;
    bool eval_all = false;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--report", eval_csv, "CSV report path (default <out>/eval.csv)");
    eval_cmd->add_flag("--all", eval_all, "evaluate every sample instead of the validation split");

    auto* gen_cmd = app.add_subcommand("generate", "write a synthetic ellipse dataset");
    std::size_t gen_count = 200, gen_labels = 4;
    int gen_size = 64;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    gen_cmd->add_option("--count", gen_count, "number of images");
    gen_cmd->add_option("--size", gen_size, "image side in pixels (>= 32)");
    gen_cmd->add_option("--labels", gen_labels, "landmarks per image (1-8)");
    gen_cmd->add_option("--seed", gen_seed, "random seed");
    gen_cmd->add_option("--out", gen_out, "output directory")->required();

    auto* render_cmd = app.add_subcommand("render", "draw predicted (red) and ground-truth (blue) landmarks");
    ConfigOptions render_cfg;
    render_cfg.attach(*render_cmd);
    std::string render_ckpt, render_sample, render_png;
    int render_scale = 4;
    render_cmd->add_option("--checkpoint", render_ckpt, "checkpoint file")->required();
    render_cmd->add_option("--sample", render_sample, "sample id")->required();
    render_cmd->add_option("--png", render_png, "output PNG path")->required();
    render_cmd->add_option("--scale", render_scale, "integer upscaling factor");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (train_cmd->parsed()) {
            const ExperimentConfig cfg = train_cfg.resolve(*train_cmd);
            TrainOptions opts;
            opts.resume = resume;
            opts.on_epoch = [](const EpochRecord& e) {
                std::cout << "epoch " << e.epoch << " level " << e.level << " loss " << e.loss << " ("
                          << e.seconds << " s)\n";
            };
            const RunRecord run = train(cfg, opts);
            print_summary(run.report);
            std::cout << "outputs in " << cfg.out_dir.string() << '\n';
        } else if (eval_cmd->parsed()) {
            const ExperimentConfig cfg = eval_cfg.resolve(*eval_cmd);
            const EvalReport report = evaluate_checkpoint(cfg, eval_ckpt, eval_all);
            const fs::path csv = eval_csv.empty() ? cfg.out_dir / "eval.csv" : fs::path(eval_csv);
            if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
            write_csv(csv, report);
            print_summary(report);
            std::cout << "report written to " << csv.string() << '\n';
        } else if (gen_cmd->parsed()) {
            const fs::path manifest = generate_dataset(gen_count, gen_size, gen_labels, gen_seed, gen_out);
            std::cout << "wrote " << gen_count << " samples; manifest " << manifest.string() << '\n';
        } else if (render_cmd->parsed()) {
            const ExperimentConfig cfg = render_cfg.resolve(*render_cmd);
            const Overlay overlay = render_checkpoint(cfg, render_ckpt, render_sample, render_scale);
            for (int label : overlay.absent_labels) {
                std::cerr << "label " << label << " has no ground truth in sample '" << render_sample
                          << "'; not drawn\n";
            }
            write_png(render_png, overlay.image);
            std::cout << "overlay written to " << render_png << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    }
    return 0;
}
