#include "labelaug/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>

#include "labelaug/adam.hpp"
#include "labelaug/checkpoint.hpp"
#include "labelaug/curriculum.hpp"
#include "labelaug/errors.hpp"
#include "labelaug/graph.hpp"
#include "labelaug/synthetic.hpp"

namespace labelaug {
namespace {

namespace fs = std::filesystem;

// Stream tags for Rng::derive; each consumer of the run seed gets its own stream.
constexpr std::uint64_t kSynthStream = 1;
constexpr std::uint64_t kInitStream = 2;
constexpr std::uint64_t kBatchStream = 3;
constexpr std::uint64_t kRotateStream = 4;

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::optional<PointLabel> truth_for(const ProcessedSample& s, int label) {
    for (const auto& p : s.points) {
        if (p.label_id == label) return p;
    }
    return std::nullopt;
}

template <typename T>
Tensor<T> stack_images(std::span<const ProcessedSample* const> batch) {
    const std::size_t size = static_cast<std::size_t>(batch.front()->size());
    Tensor<T> x({batch.size(), 1, size, size});
    for (std::size_t n = 0; n < batch.size(); ++n) {
        const auto& img = batch[n]->image;
        std::transform(img.data(), img.data() + img.size(), x.data() + n * size * size,
                       [](double v) { return static_cast<T>(v); });
    }
    return x;
}

std::vector<double> resolve_base_weights(const ExperimentConfig& config, std::size_t k) {
    if (config.base_weights.empty()) return std::vector<double>(k, 1.0);
    if (config.base_weights.size() != k) {
        throw ConfigError("config: schedule.base_weights has " + std::to_string(config.base_weights.size()) +
                          " entries but the dataset has " + std::to_string(k) + " labels");
    }
    return config.base_weights;
}

UNetConfig model_config(const ExperimentConfig& config, std::size_t k) {
    UNetConfig mc = config.model;
    mc.num_labels = k;
    return mc;
}

fs::path level_checkpoint_name(int level, int last_epoch) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "level_%02d_epoch_%04d.lckp", level, last_epoch);
    return buf;
}

template <typename T>
Checkpoint training_checkpoint(const UNetModel<T>& model, const Adam<T>& adam, int next_epoch) {
    Checkpoint ckpt = make_checkpoint<T>(model.parameters(), &adam);
    ckpt.add_scalar("train.next_epoch", next_epoch);
    return ckpt;
}

template <typename T>
RunRecord train_impl(const ExperimentConfig& config, const TrainOptions& options) {
    const PreparedData data = prepare_data(config);
    const std::size_t k = data.num_labels();
    const std::vector<double> base_weights = resolve_base_weights(config, k);
    const int size = config.size;

    Rng init_rng = Rng::derive(config.seed, {kInitStream});
    UNetModel<T> model(model_config(config, k), init_rng);
    Adam<T> adam(config.optimizer.adam);
    const std::vector<ProcessedSample> train_set = data.subset(data.split.train);
    const std::vector<ProcessedSample> val_set = data.subset(data.split.validation);

    RunRecord record;
    const fs::path out = config.out_dir;
    int start_epoch = 0;
    std::ofstream run_csv;
    if (options.write_outputs) {
        fs::create_directories(out);
        const fs::path last = out / "last.lckp";
        const bool resuming = options.resume && fs::exists(last);
        if (resuming) {
            const Checkpoint ckpt = read_checkpoint(last);
            restore_checkpoint<T>(ckpt, model.parameters(), &adam);
            start_epoch = static_cast<int>(ckpt.scalar("train.next_epoch").value_or(0.0));
        }
        std::ofstream(out / "config.ini", std::ios::trunc) << format_config(config);
        run_csv.open(out / "run.csv", resuming ? std::ios::app : std::ios::trunc);
        if (!run_csv) throw DataError("cannot write " + (out / "run.csv").string());
        if (!resuming) {
            run_csv << "epoch,level,loss";
            for (std::size_t c = 0; c < k; ++c) run_csv << ",w_" << c;
            run_csv << ",seconds\n";
        }
    }

    const std::size_t batch_size = config.optimizer.batch_size;
    const std::size_t hw = static_cast<std::size_t>(size) * static_cast<std::size_t>(size);
    std::optional<int> cached_level;
    std::vector<LabelTargets> cached_targets;

    for (int epoch = start_epoch; epoch < config.optimizer.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const int level = dilation_level(config.schedule, epoch);
        if (options.write_outputs && epoch > 0) {
            const int prev = dilation_level(config.schedule, epoch - 1);
            if (prev != level) {
                const fs::path p = out / level_checkpoint_name(prev, epoch - 1);
                if (!fs::exists(p)) {
                    write_checkpoint(p, training_checkpoint(model, adam, epoch));
                    record.checkpoints.push_back(p);
                }
            }
        }

        // Targets depend on the level only, unless points move under augmentation.
        if (!config.augmentation.rotation && cached_level != level) {
            cached_targets.clear();
            for (const auto& s : train_set) {
                cached_targets.push_back(make_targets(s.points, level, size, size, config.schedule.se, base_weights));
            }
            cached_level = level;
        }

        std::vector<std::size_t> order(train_set.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng batch_rng = Rng::derive(config.seed, {kBatchStream, static_cast<std::uint64_t>(epoch)});
        batch_rng.shuffle(order.begin(), order.end());

        double loss_sum = 0.0;
        std::vector<double> weight_sum(k, 0.0);
        std::vector<std::size_t> weight_count(k, 0);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t n = std::min(batch_size, order.size() - start);
            std::vector<ProcessedSample> rotated;
            std::vector<LabelTargets> fresh;
            std::vector<const ProcessedSample*> batch;
            std::vector<const LabelTargets*> targets;
            if (config.augmentation.rotation) {
                rotated.reserve(n);
                fresh.reserve(n);
            }
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t idx = order[start + i];
                if (config.augmentation.rotation) {
                    Rng rot = Rng::derive(config.seed, {kRotateStream, static_cast<std::uint64_t>(epoch), idx});
                    rotated.push_back(rotate_augment(train_set[idx], rot, config.augmentation.max_deg));
                    fresh.push_back(make_targets(rotated.back().points, level, size, size, config.schedule.se,
                                                 base_weights));
                    batch.push_back(&rotated.back());
                    targets.push_back(&fresh.back());
                } else {
                    batch.push_back(&train_set[idx]);
                    targets.push_back(&cached_targets[idx]);
                }
            }

            Tensor<T> y({n, k, static_cast<std::size_t>(size), static_cast<std::size_t>(size)});
            BceWeights<T> w{Tensor<T>({n, k}), Tensor<T>({n, k})};
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t c = 0; c < k; ++c) {
                    const auto bits = targets[i]->channels[c].bits();
                    T* dst = y.data() + (i * k + c) * hw;
                    for (std::size_t p = 0; p < hw; ++p) dst[p] = bits[p] ? T(1) : T(0);
                    if (targets[i]->present[c]) {
                        w.pos_weight[i * k + c] = static_cast<T>(targets[i]->weights[c]);
                        w.channel_mask[i * k + c] = T(1);
                        weight_sum[c] += targets[i]->weights[c];
                        ++weight_count[c];
                    }
                }
            }

            Graph<T> g;
            Var logits = model.forward(g, g.constant(stack_images<T>(batch)));
            Var loss = g.weighted_bce_with_logits(logits, y, w);
            const double lv = static_cast<double>(g.value(loss)[0]);
            if (!std::isfinite(lv)) {
                throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
            }
            g.backward(loss);
            adam.step(model.parameters());
            loss_sum += lv * static_cast<double>(n);
        }

        EpochRecord er;
        er.epoch = epoch;
        er.level = level;
        er.loss = loss_sum / static_cast<double>(train_set.size());
        for (std::size_t c = 0; c < k; ++c) {
            er.weights.push_back(weight_count[c] ? weight_sum[c] / static_cast<double>(weight_count[c]) : 0.0);
        }
        er.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (options.write_outputs) {
            run_csv << er.epoch << ',' << er.level << ',' << fmt6(er.loss);
            for (double wv : er.weights) run_csv << ',' << fmt6(wv);
            run_csv << ',' << fmt6(er.seconds) << '\n';
            run_csv.flush();
            write_checkpoint(out / "last.lckp", training_checkpoint(model, adam, epoch + 1));
        }
        if (options.on_epoch) options.on_epoch(er);
        record.epochs.push_back(std::move(er));
    }

    record.report = evaluate<T>(model, val_set, batch_size);
    if (options.write_outputs) {
        const fs::path final_path = out / "final.lckp";
        write_checkpoint(final_path, training_checkpoint(model, adam, config.optimizer.epochs));
        record.checkpoints.push_back(final_path);
        write_csv(out / "eval.csv", record.report);
    }
    return record;
}

template <typename T>
UNetModel<T> load_model(const ExperimentConfig& config, std::size_t k, const fs::path& checkpoint) {
    const Checkpoint ckpt = read_checkpoint(checkpoint);
    if (const auto* head = ckpt.find("head.bias"); head != nullptr && head->shape != Shape{k}) {
        throw DataError("checkpoint " + checkpoint.string() + " predicts " +
                        std::to_string(head->shape.empty() ? 0 : head->shape[0]) + " labels but the dataset has " +
                        std::to_string(k));
    }
    Rng rng(config.seed);
    UNetModel<T> model(model_config(config, k), rng);
    restore_checkpoint<T>(ckpt, model.parameters());
    return model;
}

template <typename T>
std::vector<PredictedLandmark> predict_one(const UNetModel<T>& model, const ProcessedSample& s) {
    const ProcessedSample* one[] = {&s};
    const Tensor<T> logits = model.forward(stack_images<T>(one));
    const int size = s.size();
    const std::size_t hw = static_cast<std::size_t>(size) * static_cast<std::size_t>(size);
    std::vector<PredictedLandmark> out;
    for (std::size_t c = 0; c < logits.dim(1); ++c) {
        out.push_back(extract_landmark<T>(std::span<const T>(logits.data() + c * hw, hw), size, size, static_cast<int>(c)));
    }
    return out;
}

void draw_cross(RgbImage& img, int cy, int cx, int arm, Rgb color) {
    for (int d = -arm; d <= arm; ++d) {
        if (cy >= 0 && cy < img.height && cx + d >= 0 && cx + d < img.width) img.at(cy, cx + d) = color;
        if (cx >= 0 && cx < img.width && cy + d >= 0 && cy + d < img.height) img.at(cy + d, cx) = color;
    }
}

}  // namespace

std::vector<ProcessedSample> PreparedData::subset(std::span<const std::size_t> indices) const {
    std::vector<ProcessedSample> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(samples.at(i));
    return out;
}

PreparedData prepare_data(const ExperimentConfig& config) {
    PreparedData data;
    std::vector<RawSample> raw;
    if (config.dataset.manifest) {
        const DatasetManifest m = read_manifest(*config.dataset.manifest);
        raw = load_dataset(m);
        data.label_names = m.label_names;
    } else {
        Rng rng = Rng::derive(config.seed, {kSynthStream});
        raw = generate_synthetic(config.dataset.synthetic_count, config.dataset.synthetic_size,
                                 config.dataset.synthetic_labels, rng);
        for (std::size_t c = 0; c < config.dataset.synthetic_labels; ++c) {
            data.label_names.emplace_back(kSyntheticLabelNames[c]);
        }
    }
    data.samples.reserve(raw.size());
    for (const auto& r : raw) data.samples.push_back(preprocess(r, config.size));
    data.split = split_indices(data.samples.size(), config.seed);
    return data;
}

RunRecord train(const ExperimentConfig& config, const TrainOptions& options) {
    config.validate();
    return config.precision == Precision::f32 ? train_impl<float>(config, options)
                                              : train_impl<double>(config, options);
}

template <typename T>
EvalReport evaluate(const UNetModel<T>& model, std::span<const ProcessedSample> samples, std::size_t batch_size) {
    if (samples.empty()) throw std::invalid_argument("evaluate: empty evaluation set");
    const std::size_t k = model.config().num_labels;
    std::vector<LandmarkResult> rows;
    batch_size = std::max<std::size_t>(batch_size, 1);
    for (std::size_t start = 0; start < samples.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, samples.size() - start);
        std::vector<const ProcessedSample*> batch;
        for (std::size_t i = 0; i < n; ++i) batch.push_back(&samples[start + i]);
        const Tensor<T> logits = model.forward(stack_images<T>(batch));
        const int h = static_cast<int>(logits.dim(2)), w = static_cast<int>(logits.dim(3));
        const std::size_t hw = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < k; ++c) {
                LandmarkResult row;
                row.sample_id = batch[i]->id;
                row.label_id = static_cast<int>(c);
                row.prediction = extract_landmark<T>(std::span<const T>(logits.data() + (i * k + c) * hw, hw), h, w,
                                                     static_cast<int>(c));
                row.truth = truth_for(*batch[i], static_cast<int>(c));
                row.mm_per_pixel = batch[i]->mm_per_pixel;
                rows.push_back(std::move(row));
            }
        }
    }
    return aggregate(std::move(rows), k);
}

EvalReport evaluate_checkpoint(const ExperimentConfig& config, const fs::path& checkpoint, bool all_samples) {
    config.validate();
    const PreparedData data = prepare_data(config);
    const std::vector<ProcessedSample> set =
        all_samples ? data.samples : data.subset(data.split.validation);
    if (set.empty()) throw std::invalid_argument("evaluate: empty evaluation set");
    if (config.precision == Precision::f32) {
        return evaluate<float>(load_model<float>(config, data.num_labels(), checkpoint), set,
                               config.optimizer.batch_size);
    }
    return evaluate<double>(load_model<double>(config, data.num_labels(), checkpoint), set,
                            config.optimizer.batch_size);
}

fs::path generate_dataset(std::size_t count, int size, std::size_t num_labels, std::uint64_t seed,
                          const fs::path& outdir) {
    Rng rng = Rng::derive(seed, {kSynthStream});
    const auto samples = generate_synthetic(count, size, num_labels, rng);
    try {
        fs::create_directories(outdir / "images");
    } catch (const fs::filesystem_error& e) {
        throw DataError(std::string("cannot create output directory: ") + e.what());
    }
    DatasetManifest manifest;
    manifest.root = outdir;
    for (std::size_t c = 0; c < num_labels; ++c) manifest.label_names.emplace_back(kSyntheticLabelNames[c]);
    std::ofstream ann(outdir / "annotations.jsonl", std::ios::binary | std::ios::trunc);
    if (!ann) throw DataError("cannot write " + (outdir / "annotations.jsonl").string());
    for (const auto& s : samples) {
        const fs::path rel = fs::path("images") / (s.id + ".png");
        write_png(outdir / rel, s.image);
        ann << format_annotation({s.id, s.points, s.mm_per_pixel}) << '\n';
        manifest.entries.push_back({rel, "annotations.jsonl"});
    }
    ann.close();
    const fs::path mpath = outdir / "manifest.txt";
    write_manifest(mpath, manifest);
    return mpath;
}

Overlay render_overlay(const ProcessedSample& sample, std::span<const PredictedLandmark> predictions,
                       std::size_t num_labels, int scale) {
    if (scale < 1) throw std::invalid_argument("render_overlay: scale must be >= 1");
    const int size = sample.size();
    Overlay out;
    out.image = RgbImage(size * scale, size * scale);
    for (int r = 0; r < size * scale; ++r) {
        for (int c = 0; c < size * scale; ++c) {
            const double v = sample.image[static_cast<std::size_t>(r / scale) * size + c / scale];
            const auto g = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
            out.image.at(r, c) = Rgb{g, g, g};
        }
    }
    const int arm = 2 * scale;
    auto centre = [&](int v) { return v * scale + scale / 2; };
    std::vector<bool> present(num_labels, false);
    for (std::size_t c = 0; c < num_labels; ++c) {
        if (auto t = truth_for(sample, static_cast<int>(c))) {
            present[c] = true;
            draw_cross(out.image, centre(t->row), centre(t->col), arm, kTruthColor);
        } else {
            out.absent_labels.push_back(static_cast<int>(c));
        }
    }
    for (const auto& p : predictions) {
        if (p.label_id < 0 || static_cast<std::size_t>(p.label_id) >= num_labels || !present[p.label_id]) continue;
        draw_cross(out.image, centre(p.row), centre(p.col), arm, kPredictionColor);
    }
    return out;
}

Overlay render_checkpoint(const ExperimentConfig& config, const fs::path& checkpoint, const std::string& sample_id,
                          int scale) {
    config.validate();
    if (!fs::exists(checkpoint)) throw DataError("checkpoint " + checkpoint.string() + " does not exist");
    const PreparedData data = prepare_data(config);
    auto it = std::find_if(data.samples.begin(), data.samples.end(),
                           [&](const ProcessedSample& s) { return s.id == sample_id; });
    if (it == data.samples.end()) throw DataError("no sample with id '" + sample_id + "'");
    std::vector<PredictedLandmark> preds =
        config.precision == Precision::f32
            ? predict_one<float>(load_model<float>(config, data.num_labels(), checkpoint), *it)
            : predict_one<double>(load_model<double>(config, data.num_labels(), checkpoint), *it);
    return render_overlay(*it, preds, data.num_labels(), scale);
}

template EvalReport evaluate<float>(const UNetModel<float>&, std::span<const ProcessedSample>, std::size_t);
template EvalReport evaluate<double>(const UNetModel<double>&, std::span<const ProcessedSample>, std::size_t);

}  // namespace labelaug
