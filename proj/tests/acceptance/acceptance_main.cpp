// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "labelaug/curriculum.hpp"
#include "labelaug/dataset.hpp"
#include "labelaug/experiment.hpp"
#include "labelaug/metrics.hpp"
#include "labelaug/morphology.hpp"
#include "oracles.hpp"

using namespace labelaug;
using namespace labelaug::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

// ---------------------------------------------------------------------------
// 1. finite-difference gradient suite

struct OpCase {
    std::string name;
    std::function<std::vector<Tensor<double>>(Rng&)> make;
    OpBuilder build;
};

Outcome gradient_suite() {
    constexpr int kInstances = 20;
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng = Rng::derive(2024, {1});

    // bce targets/weights are drawn per instance and captured by the builder
    Tensor<double> bce_y;
    BceWeights<double> bce_w;

    std::vector<OpCase> ops;
    ops.push_back({"conv2d",
                   [](Rng& r) {
                       const auto n = pick(r, 1, 2), ci = pick(r, 1, 3), co = pick(r, 1, 3);
                       const auto h = pick(r, 1, 6), w = pick(r, 1, 6);
                       return std::vector{random_tensor({n, ci, h, w}, r), random_tensor({co, ci, 3, 3}, r),
                                          random_tensor({co}, r)};
                   },
                   [](Graph<double>& g, std::span<const Var> v) { return g.conv2d(v[0], v[1], v[2]); }});
    ops.push_back({"relu",
                   [](Rng& r) {
                       return std::vector{random_tensor({pick(r, 1, 2), pick(r, 1, 3), pick(r, 1, 5), pick(r, 1, 5)}, r)};
                   },
                   [](Graph<double>& g, std::span<const Var> v) { return g.relu(v[0]); }});
    ops.push_back({"maxpool2",
                   [](Rng& r) {
                       return std::vector{
                           random_tensor({pick(r, 1, 2), pick(r, 1, 3), 2 * pick(r, 1, 3), 2 * pick(r, 1, 3)}, r)};
                   },
                   [](Graph<double>& g, std::span<const Var> v) { return g.maxpool2(v[0]); }});
    ops.push_back({"upsample2",
                   [](Rng& r) {
                       return std::vector{random_tensor({pick(r, 1, 2), pick(r, 1, 3), pick(r, 1, 4), pick(r, 1, 4)}, r)};
                   },
                   [](Graph<double>& g, std::span<const Var> v) { return g.upsample2(v[0]); }});
    ops.push_back({"concat_channels",
                   [](Rng& r) {
                       const auto n = pick(r, 1, 2), h = pick(r, 1, 4), w = pick(r, 1, 4);
                       return std::vector{random_tensor({n, pick(r, 1, 3), h, w}, r),
                                          random_tensor({n, pick(r, 1, 3), h, w}, r)};
                   },
                   [](Graph<double>& g, std::span<const Var> v) { return g.concat_channels(v[0], v[1]); }});
    ops.push_back({"weighted_bce",
                   [&](Rng& r) {
                       const auto n = pick(r, 1, 2), k = pick(r, 1, 3), h = pick(r, 1, 5), w = pick(r, 1, 5);
                       bce_y = Tensor<double>({n, k, h, w});
                       for (auto& v : bce_y.values()) v = r.uniform01() < 0.3 ? 1.0 : 0.0;
                       bce_w = BceWeights<double>{Tensor<double>({n, k}), Tensor<double>({n, k}, 1.0)};
                       for (auto& v : bce_w.pos_weight.values()) v = r.uniform(0.5, 50.0);
                       if (n * k > 1 && r.uniform01() < 0.5) {
                           const auto off = r.below(n * k);
                           bce_w.channel_mask[off] = 0.0;
                           bce_w.pos_weight[off] = 0.0;
                       }
                       return std::vector{random_tensor({n, k, h, w}, r, 3.0)};
                   },
                   [&](Graph<double>& g, std::span<const Var> v) {
                       return g.weighted_bce_with_logits(v[0], bce_y, bce_w);
                   }});

    Outcome out;
    std::string summary;
    for (const auto& op : ops) {
        double worst = 0.0;
        int accepted = 0, rejected = 0;
        while (accepted < kInstances) {
            const auto r = check_op(op.make(rng), op.build, rng);
            if (r.margin < kKinkMargin) {
                ++rejected;
                continue;
            }
            worst = std::max(worst, r.grad.max_rel_err);
            ++accepted;
        }
        out.require(worst < 1e-6, op.name + fmt(" max rel err %.2e >= 1e-6", worst));
        summary += op.name + fmt(" %.1e", worst) + (rejected ? fmt(" (%d redrawn)", rejected) : "") + ", ";
    }

    double worst = 0.0;
    int accepted = 0, rejected = 0;
    while (accepted < kInstances) {
        const auto r = check_unet(UNetConfig{1, 2, 1, 4}, 1, 8, rng);
        if (r.margin < kKinkMargin) {
            ++rejected;
            continue;
        }
        worst = std::max(worst, r.grad.max_rel_err);
        ++accepted;
    }
    out.require(worst < 1e-5, fmt("end-to-end max rel err %.2e >= 1e-5", worst));
    const double secs = seconds_since(t0);
    out.require(secs < 60.0, fmt("took %.1f s", secs));
    summary += fmt("unet depth 1 8x8 %.1e", worst) + (rejected ? fmt(" (%d redrawn)", rejected) : "");
    out.detail = summary + fmt("; %d instances each, %.1f s", kInstances, secs) +
                 (out.detail.empty() ? "" : "; " + out.detail);
    return out;
}

// ---------------------------------------------------------------------------
// 2. morphology against the iterated set definition

Outcome morphology_oracle() {
    Rng rng = Rng::derive(2024, {2});
    Outcome out;
    int mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
        const int h = static_cast<int>(pick(rng, 1, 16)), w = static_cast<int>(pick(rng, 1, 16));
        const auto m = random_mask(h, w, rng.uniform(0.0, 1.0), rng);
        const int n = static_cast<int>(rng.below(9));
        for (auto se : {StructuringElement::square3, StructuringElement::cross3}) {
            if (!(dilate(m, n, se) == brute_dilate(m, n, se))) ++mismatches;
            if (!(erode(m, n, se) == brute_erode(m, n, se))) ++mismatches;
        }
    }
    out.require(mismatches == 0, fmt("%d mismatching masks", mismatches));
    for (int n = 0; n <= 5; ++n) {
        BinaryMask p(16, 16);
        p.set(8, 8);
        const auto sq = count_true(dilate(p, n, StructuringElement::square3));
        const auto cr = count_true(dilate(p, n, StructuringElement::cross3));
        out.require(sq == std::size_t((2 * n + 1) * (2 * n + 1)), fmt("square3 count %zu at n=%d", sq, n));
        out.require(cr == std::size_t(2 * n * n + 2 * n + 1), fmt("cross3 count %zu at n=%d", cr, n));
    }
    if (out.pass) out.detail = "1000 random masks up to 16x16, 0-8 iterations, both elements; point counts n<=5";
    return out;
}

// ---------------------------------------------------------------------------
// 3. dynamic re-weighting

Outcome reweight_exactness() {
    Outcome out;
    const std::vector<double> one{1.0}, two{2.0};
    out.require(reweight(one, 100, std::vector<std::size_t>{0}, std::vector<std::size_t>{1})[0] == 99.0, "w=1,S=100");
    out.require(reweight(two, 1000, std::vector<std::size_t>{499}, std::vector<std::size_t>{1})[0] == 2.0,
                "half-image foreground");
    BinaryMask p(512, 512);
    p.set(256, 256);
    const std::size_t fg = count_true(brute_dilate(p, 2, StructuringElement::square3));
    const double big = reweight(one, 512 * 512, std::vector<std::size_t>{fg - 1}, std::vector<std::size_t>{1})[0];
    out.require(fg == 25 && std::abs(big - 10484.76) < 1e-9, fmt("512x512 two iterations gave %.6f", big));

    Rng rng = Rng::derive(2024, {3});
    std::uint64_t worst = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t k = pick(rng, 1, 8);
        const std::size_t s = pick(rng, 1, 512) * pick(rng, 1, 512);
        std::vector<double> w(k);
        std::vector<std::size_t> d(k), l(k);
        for (std::size_t i = 0; i < k; ++i) {
            w[i] = rng.uniform(0.01, 10.0);
            const std::size_t a = pick(rng, 1, s);
            l[i] = pick(rng, 1, std::min<std::size_t>(a, 8));
            d[i] = a - l[i];
        }
        const auto wt = reweight(w, s, d, l);
        for (std::size_t i = 0; i < k; ++i) {
            const double a = static_cast<double>(d[i] + l[i]);
            worst = std::max(worst, ulp_distance(wt[i] * a, w[i] * (static_cast<double>(s) - a)));
        }
    }
    out.require(worst <= 1, fmt("identity off by %llu ulp", static_cast<unsigned long long>(worst)));
    if (out.pass) out.detail = fmt("examples exact; identity within %llu ulp over 1000 inputs", (unsigned long long)worst);
    return out;
}

// ---------------------------------------------------------------------------
// 4. schedule trace

Outcome schedule_trace() {
    Outcome out;
    const CurriculumSchedule s;
    int bad = 0;
    for (int e = 0; e < 1000; ++e) {
        const int expect = e >= 350 ? 0 : 65 - 10 * (e / 50);
        if (dilation_level(s, e) != expect) ++bad;
    }
    out.require(bad == 0, fmt("%d epochs off the expected trace", bad));
    out.require(dilation_level(s, 0) == 65 && dilation_level(s, 49) == 65 && dilation_level(s, 50) == 55 &&
                    dilation_level(s, 99) == 55 && dilation_level(s, 349) == 5 && dilation_level(s, 350) == 0,
                "spot values");
    if (out.pass) out.detail = "65 for epochs 0-49, minus 10 per 50 epochs, 0 from epoch 350 (checked to 999)";
    return out;
}

// ---------------------------------------------------------------------------
// 5. metrics

Outcome metrics_suite() {
    Outcome out;
    auto near = [](double a, double b) { return std::abs(a - b) <= 1e-6; };
    {
        std::vector<double> ch(10 * 10, 0.0);
        ch[3 * 10 + 7] = 1.0;
        const auto p = extract_landmark<double>(ch, 10, 10);
        out.require(p.row == 3 && p.col == 7, "unique max");
        const std::vector<double> flat(25, 0.5);
        const auto q = extract_landmark<double>(flat, 5, 5);
        out.require(q.row == 0 && q.col == 0, "all-equal tie");
        std::vector<double> two(16, 0.0);
        two[1 * 4 + 2] = two[2 * 4 + 1] = 2.0;
        const auto r = extract_landmark<double>(two, 4, 4);
        out.require(r.row == 1 && r.col == 2, "row-major tie");
    }
    out.require(distance({0, 0, 0, 0}, {0, 3, 4}) == 5.0, "distance 5");
    out.require(distance({0, 4, 4, 0}, {0, 4, 4}) == 0.0, "distance 0");
    out.require(distance({0, 2, 2, 0}, {0, 2, 5}) == 3.0, "distance 3");
    bool threw = false;
    try {
        distance({1, 0, 0, 0}, {0, 0, 0});
    } catch (const std::invalid_argument&) {
        threw = true;
    }
    out.require(threw, "label mismatch accepted");
    out.require(near(rmse(std::vector<double>{3, 4}), 3.535534), "rmse [3,4]");
    out.require(near(rmse(std::vector<double>{5}), 5.0), "rmse [5]");
    out.require(near(rmse(std::vector<double>{0, 0, 0}), 0.0), "rmse zeros");
    out.require(near(sdr(std::vector<double>{1, 3, 5, 7}, 4), 50.0), "sdr 50");
    out.require(near(sdr(std::vector<double>{2, 2}, 2), 0.0), "sdr strict");
    out.require(near(sdr(std::vector<double>{1.9}, 2), 100.0), "sdr 100");
    out.require(near(mm_rmse(std::vector<double>{3, 4}, 0.5), 1.767767), "mm rmse");
    out.require(near(mm_rmse(std::vector<double>{3, 4}, 1.0), rmse(std::vector<double>{3, 4})), "mm spacing 1");
    out.require(near(mm_rmse(std::vector<double>{0}, 0.3), 0.0), "mm zero");
    if (out.pass) out.detail = "argmax/tie, distance, rmse, strict sdr and mm examples";
    return out;
}

// ---------------------------------------------------------------------------
// 6 and 7. synthetic benchmark and determinism

ExperimentConfig benchmark_config(const fs::path& out) {
    ExperimentConfig c;
    c.dataset.synthetic_count = 200;
    c.dataset.synthetic_size = 64;
    c.dataset.synthetic_labels = 4;
    c.size = 64;
    c.model.depth = 3;
    c.model.base_channels = 8;
    c.schedule = CurriculumSchedule{16, 4, 10, StructuringElement::square3};
    c.optimizer.epochs = 50;
    c.optimizer.batch_size = 8;
    c.seed = 0;
    c.out_dir = out;
    return c;
}

// Standard error of a pooled RMSE through the delta method on mean(d^2).
double rmse_standard_error(const EvalReport& r) {
    const auto d = evaluated_distances(r);
    const double n = static_cast<double>(d.size());
    double mean = 0.0;
    for (double v : d) mean += v * v;
    mean /= n;
    double var = 0.0;
    for (double v : d) var += (v * v - mean) * (v * v - mean);
    var /= n - 1.0;
    return r.mean_rmse > 0.0 ? std::sqrt(var / n) / (2.0 * r.mean_rmse) : 0.0;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

struct BenchmarkRuns {
    RunRecord curriculum, baseline, rotation, repeat;
    fs::path curriculum_dir, repeat_dir;
    double seconds = 0.0;
};

BenchmarkRuns run_benchmark(const fs::path& root) {
    BenchmarkRuns b;
    const auto t0 = std::chrono::steady_clock::now();
    auto log = [](const char* arm) {
        return [arm](const EpochRecord& e) {
            if (e.epoch % 10 == 9) {
                std::fprintf(stderr, "  %s epoch %d level %d loss %.5f\n", arm, e.epoch + 1, e.level, e.loss);
            }
        };
    };
    TrainOptions opts;

    auto cur = benchmark_config(root / "curriculum");
    opts.on_epoch = log("curriculum");
    b.curriculum = train(cur, opts);
    b.curriculum_dir = cur.out_dir;
    b.seconds = seconds_since(t0);

    auto base = benchmark_config(root / "baseline");
    apply_setting(base, "schedule.mode", "baseline");
    opts.on_epoch = log("baseline");
    b.baseline = train(base, opts);

    auto rot = benchmark_config(root / "rotation");
    rot.augmentation.rotation = true;
    rot.augmentation.max_deg = 20.0;
    opts.on_epoch = log("rotation");
    b.rotation = train(rot, opts);
    b.seconds = seconds_since(t0);

    auto again = benchmark_config(root / "curriculum_repeat");
    opts.on_epoch = log("repeat");
    b.repeat = train(again, opts);
    b.repeat_dir = again.out_dir;
    return b;
}

Outcome synthetic_benchmark(const BenchmarkRuns& b) {
    Outcome out;
    const double cur = b.curriculum.report.mean_rmse;
    const double base = b.baseline.report.mean_rmse;
    const double rot = b.rotation.report.mean_rmse;
    const double se = std::hypot(rmse_standard_error(b.curriculum.report), rmse_standard_error(b.rotation.report));
    out.require(cur <= 5.0, fmt("(a) curriculum RMSE %.3f px > 5", cur));
    out.require(base >= 3.0 * cur, fmt("(b) baseline RMSE %.3f px < 3 x curriculum %.3f px (ratio %.2f)", base, cur,
                                       cur > 0 ? base / cur : 0.0));
    out.require(cur - rot <= 2.0 * se,
                fmt("(c) rotation arm %.3f px beats curriculum %.3f px by more than 2 SE (%.3f)", rot, cur, se));
    out.require(b.seconds < 20.0 * 60.0, fmt("three arms took %.0f s", b.seconds));
    out.detail = fmt("curriculum %.3f px, baseline %.3f px (x%.2f), rotation %.3f px (2 SE of difference %.3f); "
                     "%.0f s for three arms",
                     cur, base, cur > 0 ? base / cur : 0.0, rot, 2.0 * se, b.seconds) +
                 (out.pass ? "" : "; FAILED " + out.detail);
    return out;
}

Outcome determinism(const BenchmarkRuns& b) {
    Outcome out;
    const bool ckpt = slurp(b.curriculum_dir / "final.lckp") == slurp(b.repeat_dir / "final.lckp");
    const bool csv = slurp(b.curriculum_dir / "eval.csv") == slurp(b.repeat_dir / "eval.csv");
    out.require(!slurp(b.curriculum_dir / "final.lckp").empty(), "no checkpoint written");
    out.require(ckpt, "final checkpoints differ");
    out.require(csv, "eval reports differ");
    out.require(to_csv(b.curriculum.report) == to_csv(b.repeat.report), "in-memory reports differ");
    if (out.pass) out.detail = "final.lckp and eval.csv identical across two seeded runs";
    return out;
}

// ---------------------------------------------------------------------------
// 8. pipeline geometry

Outcome pipeline_geometry() {
    Outcome out;
    RawSample wide;
    wide.id = "w";
    wide.image = GrayImage(100, 150, 8);
    wide.points = {{0, 10, 20}};
    const auto sq = pad_to_square(wide);
    out.require(sq.image.height == 150 && sq.points[0] == PointLabel{0, 35, 20}, "pad 100x150");
    const auto pad = square_padding(99, 100);
    out.require(pad.top == 0 && pad.bottom == 1, "pad 99x100");
    const auto rs = resize_to_standard(sq, 512);
    const int er = static_cast<int>(std::lround(35.0 * 512.0 / 150.0));
    const int ec = static_cast<int>(std::lround(20.0 * 512.0 / 150.0));
    out.require(er == 119 && ec == 68 && rs.points[0] == PointLabel{0, 119, 68}, "resize 150 to 512");

    const int size = 41;
    ProcessedSample s;
    s.image = Tensor<double>({1, size, size});
    s.points = {{0, 20, 20}, {1, 33, 12}};
    out.require(rotate_by(s, 0.0).points == s.points, "zero rotation");
    const auto q = rotate_point(PointLabel{0, 30, 20}, 90.0, size);
    out.require(q && *q == PointLabel{0, 20, 30}, "90 degrees");
    for (double th : {-20.0, 13.0, 90.0, 180.0}) {
        const auto c = rotate_point(PointLabel{0, 20, 20}, th, size);
        out.require(c && *c == PointLabel{0, 20, 20}, fmt("centre moved at %.0f degrees", th));
    }

    Rng rng = Rng::derive(2024, {8});
    int worst = 0, trials = 0;
    while (trials < 500) {
        const int n = static_cast<int>(pick(rng, 16, 512));
        const double c = (n - 1) / 2.0;
        const PointLabel p{0, static_cast<int>(rng.below(n)), static_cast<int>(rng.below(n))};
        // stay inside the inscribed circle so neither rotation leaves the frame
        if (std::hypot(p.row - c, p.col - c) > c - 1.0) continue;
        const double th = rng.uniform(-180.0, 180.0);
        const auto fwd = rotate_point(p, th, n);
        const auto back = fwd ? rotate_point(*fwd, -th, n) : std::nullopt;
        if (!back) {
            worst = 99;
            break;
        }
        worst = std::max({worst, std::abs(back->row - p.row), std::abs(back->col - p.col)});
        ++trials;
    }
    out.require(worst <= 1, fmt("round trip off by %d px", worst));
    if (out.pass) out.detail = fmt("pad/resize/rotate examples exact; 500 round trips, worst %d px", worst);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "labelaug_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);

    bool all = true;
    auto report = [&](int id, const char* name, const Outcome& o) {
        std::printf("criterion %d %-22s %s  %s\n", id, name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        all = all && o.pass;
    };
    auto guarded = [](auto&& fn) {
        try {
            return fn();
        } catch (const std::exception& e) {
            Outcome o;
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
            return o;
        }
    };

    report(1, "gradient-suite", guarded(gradient_suite));
    report(2, "morphology-oracle", guarded(morphology_oracle));
    report(3, "reweight-exactness", guarded(reweight_exactness));
    report(4, "schedule-trace", guarded(schedule_trace));
    report(5, "metrics", guarded(metrics_suite));

    try {
        const BenchmarkRuns runs = run_benchmark(root);
        report(6, "synthetic-benchmark", synthetic_benchmark(runs));
        report(7, "determinism", determinism(runs));
    } catch (const std::exception& e) {
        Outcome o{false, std::string("exception: ") + e.what()};
        report(6, "synthetic-benchmark", o);
        report(7, "determinism", o);
    }

    report(8, "pipeline-geometry", guarded(pipeline_geometry));
    return all ? 0 : 1;
}
