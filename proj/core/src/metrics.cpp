#include "labelaug/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "labelaug/errors.hpp"

namespace labelaug {
namespace {

std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string fmt_threshold(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", t);
    return buf;
}

}  // namespace

template <typename T>
PredictedLandmark extract_landmark(std::span<const T> channel, int height, int width, int label_id) {
    const std::size_t n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    if (height <= 0 || width <= 0 || channel.size() != n) {
        throw ShapeError("extract_landmark: channel of " + std::to_string(channel.size()) + " values is not " +
                         std::to_string(height) + "x" + std::to_string(width));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (channel[i] > channel[best]) best = i;
    }
    return PredictedLandmark{label_id, static_cast<int>(best / static_cast<std::size_t>(width)),
                             static_cast<int>(best % static_cast<std::size_t>(width)),
                             static_cast<double>(channel[best])};
}

template <typename T>
PredictedLandmark extract_landmark(const Tensor<T>& channel, int label_id) {
    if (channel.rank() != 2) throw ShapeError("extract_landmark: expected (H, W), got " + shape_str(channel.shape()));
    return extract_landmark<T>(channel.values(), static_cast<int>(channel.dim(0)), static_cast<int>(channel.dim(1)),
                               label_id);
}

double distance(const PredictedLandmark& pred, const PointLabel& truth) {
    if (pred.label_id != truth.label_id) {
        throw std::invalid_argument("distance: predicted label " + std::to_string(pred.label_id) +
                                    " compared against ground truth label " + std::to_string(truth.label_id));
    }
    const double dr = pred.row - truth.row;
    const double dc = pred.col - truth.col;
    return std::sqrt(dr * dr + dc * dc);
}

double rmse(std::span<const double> d) {
    if (d.empty()) throw std::invalid_argument("rmse: empty distance list");
    double sum = 0.0;
    for (double v : d) sum += v * v;
    return std::sqrt(sum / static_cast<double>(d.size()));
}

double sdr(std::span<const double> d, double threshold) {
    if (d.empty()) throw std::invalid_argument("sdr: empty distance list");
    if (!(threshold > 0.0)) throw std::invalid_argument("sdr: threshold must be > 0");
    std::size_t hits = 0;
    for (double v : d) hits += v < threshold ? 1 : 0;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(d.size());
}

double mm_rmse(std::span<const double> d, double mm_per_pixel) {
    if (!(mm_per_pixel > 0.0)) throw std::invalid_argument("mm_rmse: pixel spacing must be > 0");
    return rmse(d) * mm_per_pixel;
}

EvalReport aggregate(std::vector<LandmarkResult> rows, std::size_t num_labels) {
    EvalReport r;
    r.num_labels = num_labels;
    std::vector<double> pooled;
    std::vector<std::vector<double>> per_label(num_labels), per_label_mm(num_labels);
    std::vector<bool> mm_complete(num_labels, true);
    for (auto& row : rows) {
        if (row.label_id < 0 || static_cast<std::size_t>(row.label_id) >= num_labels) {
            throw std::invalid_argument("aggregate: label id " + std::to_string(row.label_id) + " out of range");
        }
        if (!row.truth) {
            row.distance_px.reset();
            ++r.skipped;
            continue;
        }
        const double d = distance(row.prediction, *row.truth);
        row.distance_px = d;
        pooled.push_back(d);
        const auto k = static_cast<std::size_t>(row.label_id);
        per_label[k].push_back(d);
        if (row.mm_per_pixel) {
            per_label_mm[k].push_back(d * *row.mm_per_pixel);
        } else {
            mm_complete[k] = false;
        }
    }
    if (pooled.empty()) throw std::invalid_argument("aggregate: no landmark with ground truth to evaluate");
    r.evaluated = pooled.size();
    r.mean_rmse = rmse(pooled);
    for (std::size_t i = 0; i < kSdrThresholds.size(); ++i) r.sdr[i] = sdr(pooled, kSdrThresholds[i]);
    for (std::size_t k = 0; k < num_labels; ++k) {
        r.label_rmse.push_back(per_label[k].empty() ? std::nullopt : std::optional(rmse(per_label[k])));
        const bool mm = mm_complete[k] && !per_label_mm[k].empty();
        r.label_mm_rmse.push_back(mm ? std::optional(rmse(per_label_mm[k])) : std::nullopt);
    }
    r.rows = std::move(rows);
    return r;
}

std::vector<double> evaluated_distances(const EvalReport& report) {
    std::vector<double> d;
    for (const auto& row : report.rows) {
        if (row.distance_px) d.push_back(*row.distance_px);
    }
    return d;
}

std::string to_csv(const EvalReport& r) {
    std::ostringstream os;
    os << "sample_id,label_id,pred_row,pred_col,true_row,true_col,distance_px\n";
    for (const auto& row : r.rows) {
        os << row.sample_id << ',' << row.label_id << ',' << row.prediction.row << ',' << row.prediction.col << ',';
        if (row.truth) {
            os << row.truth->row << ',' << row.truth->col << ',' << fmt_real(*row.distance_px);
        } else {
            os << ",,";
        }
        os << '\n';
    }
    os << "\nMean RMSE";
    for (double t : kSdrThresholds) os << ",SDR<" << fmt_threshold(t);
    os << ",evaluated,skipped\n";
    os << fmt_real(r.mean_rmse);
    for (double s : r.sdr) os << ',' << fmt_real(s);
    os << ',' << r.evaluated << ',' << r.skipped << '\n';
    os << "\nlabel_id,RMSE,RMSE(mm)\n";
    for (std::size_t k = 0; k < r.num_labels; ++k) {
        os << k << ',' << (r.label_rmse[k] ? fmt_real(*r.label_rmse[k]) : "") << ','
           << (r.label_mm_rmse[k] ? fmt_real(*r.label_mm_rmse[k]) : "") << '\n';
    }
    return os.str();
}

void write_csv(const std::filesystem::path& path, const EvalReport& report) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write report " + path.string());
    os << to_csv(report);
}

template PredictedLandmark extract_landmark<float>(std::span<const float>, int, int, int);
template PredictedLandmark extract_landmark<double>(std::span<const double>, int, int, int);
template PredictedLandmark extract_landmark<float>(const Tensor<float>&, int);
template PredictedLandmark extract_landmark<double>(const Tensor<double>&, int);

}  // namespace labelaug
