#include "labelaug/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "labelaug/errors.hpp"

namespace labelaug {
namespace {

constexpr std::uint64_t kSplitStream = 0x73706c6974;  // "split"

double bilinear(const Tensor<double>& img, int size, double y, double x, bool zero_outside) {
    if (!zero_outside) {
        y = std::clamp(y, 0.0, static_cast<double>(size - 1));
        x = std::clamp(x, 0.0, static_cast<double>(size - 1));
    }
    const double fy = std::floor(y), fx = std::floor(x);
    const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
    const double ty = y - fy, tx = x - fx;
    auto px = [&](int r, int c) -> double {
        if (!zero_outside) {
            r = std::min(r, size - 1);
            c = std::min(c, size - 1);
        }
        if (r < 0 || c < 0 || r >= size || c >= size) return 0.0;
        return img[static_cast<std::size_t>(r) * size + c];
    };
    const double top = px(y0, x0) * (1.0 - tx) + (tx > 0.0 ? px(y0, x0 + 1) * tx : 0.0);
    if (ty == 0.0) return top;
    const double bottom = px(y0 + 1, x0) * (1.0 - tx) + (tx > 0.0 ? px(y0 + 1, x0 + 1) * tx : 0.0);
    return top * (1.0 - ty) + bottom * ty;
}

}  // namespace

Padding square_padding(int height, int width) {
    Padding p;
    if (height < width) {
        const int d = width - height;
        p.top = d / 2;
        p.bottom = d - p.top;
    } else if (width < height) {
        const int d = height - width;
        p.left = d / 2;
        p.right = d - p.left;
    }
    return p;
}

RawSample pad_to_square(const RawSample& sample) {
    const GrayImage& src = sample.image;
    const Padding pad = square_padding(src.height, src.width);
    if (pad.top + pad.bottom + pad.left + pad.right == 0) return sample;
    const int side = std::max(src.height, src.width);
    RawSample out;
    out.id = sample.id;
    out.mm_per_pixel = sample.mm_per_pixel;
    out.image = GrayImage(side, side, src.bit_depth);
    for (int r = 0; r < src.height; ++r) {
        for (int c = 0; c < src.width; ++c) out.image.at(r + pad.top, c + pad.left) = src.at(r, c);
    }
    out.points = sample.points;
    for (auto& p : out.points) {
        p.row += pad.top;
        p.col += pad.left;
    }
    return out;
}

ProcessedSample resize_to_standard(const RawSample& square, int size) {
    const GrayImage& src = square.image;
    if (src.height != src.width) {
        throw DataError("resize_to_standard: sample '" + square.id + "' is " + std::to_string(src.height) + "x" +
                        std::to_string(src.width) + "; apply pad_to_square first");
    }
    if (size <= 0) throw ConfigError("resize_to_standard: size must be > 0");
    if (src.height == 0) throw DataError("resize_to_standard: sample '" + square.id + "' is empty");
    const int n = src.height;
    const double maxv = src.max_value();

    Tensor<double> plane({static_cast<std::size_t>(n) * n});
    for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = src.pixels[i] / maxv;

    ProcessedSample out;
    out.id = square.id;
    out.image = Tensor<double>({1, static_cast<std::size_t>(size), static_cast<std::size_t>(size)});
    // Sample positions use the same r * n / size mapping as the landmarks, so an
    // intensity feature and its landmark stay aligned.
    const double ratio = static_cast<double>(n) / size;
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            const double v = size == n ? plane[static_cast<std::size_t>(r) * n + c]
                                       : bilinear(plane, n, r * ratio, c * ratio, false);
            out.image[static_cast<std::size_t>(r) * size + c] = std::clamp(v, 0.0, 1.0);
        }
    }
    out.points = square.points;
    for (auto& p : out.points) {
        p.row = std::clamp(static_cast<int>(std::lround(p.row * static_cast<double>(size) / n)), 0, size - 1);
        p.col = std::clamp(static_cast<int>(std::lround(p.col * static_cast<double>(size) / n)), 0, size - 1);
    }
    if (square.mm_per_pixel) out.mm_per_pixel = *square.mm_per_pixel * ratio;
    out.provenance = Provenance{n, n, 0, 0, static_cast<double>(size) / n};
    return out;
}

ProcessedSample preprocess(const RawSample& sample, int size) {
    validate_sample(sample, std::numeric_limits<std::size_t>::max());
    const Padding pad = square_padding(sample.image.height, sample.image.width);
    ProcessedSample out = resize_to_standard(pad_to_square(sample), size);
    out.provenance.source_height = sample.image.height;
    out.provenance.source_width = sample.image.width;
    out.provenance.pad_top = pad.top;
    out.provenance.pad_left = pad.left;
    return out;
}

Split split_indices(std::size_t n, std::uint64_t seed) {
    if (n < 5) throw DataError("split: need at least 5 samples for a 4:1 split, got " + std::to_string(n));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::derive(seed, {kSplitStream});
    rng.shuffle(order.begin(), order.end());
    const std::size_t n_train = n * 4 / 5;
    Split s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    return s;
}

Split split(const DatasetManifest& manifest, std::uint64_t seed) {
    return split_indices(manifest.entries.size(), seed);
}

std::optional<PointLabel> rotate_point(const PointLabel& p, double degrees, int size) {
    const double c = (size - 1) / 2.0;
    const double th = degrees * std::numbers::pi / 180.0;
    const double ct = std::cos(th), st = std::sin(th);
    const double dr = p.row - c, dc = p.col - c;
    const long r = std::lround(c + dr * ct - dc * st);
    const long col = std::lround(c + dr * st + dc * ct);
    if (r < 0 || col < 0 || r >= size || col >= size) return std::nullopt;
    return PointLabel{p.label_id, static_cast<int>(r), static_cast<int>(col)};
}

ProcessedSample rotate_by(const ProcessedSample& sample, double degrees) {
    const int size = sample.size();
    const double c = (size - 1) / 2.0;
    const double th = degrees * std::numbers::pi / 180.0;
    const double ct = std::cos(th), st = std::sin(th);
    ProcessedSample out = sample;
    for (int r = 0; r < size; ++r) {
        for (int col = 0; col < size; ++col) {
            // inverse rotation of the output position
            const double dr = r - c, dc = col - c;
            const double sy = c + dr * ct + dc * st;
            const double sx = c - dr * st + dc * ct;
            out.image[static_cast<std::size_t>(r) * size + col] =
                std::clamp(bilinear(sample.image, size, sy, sx, true), 0.0, 1.0);
        }
    }
    out.points.clear();
    for (const auto& p : sample.points) {
        if (auto q = rotate_point(p, degrees, size)) out.points.push_back(*q);
    }
    return out;
}

ProcessedSample rotate_augment(const ProcessedSample& sample, Rng& rng, double max_deg) {
    if (!(max_deg >= 0.0)) throw std::invalid_argument("rotate_augment: max_deg must be >= 0");
    const double theta = rng.uniform(-max_deg, max_deg);
    return rotate_by(sample, theta);
}

// ---------------------------------------------------------------------------

std::string format_annotation(const AnnotationRecord& rec) {
    nlohmann::ordered_json j;
    j["id"] = rec.id;
    auto pts = nlohmann::ordered_json::array();
    for (const auto& p : rec.points) pts.push_back({p.label_id, p.row, p.col});
    j["points"] = std::move(pts);
    if (rec.mm_per_pixel) j["mm_per_pixel"] = *rec.mm_per_pixel;
    return j.dump();
}

AnnotationRecord parse_annotation(std::string_view line) {
    AnnotationRecord rec;
    try {
        const auto j = nlohmann::json::parse(line);
        rec.id = j.at("id").get<std::string>();
        for (const auto& p : j.at("points")) {
            if (!p.is_array() || p.size() != 3) throw DataError("annotation '" + rec.id + "': point is not [label, row, col]");
            rec.points.push_back({p[0].get<int>(), p[1].get<int>(), p[2].get<int>()});
        }
        if (j.contains("mm_per_pixel") && !j["mm_per_pixel"].is_null()) {
            rec.mm_per_pixel = j["mm_per_pixel"].get<double>();
            if (!(*rec.mm_per_pixel > 0.0)) throw DataError("annotation '" + rec.id + "': mm_per_pixel must be > 0");
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed annotation record: ") + e.what());
    }
    return rec;
}

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open annotations " + path.string());
    std::vector<AnnotationRecord> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(parse_annotation(line));
    }
    return out;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open manifest " + path.string());
    DatasetManifest m;
    m.root = path.parent_path();
    std::string line;
    bool have_labels = false;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        std::istringstream ls(line);
        std::string first;
        ls >> first;
        if (!have_labels) {
            if (first != "labels") throw DataError("manifest " + path.string() + ": first line must be 'labels <names...>'");
            for (std::string name; ls >> name;) m.label_names.push_back(name);
            if (m.label_names.empty()) throw DataError("manifest " + path.string() + ": no label names");
            have_labels = true;
            continue;
        }
        std::string ann;
        ls >> ann;
        if (ann.empty()) throw DataError("manifest " + path.string() + ": entry '" + line + "' lacks an annotation file");
        m.entries.push_back({first, ann});
    }
    if (!have_labels) throw DataError("manifest " + path.string() + " is empty");
    return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write manifest " + path.string());
    os << "# labelaug manifest v1\nlabels";
    for (const auto& n : m.label_names) os << ' ' << n;
    os << '\n';
    for (const auto& e : m.entries) os << e.image.generic_string() << ' ' << e.annotations.generic_string() << '\n';
    if (!os) throw DataError("write failed for manifest " + path.string());
}

void validate_sample(const RawSample& s, std::size_t num_labels) {
    for (const auto& p : s.points) {
        if (p.label_id < 0 || static_cast<std::size_t>(p.label_id) >= num_labels) {
            throw DataError("sample '" + s.id + "': label id " + std::to_string(p.label_id) + " out of range");
        }
        if (p.row < 0 || p.col < 0 || p.row >= s.image.height || p.col >= s.image.width) {
            throw DataError("sample '" + s.id + "': point (" + std::to_string(p.row) + ", " + std::to_string(p.col) +
                            ") outside " + std::to_string(s.image.height) + "x" + std::to_string(s.image.width));
        }
    }
}

std::vector<RawSample> load_dataset(const DatasetManifest& m) {
    std::map<std::filesystem::path, std::map<std::string, AnnotationRecord>> cache;
    std::vector<RawSample> out;
    out.reserve(m.entries.size());
    for (const auto& e : m.entries) {
        const auto ann_path = m.root / e.annotations;
        auto it = cache.find(ann_path);
        if (it == cache.end()) {
            std::map<std::string, AnnotationRecord> by_id;
            for (auto& r : read_annotations(ann_path)) by_id.emplace(r.id, std::move(r));
            it = cache.emplace(ann_path, std::move(by_id)).first;
        }
        const std::string id = e.image.stem().string();
        auto rec = it->second.find(id);
        if (rec == it->second.end()) {
            throw DataError("no annotation record with id '" + id + "' in " + ann_path.string());
        }
        RawSample s;
        s.id = id;
        s.image = read_png(m.root / e.image);
        s.points = rec->second.points;
        s.mm_per_pixel = rec->second.mm_per_pixel;
        validate_sample(s, m.num_labels());
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace labelaug
