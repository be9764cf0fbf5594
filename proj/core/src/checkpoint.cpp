#include "labelaug/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "labelaug/errors.hpp"

namespace labelaug {
namespace {

constexpr char kMagic[4] = {'L', 'C', 'K', 'P'};

template <typename U>
void put_le(std::string& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename U>
    U get() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(U);
        return v;
    }

    std::string_view take(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw DataError("checkpoint: truncated at byte " + std::to_string(pos_));
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
    for (const auto& e : entries) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

std::optional<double> Checkpoint::scalar(const std::string& name) const {
    const auto* e = find(name);
    if (e == nullptr || e->values.size() != 1) return std::nullopt;
    return e->values.front();
}

void Checkpoint::add(std::string name, Shape shape, std::vector<double> values) {
    if (shape_numel(shape) != values.size()) {
        throw ShapeError("checkpoint: entry '" + name + "' shape " + shape_str(shape) + " holds " +
                         std::to_string(values.size()) + " values");
    }
    entries.push_back({std::move(name), std::move(shape), std::move(values)});
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
    std::string out(kMagic, 4);
    put_le<std::uint32_t>(out, Checkpoint::kVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.precision));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.entries.size()));
    for (const auto& e : ckpt.entries) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
        out += e.name;
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
        for (auto d : e.shape) put_le<std::uint64_t>(out, d);
        for (double v : e.values) {
            if (ckpt.precision == Precision::f32) {
                put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
            } else {
                put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
            }
        }
    }
    return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
    Reader r(bytes);
    if (r.take(4) != std::string_view(kMagic, 4)) throw DataError("checkpoint: bad magic (expected LCKP)");
    const auto version = r.get<std::uint32_t>();
    if (version != Checkpoint::kVersion) {
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    }
    Checkpoint ckpt;
    const auto prec = r.get<std::uint32_t>();
    if (prec != 32 && prec != 64) throw DataError("checkpoint: unsupported precision " + std::to_string(prec));
    ckpt.precision = static_cast<Precision>(prec);
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        CheckpointEntry e;
        const auto len = r.get<std::uint32_t>();
        e.name = std::string(r.take(len));
        const auto rank = r.get<std::uint32_t>();
        for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
        const std::size_t n = shape_numel(e.shape);
        e.values.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            e.values[j] = prec == 32 ? static_cast<double>(std::bit_cast<float>(r.get<std::uint32_t>()))
                                     : std::bit_cast<double>(r.get<std::uint64_t>());
        }
        ckpt.entries.push_back(std::move(e));
    }
    if (!r.done()) throw DataError("checkpoint: trailing bytes after last entry");
    return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const std::string bytes = encode_checkpoint(ckpt);
    // Write-then-rename so an interrupted run never leaves a half-written file.
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw DataError("checkpoint: cannot open " + tmp.string() + " for writing");
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!os) throw DataError("checkpoint: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return decode_checkpoint(ss.str());
}

template <typename T>
Checkpoint make_checkpoint(std::span<const Parameter<T>> params, const Adam<T>* adam) {
    Checkpoint ckpt;
    ckpt.precision = precision_of<T>();
    for (const auto& p : params) {
        ckpt.add(p.name, p.value.shape(), {p.value.values().begin(), p.value.values().end()});
    }
    if (adam != nullptr && !adam->first_moments().empty()) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& m = adam->first_moments()[i];
            const auto& v = adam->second_moments()[i];
            ckpt.add(params[i].name + ".m", m.shape(), {m.values().begin(), m.values().end()});
            ckpt.add(params[i].name + ".v", v.shape(), {v.values().begin(), v.values().end()});
        }
        ckpt.add_scalar("adam.step", static_cast<double>(adam->step_count()));
    }
    return ckpt;
}

template <typename T>
void restore_checkpoint(const Checkpoint& ckpt, std::span<Parameter<T>> params, Adam<T>* adam) {
    auto load = [&](const std::string& name, Tensor<T>& dst) {
        const auto* e = ckpt.find(name);
        if (e == nullptr) throw DataError("checkpoint: missing entry '" + name + "'");
        if (e->shape != dst.shape()) {
            throw DataError("checkpoint: entry '" + name + "' has shape " + shape_str(e->shape) + ", expected " +
                            shape_str(dst.shape()));
        }
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(e->values[i]);
    };
    for (auto& p : params) load(p.name, p.value);
    if (adam == nullptr) return;
    adam->ensure_state(std::span<const Parameter<T>>(params.data(), params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        load(params[i].name + ".m", adam->first_moments()[i]);
        load(params[i].name + ".v", adam->second_moments()[i]);
    }
    const auto step = ckpt.scalar("adam.step");
    if (!step) throw DataError("checkpoint: missing entry 'adam.step'");
    adam->set_step_count(static_cast<std::uint64_t>(*step));
}

template Checkpoint make_checkpoint<float>(std::span<const Parameter<float>>, const Adam<float>*);
template Checkpoint make_checkpoint<double>(std::span<const Parameter<double>>, const Adam<double>*);
template void restore_checkpoint<float>(const Checkpoint&, std::span<Parameter<float>>, Adam<float>*);
template void restore_checkpoint<double>(const Checkpoint&, std::span<Parameter<double>>, Adam<double>*);

}  // namespace labelaug
