#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>

#include "labelaug/errors.hpp"
#include "labelaug/image.hpp"

namespace labelaug {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw DataError(std::string("cannot open ") + path.string());
    return f;
}

// Everything touched after setjmp lives in this struct, which outlives the jump.
struct WriteJob {
    int height;
    int width;
    int bit_depth;
    int color_type;
    std::vector<png_byte> bytes;
    std::vector<png_bytep> rows;
};

bool write_job(std::FILE* fp, WriteJob& job) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_init_io(png, fp);
    png_set_compression_level(png, 9);
    png_set_IHDR(png, info, static_cast<png_uint_32>(job.width), static_cast<png_uint_32>(job.height), job.bit_depth,
                 job.color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, job.rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

void finish_rows(WriteJob& job, std::size_t row_bytes) {
    job.rows.resize(static_cast<std::size_t>(job.height));
    for (int r = 0; r < job.height; ++r) job.rows[static_cast<std::size_t>(r)] = job.bytes.data() + r * row_bytes;
}

struct ReadJob {
    png_uint_32 width = 0;
    png_uint_32 height = 0;
    int bit_depth = 0;
    std::vector<png_byte> bytes;
    std::vector<png_bytep> rows;
};

bool read_job(std::FILE* fp, ReadJob& job) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color & PNG_COLOR_MASK_COLOR || color == PNG_COLOR_TYPE_PALETTE) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    if (depth == 16) png_set_swap(png);  // host little-endian 16-bit samples
    png_read_update_info(png, info);
    job.width = png_get_image_width(png, info);
    job.height = png_get_image_height(png, info);
    job.bit_depth = png_get_bit_depth(png, info);
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    job.bytes.resize(row_bytes * job.height);
    job.rows.resize(job.height);
    for (png_uint_32 r = 0; r < job.height; ++r) job.rows[r] = job.bytes.data() + r * row_bytes;
    png_read_image(png, job.rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

}  // namespace

GrayImage::GrayImage(int h, int w, int depth) : height(h), width(w), bit_depth(depth) {
    if (depth != 8 && depth != 16) throw DataError("GrayImage: bit depth must be 8 or 16");
    pixels.assign(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), 0);
}

GrayImage read_png(const std::filesystem::path& path) {
    auto fp = open_file(path, "rb");
    ReadJob job;
    if (!read_job(fp.get(), job)) throw DataError("cannot decode PNG " + path.string());
    if (job.bit_depth != 8 && job.bit_depth != 16) {
        throw DataError("unsupported PNG bit depth " + std::to_string(job.bit_depth) + " in " + path.string());
    }
    GrayImage img(static_cast<int>(job.height), static_cast<int>(job.width), job.bit_depth);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        img.pixels[i] = job.bit_depth == 8
                            ? job.bytes[i]
                            : static_cast<std::uint16_t>(job.bytes[2 * i] | (job.bytes[2 * i + 1] << 8));
    }
    return img;
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
    WriteJob job{image.height, image.width, image.bit_depth, PNG_COLOR_TYPE_GRAY, {}, {}};
    const std::size_t bpp = image.bit_depth == 16 ? 2 : 1;
    job.bytes.resize(image.pixels.size() * bpp);
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
        if (bpp == 1) {
            job.bytes[i] = static_cast<png_byte>(image.pixels[i]);
        } else {
            job.bytes[2 * i] = static_cast<png_byte>(image.pixels[i] >> 8);  // PNG is big-endian
            job.bytes[2 * i + 1] = static_cast<png_byte>(image.pixels[i] & 0xff);
        }
    }
    finish_rows(job, static_cast<std::size_t>(image.width) * bpp);
    auto fp = open_file(path, "wb");
    if (!write_job(fp.get(), job)) throw DataError("cannot encode PNG " + path.string());
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
    WriteJob job{image.height, image.width, 8, PNG_COLOR_TYPE_RGB, {}, {}};
    job.bytes.reserve(image.pixels.size() * 3);
    for (const auto& p : image.pixels) {
        job.bytes.push_back(p.r);
        job.bytes.push_back(p.g);
        job.bytes.push_back(p.b);
    }
    finish_rows(job, static_cast<std::size_t>(image.width) * 3);
    auto fp = open_file(path, "wb");
    if (!write_job(fp.get(), job)) throw DataError("cannot encode PNG " + path.string());
}

}  // namespace labelaug
