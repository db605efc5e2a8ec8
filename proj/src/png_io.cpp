#include "sa2d/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

namespace sa2d {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png_gray(const std::filesystem::path& path, const Image& img) {
    std::vector<unsigned char> bytes(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) bytes[i] = quantize8(img.px[i]);

    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw Error(ErrorKind::IoError, "cannot open for writing: " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::IoError, "png write failed: " + path.string());
    }
    png_init_io(png, fp.get());
    // fixed settings keep the byte stream reproducible
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_NONE);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int i = 0; i < img.h; ++i)
        png_write_row(png, bytes.data() + static_cast<std::size_t>(i) * img.w);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_png_rgb(const std::filesystem::path& path, int h, int w,
                   const std::vector<unsigned char>& rgb) {
    if (rgb.size() != static_cast<std::size_t>(h) * w * 3)
        throw Error(ErrorKind::ShapeMismatch, "rgb buffer size");

    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw Error(ErrorKind::IoError, "cannot open for writing: " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::IoError, "png write failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_NONE);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int i = 0; i < h; ++i)
        png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(i) * w * 3));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::vector<Image> read_png(const std::filesystem::path& path, ChannelMode mode) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw Error(ErrorKind::MissingFile, path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::IoError, "png read failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    // normalize every input to 8-bit RGB, then split planes
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);

    std::vector<Image> planes(3, Image(h, w));
    for (int i = 0; i < h; ++i) {
        png_read_row(png, row.data(), nullptr);
        for (int j = 0; j < w; ++j) {
            planes[0].at(i, j) = dequantize8(row[3 * j + 0]);
            planes[1].at(i, j) = dequantize8(row[3 * j + 1]);
            planes[2].at(i, j) = dequantize8(row[3 * j + 2]);
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    if (mode == ChannelMode::rgb) return planes;

    Image gray(h, w);
    for (std::size_t i = 0; i < gray.size(); ++i) {
        double r = planes[0].px[i], g = planes[1].px[i], b = planes[2].px[i];
        gray.px[i] = (r == g && g == b) ? r : 0.299 * r + 0.587 * g + 0.114 * b;
    }
    return {gray};
}

Image read_png_gray(const std::filesystem::path& path) {
    return read_png(path, ChannelMode::grayscale)[0];
}

}  // namespace sa2d
