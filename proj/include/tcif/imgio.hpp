#pragma once

// 8-bit grayscale image I/O: binary PGM (P5) and PNG.

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <png.h>

#include "tcif/core.hpp"

namespace tcif::imgio {

struct GrayImage {
    int64_t height = 0;
    int64_t width = 0;
    std::vector<uint8_t> pixels;  // row-major
};

inline uint8_t quantize8(double v) {
    const double s = std::clamp(v, 0.0, 1.0) * 255.0;
    return static_cast<uint8_t>(std::lround(s));
}

inline GrayImage quantize(const std::vector<double>& values, int64_t h, int64_t w) {
    GrayImage img{h, w, {}};
    img.pixels.resize(static_cast<size_t>(h * w));
    for (size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = quantize8(values[i]);
    return img;
}

// min-max normalization; constant fields map to 0
inline GrayImage normalize_quantize(const std::vector<double>& values, int64_t h,
                                    int64_t w) {
    auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
    const double mn = *mn_it, mx = *mx_it;
    const double span = mx - mn;
    GrayImage img{h, w, {}};
    img.pixels.resize(static_cast<size_t>(h * w));
    for (size_t i = 0; i < img.pixels.size(); ++i) {
        const double t = span > 0.0 ? (values[i] - mn) / span : 0.0;
        img.pixels[i] = static_cast<uint8_t>(std::lround(t * 255.0));
    }
    return img;
}

inline std::vector<double> to_floats(const GrayImage& img) {
    std::vector<double> out(img.pixels.size());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<double>(img.pixels[i]) / 255.0;
    return out;
}

inline void save_pgm(const std::filesystem::path& path, const GrayImage& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    f << "P5\n" << img.width << " " << img.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (!f) throw Error("write failed: " + path.string());
}

inline GrayImage load_pgm(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string());
    std::string magic;
    f >> magic;
    if (magic != "P5") throw Error(path.string() + " is not a binary PGM");
    auto next_int = [&]() {
        // skip whitespace and '#' comments
        int64_t v;
        while (true) {
            int c = f.peek();
            if (c == '#') {
                std::string line;
                std::getline(f, line);
            } else if (std::isspace(c)) {
                f.get();
            } else {
                break;
            }
        }
        if (!(f >> v)) throw Error("malformed PGM header: " + path.string());
        return v;
    };
    GrayImage img;
    img.width = next_int();
    img.height = next_int();
    const int64_t maxval = next_int();
    if (maxval != 255) throw Error("unsupported PGM maxval in " + path.string());
    f.get();  // single whitespace after header
    img.pixels.resize(static_cast<size_t>(img.width * img.height));
    f.read(reinterpret_cast<char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
    if (f.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        throw Error("truncated PGM payload: " + path.string());
    return img;
}

inline void save_png(const std::filesystem::path& path, const GrayImage& img) {
    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp) throw Error("cannot open " + path.string() + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw Error("libpng failure writing " + path.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int64_t r = 0; r < img.height; ++r)
        png_write_row(png, const_cast<png_bytep>(img.pixels.data() + r * img.width));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

inline GrayImage load_png(const std::filesystem::path& path) {
    FILE* fp = std::fopen(path.string().c_str(), "rb");
    if (!fp) throw Error("cannot open " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        std::fclose(fp);
        throw Error("libpng failure reading " + path.string());
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (png_get_color_type(png, info) & PNG_COLOR_MASK_COLOR)
        png_set_rgb_to_gray(png, 1, -1.0, -1.0);
    if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);

    GrayImage img;
    img.width = png_get_image_width(png, info);
    img.height = png_get_image_height(png, info);
    img.pixels.resize(static_cast<size_t>(img.width * img.height));
    for (int64_t r = 0; r < img.height; ++r)
        png_read_row(png, img.pixels.data() + r * img.width, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

inline void save_gray(const std::filesystem::path& path, const GrayImage& img) {
    if (path.extension() == ".png")
        save_png(path, img);
    else
        save_pgm(path, img);
}

inline GrayImage load_gray(const std::filesystem::path& path) {
    if (path.extension() == ".png") return load_png(path);
    return load_pgm(path);
}

}  // namespace tcif::imgio
