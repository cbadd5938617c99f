#pragma once

// PNG input through libpng. Palette and 16-bit images are expanded to 8-bit gray or RGB;
// alpha is dropped.

#include "hdm/error.hpp"
#include "hdm/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <string>

namespace hdm {

inline Image8 read_png(const std::string& path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
    require(file != nullptr, ErrorKind::Io, "cannot open " + path);
    png_byte sig[8];
    require(std::fread(sig, 1, 8, file.get()) == 8 && png_sig_cmp(sig, 0, 8) == 0, ErrorKind::Io,
            path + " is not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, ErrorKind::Io, "libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail(ErrorKind::Io, "libpng init failed");
    }
    Image8 img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorKind::Io, path + ": corrupt PNG");
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_byte color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    img.width = int(png_get_image_width(png, info));
    img.height = int(png_get_image_height(png, info));
    img.channels = int(png_get_channels(png, info));
    img.pixels.resize(std::size_t(img.width) * img.height * img.channels);
    rows.resize(img.height);
    for (int i = 0; i < img.height; ++i) rows[i] = img.pixels.data() + std::size_t(i) * img.width * img.channels;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

/// Dispatches on the file signature: PNG through libpng, otherwise PGM/PPM.
inline Image8 read_image(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    require(bool(probe), ErrorKind::Io, "cannot open " + path);
    char first = 0;
    probe.get(first);
    return static_cast<unsigned char>(first) == 0x89 ? read_png(path) : read_pnm(path);
}

}  // namespace hdm
